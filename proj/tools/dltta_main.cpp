#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dltta/drivers.hpp"
#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
  std::string out_dir = "out";
  std::string model_path;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_model) {
  cmd->add_option("--config", args.config_path, "run configuration file")->required();
  cmd->add_option("--seed", args.seed, "override the run seed");
  cmd->add_option("--out", args.out_dir, "output directory");
  if (needs_model)
    cmd->add_option("--model", args.model_path, "trained source model")->required();
}

dltta::CliOverrides overrides_of(const CommonArgs& args) {
  dltta::CliOverrides ov;
  ov.seed = args.seed;
  ov.method = args.method;
  return ov;
}

void report(const std::vector<std::filesystem::path>& written) {
  for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic learning-rate test-time adaptation on synthetic shift streams"};
  app.require_subcommand(1);

  CommonArgs train_args, adapt_args, compare_args, sweep_args, order_args, retrieval_args;

  CLI::App* train = app.add_subcommand("train", "train the source model");
  add_common(train, train_args, false);

  CLI::App* adapt = app.add_subcommand("adapt", "run one adaptation method over the stream");
  add_common(adapt, adapt_args, true);
  adapt->add_option("--method", adapt_args.method, "none|ptbn|fixed|dltta");

  CLI::App* compare = app.add_subcommand("compare", "run all methods on the same stream");
  add_common(compare, compare_args, true);

  std::vector<std::string> sweep_methods{"fixed", "dltta"};
  std::vector<double> sweep_alphas;
  std::vector<std::uint64_t> sweep_seeds;
  CLI::App* sweep = app.add_subcommand("sweep-lr", "grid of initial learning rates");
  add_common(sweep, sweep_args, true);
  sweep->add_option("--methods", sweep_methods, "methods to sweep")->delimiter(',');
  sweep->add_option("--alphas", sweep_alphas,
                    "learning-rate grid (default alpha x {1/4, 1/2, 1, 2, 4})")
      ->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "stream seeds (default stream.seed + 0..4)")
      ->delimiter(',');

  int n_orders = 5;
  CLI::App* order = app.add_subcommand("order-study", "re-run under shuffled stream orders");
  add_common(order, order_args, true);
  order->add_option("--method", order_args.method, "none|ptbn|fixed|dltta");
  order->add_option("--orders", n_orders, "number of shuffled orders");

  std::vector<int> d_values{6, 8, 10, 12, 14};
  CLI::App* retrieval = app.add_subcommand("retrieval-sweep", "sweep the retrieval size D");
  add_common(retrieval, retrieval_args, true);
  retrieval->add_option("--d-values", d_values, "retrieval sizes")->delimiter(',');

  std::vector<std::string> plot_csvs;
  std::string plot_out = "out";
  CLI::App* plots = app.add_subcommand("emit-plots", "write matplotlib scripts for CSV outputs");
  plots->add_option("csvs", plot_csvs, "telemetry or sweep CSV files")->required();
  plots->add_option("--out", plot_out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      report(dltta::cli_train(dltta::RunConfig::from_file(train_args.config_path),
                              overrides_of(train_args), train_args.out_dir));
    } else if (*adapt) {
      report(dltta::cli_adapt(dltta::RunConfig::from_file(adapt_args.config_path),
                              overrides_of(adapt_args), adapt_args.model_path,
                              adapt_args.out_dir));
    } else if (*compare) {
      report(dltta::cli_compare(dltta::RunConfig::from_file(compare_args.config_path),
                                overrides_of(compare_args), compare_args.model_path,
                                compare_args.out_dir));
    } else if (*sweep) {
      const auto cfg = dltta::RunConfig::from_file(sweep_args.config_path);
      if (sweep_alphas.empty()) {
        const double alpha = cfg.get_double("adapt.alpha");
        sweep_alphas = {alpha / 4, alpha / 2, alpha, 2 * alpha, 4 * alpha};
      }
      if (sweep_seeds.empty()) {
        const std::uint64_t base = sweep_args.seed.value_or(cfg.get_u64("stream.seed"));
        for (std::uint64_t i = 0; i < 5; ++i) sweep_seeds.push_back(base + i);
      }
      report(dltta::cli_sweep_lr(cfg, overrides_of(sweep_args), sweep_args.model_path,
                                 sweep_methods, sweep_alphas, sweep_seeds, sweep_args.out_dir));
    } else if (*order) {
      report(dltta::cli_order_study(dltta::RunConfig::from_file(order_args.config_path),
                                    overrides_of(order_args), order_args.model_path, n_orders,
                                    order_args.out_dir));
    } else if (*retrieval) {
      report(dltta::cli_retrieval_sweep(dltta::RunConfig::from_file(retrieval_args.config_path),
                                        overrides_of(retrieval_args), retrieval_args.model_path,
                                        d_values, retrieval_args.out_dir));
    } else if (*plots) {
      std::vector<std::filesystem::path> paths(plot_csvs.begin(), plot_csvs.end());
      report(dltta::cli_emit_plots(paths, plot_out));
    }
  } catch (const dltta::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
