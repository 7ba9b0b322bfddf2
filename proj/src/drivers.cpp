#include "dltta/drivers.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <thread>

#include "json.hpp"

#include "dltta/errors.hpp"
#include "dltta/manifest.hpp"
#include "dltta/plots.hpp"
#include "dltta/telemetry_io.hpp"

namespace dltta {
namespace {

nlohmann::json metrics_to_json(const Metrics& m) {
  nlohmann::json j;
  j["streaming_accuracy"] = m.streaming_accuracy;
  j["per_segment_accuracy"] = m.per_segment_accuracy;
  j["loss_smoothness"] = m.loss_smoothness;
  j["lr_trace"] = {{"min", m.lr_trace.min}, {"mean", m.lr_trace.mean}, {"max", m.lr_trace.max}};
  j["final_accuracy"] = m.final_accuracy;
  return j;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw FormatError("json: cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw FormatError("json: write failed for " + path.string());
}

std::uint64_t order_seed_for(std::uint64_t stream_seed, int order_index) {
  return stream_seed + 1000003ull * static_cast<std::uint64_t>(order_index + 1);
}

}  // namespace

RunOutcome execute_run(const Scenario& sc, const Model& source_model, const RunOverrides& ov) {
  Scenario run_sc = sc;
  if (ov.method) run_sc.adapt.method = *ov.method;
  if (ov.alpha) run_sc.adapt.alpha = *ov.alpha;
  if (ov.retrieval_size) run_sc.adapt.retrieval_size = *ov.retrieval_size;
  if (ov.steps_per_batch) run_sc.adapt.steps_per_batch = *ov.steps_per_batch;

  ShiftStream stream = run_sc.make_stream(ov.stream_seed.value_or(run_sc.stream_seed));
  if (ov.order_seed) stream.reorder(*ov.order_seed);

  Model model = source_model;
  const auto t0 = std::chrono::steady_clock::now();
  RunResult rr = run_stream(model, stream, run_sc.adapt, run_sc.horizon);
  const auto t1 = std::chrono::steady_clock::now();

  RunOutcome out;
  out.method = method_name(run_sc.adapt.method);
  out.metrics = compute_metrics(rr.telemetry, rr.labels);
  out.correct = correct_counts(rr.telemetry, rr.labels);
  out.stream_checksum = stream.content_checksum();
  out.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
  out.result = std::move(rr);
  return out;
}

Model train_scenario_model(const Scenario& sc, std::vector<TrainLogRow>* log) {
  const LabeledDataset data = make_source(sc.source);
  Model model = make_model(sc.model);
  auto rows = train_source(model, data, sc.train);
  if (log) *log = std::move(rows);
  return model;
}

std::vector<SweepCell> sweep_lr(const Scenario& sc, const Model& source_model,
                                const std::vector<Method>& methods,
                                const std::vector<double>& alphas,
                                const std::vector<std::uint64_t>& seeds) {
  if (methods.empty() || alphas.empty() || seeds.empty())
    throw ConfigError("sweep-lr: methods, alphas, and seeds must be non-empty");

  std::vector<SweepCell> cells;
  for (const Method method : methods)
    for (const double alpha : alphas)
      for (const std::uint64_t seed : seeds)
        cells.push_back({method_name(method), alpha, seed, {}});

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) break;
      RunOverrides ov;
      ov.method = method_from_string(cells[i].method);
      ov.alpha = cells[i].alpha;
      ov.stream_seed = cells[i].seed;
      cells[i].metrics = execute_run(sc, source_model, ov).metrics;
    }
  };
  const std::size_t n_workers =
      std::min<std::size_t>(cells.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return cells;
}

std::vector<std::filesystem::path> cli_train(const RunConfig& cfg, const CliOverrides& ov,
                                             const std::filesystem::path& out_dir) {
  Scenario sc = build_scenario(cfg);
  ManifestBuilder manifest("train", cfg);
  if (ov.seed) {
    sc.train.seed = *ov.seed;
    manifest.add_override("train.seed", std::to_string(*ov.seed));
  }

  std::filesystem::create_directories(out_dir);
  std::vector<TrainLogRow> log;
  const Model model = train_scenario_model(sc, &log);

  const auto model_path = out_dir / "model.bin";
  const auto log_path = out_dir / "train_log.csv";
  save_model(model, model_path);
  write_train_log_csv(log_path, log);

  if (!log.empty()) {
    manifest.add_note("final_train_accuracy", format_double(log.back().train_accuracy));
    manifest.add_note("final_val_accuracy", format_double(log.back().val_accuracy));
  }
  manifest.add_output(model_path);
  manifest.add_output(log_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {model_path, log_path, manifest_path};
}

std::vector<std::filesystem::path> cli_adapt(const RunConfig& cfg, const CliOverrides& ov,
                                             const std::filesystem::path& model_path,
                                             const std::filesystem::path& out_dir) {
  const Scenario sc = build_scenario(cfg);
  const Model source_model = load_model(model_path);

  ManifestBuilder manifest("adapt", cfg);
  manifest.add_input(model_path);
  RunOverrides run_ov;
  if (ov.seed) {
    run_ov.stream_seed = *ov.seed;
    manifest.add_override("stream.seed", std::to_string(*ov.seed));
  }
  if (ov.method) {
    run_ov.method = method_from_string(*ov.method);
    manifest.add_override("adapt.method", *ov.method);
  }

  const RunOutcome outcome = execute_run(sc, source_model, run_ov);

  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "telemetry.csv";
  TelemetryCsvWriter writer(csv_path);
  writer.add_run(outcome.method, outcome.result.telemetry, outcome.correct);
  writer.close();

  nlohmann::json mj = metrics_to_json(outcome.metrics);
  mj["method"] = outcome.method;
  mj["any_aborted"] = outcome.result.any_aborted;
  const auto metrics_path = out_dir / "metrics.json";
  write_json(metrics_path, mj);

  manifest.add_note("stream_checksum", hash_hex(outcome.stream_checksum));
  manifest.add_output(csv_path);
  manifest.add_output(metrics_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {csv_path, metrics_path, manifest_path};
}

std::vector<std::filesystem::path> cli_compare(const RunConfig& cfg, const CliOverrides& ov,
                                               const std::filesystem::path& model_path,
                                               const std::filesystem::path& out_dir) {
  const Scenario sc = build_scenario(cfg);
  const Model source_model = load_model(model_path);

  ManifestBuilder manifest("compare", cfg);
  manifest.add_input(model_path);
  std::uint64_t seed = sc.stream_seed;
  if (ov.seed) {
    seed = *ov.seed;
    manifest.add_override("stream.seed", std::to_string(seed));
  }

  std::filesystem::create_directories(out_dir);
  const auto csv_path = out_dir / "compare.csv";
  TelemetryCsvWriter writer(csv_path);
  nlohmann::json mj;
  for (const Method method : {Method::none, Method::ptbn, Method::fixed, Method::dltta}) {
    RunOverrides run_ov;
    run_ov.method = method;
    run_ov.stream_seed = seed;
    const RunOutcome outcome = execute_run(sc, source_model, run_ov);
    writer.add_run(outcome.method, outcome.result.telemetry, outcome.correct);
    mj[outcome.method] = metrics_to_json(outcome.metrics);
  }
  writer.close();

  const auto metrics_path = out_dir / "metrics.json";
  write_json(metrics_path, mj);
  manifest.add_output(csv_path);
  manifest.add_output(metrics_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {csv_path, metrics_path, manifest_path};
}

std::vector<std::filesystem::path> cli_sweep_lr(const RunConfig& cfg, const CliOverrides& ov,
                                                const std::filesystem::path& model_path,
                                                const std::vector<std::string>& methods,
                                                const std::vector<double>& alphas,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::filesystem::path& out_dir) {
  const Scenario sc = build_scenario(cfg);
  const Model source_model = load_model(model_path);

  ManifestBuilder manifest("sweep-lr", cfg);
  manifest.add_input(model_path);
  std::vector<Method> parsed;
  std::string methods_note, alphas_note, seeds_note;
  for (const auto& m : methods) {
    parsed.push_back(method_from_string(m));
    methods_note += (methods_note.empty() ? "" : ",") + m;
  }
  for (double a : alphas) alphas_note += (alphas_note.empty() ? "" : ",") + format_double(a);
  for (auto s : seeds) seeds_note += (seeds_note.empty() ? "" : ",") + std::to_string(s);
  manifest.add_note("methods", methods_note);
  manifest.add_note("alphas", alphas_note);
  manifest.add_note("seeds", seeds_note);
  if (ov.seed) manifest.add_override("stream.seed", std::to_string(*ov.seed));

  const auto cells = sweep_lr(sc, source_model, parsed, alphas, seeds);

  std::filesystem::create_directories(out_dir);
  std::vector<std::vector<std::string>> run_rows;
  for (const auto& c : cells)
    run_rows.push_back({c.method, format_double(c.alpha), std::to_string(c.seed),
                        format_double(c.metrics.streaming_accuracy),
                        format_double(c.metrics.final_accuracy),
                        format_double(c.metrics.loss_smoothness)});
  const auto runs_path = out_dir / "sweep_runs.csv";
  write_csv(runs_path,
            {"method", "alpha", "seed", "streaming_accuracy", "final_accuracy", "loss_smoothness"},
            run_rows);

  std::vector<std::vector<std::string>> summary_rows;
  std::map<std::string, std::vector<double>> grid_means;  // per-method means across alphas
  for (const auto& m : methods) {
    for (const double a : alphas) {
      std::vector<double> finals;
      for (const auto& c : cells)
        if (c.method == m && c.alpha == a) finals.push_back(c.metrics.final_accuracy);
      summary_rows.push_back({m, format_double(a), format_double(mean_of(finals)),
                              format_double(population_std(finals))});
      grid_means[m].push_back(mean_of(finals));
    }
  }
  const auto summary_path = out_dir / "sweep_summary.csv";
  write_csv(summary_path, {"method", "alpha", "mean_final_accuracy", "std_final_accuracy"},
            summary_rows);

  std::vector<std::vector<std::string>> grid_rows;
  for (const auto& m : methods)
    grid_rows.push_back({m, format_double(mean_of(grid_means[m])),
                         format_double(population_std(grid_means[m]))});
  const auto grid_path = out_dir / "sweep_grid.csv";
  write_csv(grid_path, {"method", "grid_mean_final_accuracy", "grid_std_final_accuracy"},
            grid_rows);

  manifest.add_output(runs_path);
  manifest.add_output(summary_path);
  manifest.add_output(grid_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {runs_path, summary_path, grid_path, manifest_path};
}

std::vector<std::filesystem::path> cli_order_study(const RunConfig& cfg, const CliOverrides& ov,
                                                   const std::filesystem::path& model_path,
                                                   int n_orders,
                                                   const std::filesystem::path& out_dir) {
  if (n_orders < 2) throw ConfigError("order-study: need at least 2 orders");
  const Scenario sc = build_scenario(cfg);
  const Model source_model = load_model(model_path);

  ManifestBuilder manifest("order-study", cfg);
  manifest.add_input(model_path);
  std::uint64_t seed = sc.stream_seed;
  if (ov.seed) {
    seed = *ov.seed;
    manifest.add_override("stream.seed", std::to_string(seed));
  }
  Method method = sc.adapt.method;
  if (ov.method) {
    method = method_from_string(*ov.method);
    manifest.add_override("adapt.method", *ov.method);
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<double> finals;
  std::uint64_t checksum = 0;
  bool checksum_consistent = true;
  for (int i = 0; i < n_orders; ++i) {
    RunOverrides run_ov;
    run_ov.method = method;
    run_ov.stream_seed = seed;
    run_ov.order_seed = order_seed_for(seed, i);
    const RunOutcome outcome = execute_run(sc, source_model, run_ov);
    if (i == 0)
      checksum = outcome.stream_checksum;
    else
      checksum_consistent = checksum_consistent && checksum == outcome.stream_checksum;
    finals.push_back(outcome.metrics.final_accuracy);
    rows.push_back({std::to_string(i), std::to_string(*run_ov.order_seed),
                    hash_hex(outcome.stream_checksum),
                    format_double(outcome.metrics.streaming_accuracy),
                    format_double(outcome.metrics.final_accuracy)});
  }

  std::filesystem::create_directories(out_dir);
  const auto orders_path = out_dir / "orders.csv";
  write_csv(orders_path,
            {"order_index", "order_seed", "content_checksum", "streaming_accuracy",
             "final_accuracy"},
            rows);

  nlohmann::json summary;
  summary["method"] = method_name(method);
  summary["n_orders"] = n_orders;
  summary["final_accuracy_std_points"] = 100.0 * population_std(finals);
  summary["final_accuracy_spread_points"] =
      100.0 * (*std::max_element(finals.begin(), finals.end()) -
               *std::min_element(finals.begin(), finals.end()));
  summary["content_checksum_consistent"] = checksum_consistent;
  const auto summary_path = out_dir / "order_summary.json";
  write_json(summary_path, summary);

  manifest.add_output(orders_path);
  manifest.add_output(summary_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {orders_path, summary_path, manifest_path};
}

std::vector<std::filesystem::path> cli_retrieval_sweep(const RunConfig& cfg,
                                                       const CliOverrides& ov,
                                                       const std::filesystem::path& model_path,
                                                       const std::vector<int>& d_values,
                                                       const std::filesystem::path& out_dir) {
  if (d_values.empty()) throw ConfigError("retrieval-sweep: no d values");
  const Scenario sc = build_scenario(cfg);
  const Model source_model = load_model(model_path);

  ManifestBuilder manifest("retrieval-sweep", cfg);
  manifest.add_input(model_path);
  std::uint64_t seed = sc.stream_seed;
  if (ov.seed) {
    seed = *ov.seed;
    manifest.add_override("stream.seed", std::to_string(seed));
  }

  std::vector<std::vector<std::string>> rows;
  for (const int d : d_values) {
    RunOverrides run_ov;
    run_ov.retrieval_size = d;
    run_ov.stream_seed = seed;
    const RunOutcome outcome = execute_run(sc, source_model, run_ov);
    rows.push_back({std::to_string(d), format_double(outcome.metrics.streaming_accuracy),
                    format_double(outcome.metrics.final_accuracy),
                    format_double(outcome.metrics.loss_smoothness)});
  }

  std::filesystem::create_directories(out_dir);
  const auto sweep_path = out_dir / "retrieval.csv";
  write_csv(sweep_path, {"d", "streaming_accuracy", "final_accuracy", "loss_smoothness"}, rows);
  manifest.add_output(sweep_path);
  const auto manifest_path = out_dir / "manifest.json";
  manifest.write(manifest_path);
  return {sweep_path, manifest_path};
}

std::vector<std::filesystem::path> cli_emit_plots(const std::vector<std::filesystem::path>& csvs,
                                                  const std::filesystem::path& out_dir) {
  return emit_plots(csvs, out_dir);
}

}  // namespace dltta
