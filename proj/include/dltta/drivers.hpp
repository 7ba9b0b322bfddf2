#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dltta/config.hpp"
#include "dltta/metrics.hpp"

namespace dltta {

// Per-run knobs layered on top of a Scenario; unset fields keep the
// scenario's values.
struct RunOverrides {
  std::optional<Method> method;
  std::optional<double> alpha;
  std::optional<int> retrieval_size;
  std::optional<int> steps_per_batch;
  std::optional<std::uint64_t> stream_seed;
  std::optional<std::uint64_t> order_seed;  // reorders the stream after build
};

struct RunOutcome {
  std::string method;
  RunResult result;
  Metrics metrics;
  std::vector<int> correct;
  std::uint64_t stream_checksum = 0;
  double wall_seconds = 0.0;
};

// Clones the source model, builds the stream, runs it, scores it.
RunOutcome execute_run(const Scenario& sc, const Model& source_model, const RunOverrides& ov);

// Trains the source model for a scenario (no file I/O).
Model train_scenario_model(const Scenario& sc, std::vector<TrainLogRow>* log = nullptr);

struct SweepCell {
  std::string method;
  double alpha = 0.0;
  std::uint64_t seed = 0;
  Metrics metrics;
};

// One run per (method, alpha, seed); parallel across cells, deterministic
// output order.
std::vector<SweepCell> sweep_lr(const Scenario& sc, const Model& source_model,
                                const std::vector<Method>& methods,
                                const std::vector<double>& alphas,
                                const std::vector<std::uint64_t>& seeds);

// CLI entry points. Each writes its artifacts plus manifest.json into
// out_dir and returns the paths it wrote.
struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> method;
};

std::vector<std::filesystem::path> cli_train(const RunConfig& cfg, const CliOverrides& ov,
                                             const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_adapt(const RunConfig& cfg, const CliOverrides& ov,
                                             const std::filesystem::path& model_path,
                                             const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_compare(const RunConfig& cfg, const CliOverrides& ov,
                                               const std::filesystem::path& model_path,
                                               const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_sweep_lr(const RunConfig& cfg, const CliOverrides& ov,
                                                const std::filesystem::path& model_path,
                                                const std::vector<std::string>& methods,
                                                const std::vector<double>& alphas,
                                                const std::vector<std::uint64_t>& seeds,
                                                const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_order_study(const RunConfig& cfg, const CliOverrides& ov,
                                                   const std::filesystem::path& model_path,
                                                   int n_orders,
                                                   const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_retrieval_sweep(const RunConfig& cfg,
                                                       const CliOverrides& ov,
                                                       const std::filesystem::path& model_path,
                                                       const std::vector<int>& d_values,
                                                       const std::filesystem::path& out_dir);

std::vector<std::filesystem::path> cli_emit_plots(const std::vector<std::filesystem::path>& csvs,
                                                  const std::filesystem::path& out_dir);

}  // namespace dltta
