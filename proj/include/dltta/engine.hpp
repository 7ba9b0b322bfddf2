#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dltta/memory_bank.hpp"
#include "dltta/model.hpp"
#include "dltta/objective.hpp"
#include "dltta/stream.hpp"

namespace dltta {

enum class Method { none, ptbn, fixed, dltta };

Method method_from_string(std::string_view name);
const char* method_name(Method method);

struct AdaptConfig {
  Method method = Method::dltta;
  double alpha = 1e-3;       // initial / fixed learning rate
  int batch_size = 16;       // B
  int retrieval_size = 12;   // D
  int capacity_steps = 4;    // bank capacity = capacity_steps * B
  int steps_per_batch = 1;
  ObjectiveKind objective = ObjectiveKind::entropy;
  NormPolicy norm_policy;
  Similarity similarity = Similarity::l2;
};

void validate_adapt_config(const AdaptConfig& cfg);

// Discrepancy carries -1 while the bank is warming up and for methods that
// never compute one; applied_lr is 0 for none/ptbn. bank_size is the
// occupancy at the start of the step. predicted_probs come from the
// post-update forward pass (the pre-update pass when the step aborted).
struct StepTelemetry {
  int step_index = 0;
  double discrepancy = -1.0;
  double applied_lr = 0.0;
  double tta_loss_before = 0.0;
  std::vector<int> predicted_classes;
  NumericArray predicted_probs;
  std::size_t bank_size = 0;
  std::string severity_tag;
  bool aborted = false;
};

// eta = alpha * discrepancy. Both arguments must be finite and >= 0.
double dynamic_lr(double discrepancy, double alpha);

// One Algorithm-1 step on `batch`. For fixed/dltta: forward under theta_t,
// retrieve + measure discrepancy, take steps_per_batch gradient steps (dltta
// re-applies the rate law at each inner step), then forward under theta_{t+1}
// for the reported predictions and the per-sample bank pushes. A non-finite
// loss, gradient, or learning rate aborts the step with model and bank
// untouched.
StepTelemetry adapt_step(Model& m, MemoryBank& bank, const NumericArray& batch,
                         const AdaptConfig& cfg, int step_index, std::string severity_tag);

struct RunResult {
  std::vector<StepTelemetry> telemetry;
  std::vector<std::vector<int>> labels;  // revealed by the stream after the run
  bool any_aborted = false;
};

// Drives adapt_step over the stream (capped at `horizon` steps when > 0),
// carrying model and bank state across the whole run.
RunResult run_stream(Model& m, ShiftStream& stream, const AdaptConfig& cfg, int horizon = 0);

}  // namespace dltta
