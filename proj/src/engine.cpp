#include "dltta/engine.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "dltta/errors.hpp"

namespace dltta {

Method method_from_string(std::string_view name) {
  if (name == "none") return Method::none;
  if (name == "ptbn") return Method::ptbn;
  if (name == "fixed") return Method::fixed;
  if (name == "dltta") return Method::dltta;
  throw ConfigError("unknown method '" + std::string(name) + "'");
}

const char* method_name(Method method) {
  switch (method) {
    case Method::none:
      return "none";
    case Method::ptbn:
      return "ptbn";
    case Method::fixed:
      return "fixed";
    case Method::dltta:
      return "dltta";
  }
  return "?";
}

void validate_adapt_config(const AdaptConfig& cfg) {
  if (!(cfg.alpha > 0.0) || !std::isfinite(cfg.alpha))
    throw ConfigError("adapt: alpha must be finite and > 0");
  if (cfg.batch_size < 1) throw ConfigError("adapt: batch_size must be >= 1");
  if (cfg.retrieval_size < 1) throw ConfigError("adapt: retrieval_size must be >= 1");
  if (cfg.capacity_steps < 1) throw ConfigError("adapt: capacity_steps must be >= 1");
  if (cfg.steps_per_batch < 1) throw ConfigError("adapt: steps_per_batch must be >= 1");
  if (cfg.method != Method::none && cfg.norm_policy.mode == NormMode::train_running)
    throw ConfigError("adapt: method '" + std::string(method_name(cfg.method)) +
                      "' needs test-time statistics, not norm_mode=train_running");
  if (cfg.norm_policy.ema_momentum <= 0.0 || cfg.norm_policy.ema_momentum >= 1.0)
    throw ConfigError("adapt: ema_momentum must be in (0, 1)");
}

double dynamic_lr(double discrepancy, double alpha) {
  if (!std::isfinite(discrepancy) || discrepancy < 0.0)
    throw DomainError("dynamic_lr: discrepancy must be finite and >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0)
    throw DomainError("dynamic_lr: alpha must be finite and >= 0");
  return alpha * discrepancy;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> row_vector(const NumericArray& a, std::size_t r) {
  return {a.row(r), a.row(r) + a.cols};
}

void push_batch(MemoryBank& bank, const NumericArray& features, const NumericArray& probs) {
  for (std::size_t r = 0; r < features.rows; ++r)
    bank.push(row_vector(features, r), row_vector(probs, r));
}

// -1 while warming up. The warm-up gate is min(retrieval_size, capacity) so
// banks smaller than the retrieval size still leave warm-up once full.
double measure_discrepancy(const MemoryBank& bank, const ForwardResult& fwd,
                           const AdaptConfig& cfg) {
  const std::size_t gate =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.retrieval_size), bank.capacity());
  if (bank.size() < gate) return -1.0;
  std::vector<double> per_sample(fwd.probs.rows);
  for (std::size_t r = 0; r < fwd.probs.rows; ++r) {
    const SupportSet support = bank.retrieve(fwd.features.row_span(r),
                                             static_cast<std::size_t>(cfg.retrieval_size),
                                             cfg.similarity);
    const std::vector<double> reference = reference_prediction(support);
    per_sample[r] = sample_discrepancy(reference, fwd.probs.row_span(r));
  }
  return batch_discrepancy(per_sample);
}

// Running-stat snapshot so an aborted step can undo EMA movement.
std::vector<double> snapshot_running_stats(const Model& m) {
  std::vector<double> out;
  auto grab = [&](const std::vector<Layer>& layers) {
    for (const auto& l : layers)
      if (const auto* bn = std::get_if<BatchNormLayer>(&l)) {
        out.insert(out.end(), bn->running_mean.begin(), bn->running_mean.end());
        out.insert(out.end(), bn->running_var.begin(), bn->running_var.end());
      }
  };
  grab(m.feature_layers);
  grab(m.head_layers);
  return out;
}

void restore_running_stats(Model& m, const std::vector<double>& snap) {
  std::size_t p = 0;
  auto put = [&](std::vector<Layer>& layers) {
    for (auto& l : layers)
      if (auto* bn = std::get_if<BatchNormLayer>(&l)) {
        for (auto& v : bn->running_mean) v = snap[p++];
        for (auto& v : bn->running_var) v = snap[p++];
      }
  };
  put(m.feature_layers);
  put(m.head_layers);
}

std::vector<double> snapshot_adaptable(const Model& m) {
  std::vector<double> out;
  out.reserve(m.adaptable_count());
  std::size_t p = 0;
  visit_params(m, [&](const double& v) {
    if (m.adapt_mask[p++]) out.push_back(v);
  });
  return out;
}

void restore_adaptable(Model& m, const std::vector<double>& snap) {
  std::size_t p = 0, k = 0;
  visit_params(m, [&](double& v) {
    if (m.adapt_mask[p++]) v = snap[k++];
  });
  ++m.revision;
}

}  // namespace

StepTelemetry adapt_step(Model& m, MemoryBank& bank, const NumericArray& batch,
                         const AdaptConfig& cfg, int step_index, std::string severity_tag) {
  validate_adapt_config(cfg);
  if (batch.rows == 0) throw DimensionError("adapt_step: empty batch");

  StepTelemetry t;
  t.step_index = step_index;
  t.bank_size = bank.size();
  t.severity_tag = std::move(severity_tag);

  if (cfg.method == Method::none) {
    const NormPolicy frozen{NormMode::train_running, cfg.norm_policy.ema_momentum};
    auto fwd = forward(m, batch, frozen);
    t.tta_loss_before = entropy_loss(fwd.probs);
    t.predicted_classes = argmax_rows(fwd.probs);
    t.predicted_probs = std::move(fwd.probs);
    return t;
  }

  if (cfg.method == Method::ptbn) {
    // PTBN re-estimates statistics from the test batch itself, independent of the
    // norm policy used by the gradient-based methods.
    const NormPolicy batch_stats{NormMode::test_batch, cfg.norm_policy.ema_momentum};
    auto fwd = forward(m, batch, batch_stats);
    commit_running_stats(m, fwd.cache);
    t.tta_loss_before = entropy_loss(fwd.probs);
    t.discrepancy = measure_discrepancy(bank, fwd, cfg);
    t.predicted_classes = argmax_rows(fwd.probs);
    push_batch(bank, fwd.features, fwd.probs);
    t.predicted_probs = std::move(fwd.probs);
    return t;
  }

  // fixed / dltta
  auto fwd = forward(m, batch, cfg.norm_policy);
  t.tta_loss_before = entropy_loss(fwd.probs);

  const std::vector<double> param_snap = snapshot_adaptable(m);
  const std::vector<double> stat_snap = snapshot_running_stats(m);
  auto abort_step = [&](ForwardResult& at_theta_t) {
    restore_adaptable(m, param_snap);
    restore_running_stats(m, stat_snap);
    t.aborted = true;
    t.applied_lr = 0.0;
    t.predicted_classes = argmax_rows(at_theta_t.probs);
    t.predicted_probs = at_theta_t.probs;
  };

  try {
    t.discrepancy = measure_discrepancy(bank, fwd, cfg);
    const double eta = cfg.method == Method::fixed
                           ? cfg.alpha
                           : (t.discrepancy < 0.0 ? cfg.alpha : dynamic_lr(t.discrepancy, cfg.alpha));
    if (!std::isfinite(eta) || !std::isfinite(t.tta_loss_before))
      throw DomainError("adapt_step: non-finite learning rate or loss");
    t.applied_lr = eta;

    if (eta > 0.0) {
      Gradients grads = backward(m, fwd.cache, entropy_grad_logits(fwd.probs));
      if (!all_finite(grads.values)) throw DomainError("adapt_step: non-finite gradient");
      sgd_step(m, grads, eta);
      for (int k = 1; k < cfg.steps_per_batch; ++k) {
        const auto step_fwd = forward(m, batch, cfg.norm_policy);
        // The rate law is re-applied at the current iterate, so extra inner
        // steps shrink as the model closes in on the bank consensus instead
        // of compounding at a frozen rate.
        double step_eta = eta;
        if (cfg.method == Method::dltta) {
          const double d = measure_discrepancy(bank, step_fwd, cfg);
          step_eta = d < 0.0 ? cfg.alpha : dynamic_lr(d, cfg.alpha);
        }
        grads = backward(m, step_fwd.cache, entropy_grad_logits(step_fwd.probs));
        if (!all_finite(grads.values)) throw DomainError("adapt_step: non-finite gradient");
        sgd_step(m, grads, step_eta);
      }
    }

    auto fwd_after = forward(m, batch, cfg.norm_policy);
    commit_running_stats(m, fwd_after.cache);
    t.predicted_classes = argmax_rows(fwd_after.probs);
    push_batch(bank, fwd_after.features, fwd_after.probs);
    t.predicted_probs = std::move(fwd_after.probs);
  } catch (const DomainError&) {
    abort_step(fwd);
  }
  return t;
}

RunResult run_stream(Model& m, ShiftStream& stream, const AdaptConfig& cfg, int horizon) {
  validate_adapt_config(cfg);
  MemoryBank bank(static_cast<std::size_t>(cfg.capacity_steps) *
                  static_cast<std::size_t>(cfg.batch_size));
  RunResult out;
  const auto labels = stream.labels_in_order();
  int step = 0;
  while (auto batch = stream.next_batch()) {
    if (horizon > 0 && step >= horizon) break;
    StepTelemetry t = adapt_step(m, bank, batch->features, cfg, step, batch->severity_tag);
    out.any_aborted = out.any_aborted || t.aborted;
    out.labels.push_back(labels[static_cast<std::size_t>(step)]);
    out.telemetry.push_back(std::move(t));
    ++step;
  }
  return out;
}

}  // namespace dltta
