#include "dltta/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dltta/errors.hpp"

namespace dltta {

std::vector<int> correct_counts(const std::vector<StepTelemetry>& telemetry,
                                const std::vector<std::vector<int>>& labels) {
  if (telemetry.size() != labels.size())
    throw DimensionError("correct_counts: telemetry/label length mismatch");
  std::vector<int> out(telemetry.size(), 0);
  for (std::size_t t = 0; t < telemetry.size(); ++t) {
    const auto& pred = telemetry[t].predicted_classes;
    if (pred.size() != labels[t].size())
      throw DimensionError("correct_counts: batch width mismatch at step " + std::to_string(t));
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (pred[i] == labels[t][i]) ++out[t];
  }
  return out;
}

Metrics compute_metrics(const std::vector<StepTelemetry>& telemetry,
                        const std::vector<std::vector<int>>& labels) {
  if (telemetry.empty()) throw DomainError("compute_metrics: empty telemetry");
  const std::vector<int> hits = correct_counts(telemetry, labels);

  Metrics m;
  std::size_t total = 0, correct = 0;
  std::map<std::string, std::pair<std::size_t, std::size_t>> per_segment;  // correct, total
  for (std::size_t t = 0; t < telemetry.size(); ++t) {
    const std::size_t b = labels[t].size();
    total += b;
    correct += static_cast<std::size_t>(hits[t]);
    auto& seg = per_segment[telemetry[t].severity_tag];
    seg.first += static_cast<std::size_t>(hits[t]);
    seg.second += b;
  }
  m.streaming_accuracy = static_cast<double>(correct) / static_cast<double>(total);
  for (const auto& [tag, counts] : per_segment)
    m.per_segment_accuracy[tag] =
        static_cast<double>(counts.first) / static_cast<double>(counts.second);

  double jump_sum = 0.0;
  for (std::size_t t = 0; t + 1 < telemetry.size(); ++t)
    jump_sum += std::abs(telemetry[t + 1].tta_loss_before - telemetry[t].tta_loss_before);
  m.loss_smoothness =
      telemetry.size() > 1 ? jump_sum / static_cast<double>(telemetry.size() - 1) : 0.0;

  m.lr_trace.min = std::numeric_limits<double>::infinity();
  m.lr_trace.max = -std::numeric_limits<double>::infinity();
  double lr_sum = 0.0;
  for (const auto& t : telemetry) {
    m.lr_trace.min = std::min(m.lr_trace.min, t.applied_lr);
    m.lr_trace.max = std::max(m.lr_trace.max, t.applied_lr);
    lr_sum += t.applied_lr;
  }
  m.lr_trace.mean = lr_sum / static_cast<double>(telemetry.size());

  const std::size_t tail_start = telemetry.size() - telemetry.size() / 5;
  std::size_t tail_total = 0, tail_correct = 0;
  for (std::size_t t = tail_start; t < telemetry.size(); ++t) {
    tail_total += labels[t].size();
    tail_correct += static_cast<std::size_t>(hits[t]);
  }
  m.final_accuracy = tail_total ? static_cast<double>(tail_correct) / static_cast<double>(tail_total)
                                : m.streaming_accuracy;
  return m;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) throw DomainError("mean_of: empty input");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v) {
  const double mu = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - mu) * (x - mu);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace dltta
