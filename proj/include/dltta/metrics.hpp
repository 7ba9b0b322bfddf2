#pragma once

#include <map>
#include <string>
#include <vector>

#include "dltta/engine.hpp"

namespace dltta {

struct LrTraceSummary {
  double min = 0.0;
  double mean = 0.0;
  double max = 0.0;
};

struct Metrics {
  double streaming_accuracy = 0.0;  // over all samples of all steps
  std::map<std::string, double> per_segment_accuracy;  // keyed by severity tag
  double loss_smoothness = 0.0;  // mean |loss_{t+1} - loss_t|
  LrTraceSummary lr_trace;
  double final_accuracy = 0.0;  // over the last 20% of steps
};

// labels[t] aligns with telemetry[t]; sizes and batch widths must agree.
Metrics compute_metrics(const std::vector<StepTelemetry>& telemetry,
                        const std::vector<std::vector<int>>& labels);

// Hits per step, same alignment. Used for the telemetry CSV.
std::vector<int> correct_counts(const std::vector<StepTelemetry>& telemetry,
                                const std::vector<std::vector<int>>& labels);

double mean_of(const std::vector<double>& v);
double population_std(const std::vector<double>& v);

}  // namespace dltta
