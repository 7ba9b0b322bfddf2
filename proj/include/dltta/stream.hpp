#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dltta/array.hpp"
#include "dltta/model.hpp"

namespace dltta {

struct SourceSpec {
  int n_classes = 4;
  int dim = 8;
  NumericArray cluster_means;  // n_classes x dim; default grid when empty
  double cluster_std = 1.0;
  double mean_separation = 8.0;  // spacing of the default mean grid
  int n_samples = 4000;
  std::uint64_t seed = 0;
};

// Balanced Gaussian blobs. Throws ConfigError unless every pair of cluster
// means is at least 6 * cluster_std apart.
LabeledDataset make_source(const SourceSpec& spec);

// Affine corruption applied to source samples: x -> A x + offset + noise,
// A = (1 - w) I + w R for a seeded random rotation R, w = min(1,
// rotation_mix * severity). Severity 0 is the exact identity with zero
// offset and zero noise.
struct ShiftSegment {
  int length = 50;
  double severity = 0.0;
  std::uint64_t seed = 0;
  NumericArray matrix;         // dim x dim
  std::vector<double> offset;  // dim
  double noise_std = 0.0;
};

struct ShiftScales {
  double rotation_mix = 0.6;
  double offset_scale = 2.0;
  double noise_scale = 0.4;
};

enum class SchedulePattern { alternating, ramp, constant };

SchedulePattern schedule_pattern_from_string(std::string_view name);
const char* schedule_pattern_name(SchedulePattern pattern);

// alternating: mild, severe, mild, ... ; ramp: linear mild -> severe across
// segments; constant: severe everywhere.
std::vector<ShiftSegment> make_schedule(SchedulePattern pattern, int n_segments, double mild,
                                        double severe, int segment_length, int dim,
                                        const ShiftScales& scales, std::uint64_t seed);

// What adaptation is allowed to see: features and a coarse severity tag.
// Labels stay inside the stream and come out only through labels_in_order()
// for scoring after a run.
struct Batch {
  NumericArray features;  // B x dim
  std::string severity_tag;
};

class ShiftStream {
 public:
  ShiftStream(const SourceSpec& source, std::vector<ShiftSegment> schedule, int batch_size,
              std::uint64_t seed);

  std::optional<Batch> next_batch();
  void reset();

  // Permutes whole batches (contents untouched) and resets the cursor.
  void reorder(std::uint64_t order_seed);

  std::size_t total_steps() const { return order_.size(); }
  int batch_size() const { return batch_size_; }

  std::vector<std::vector<int>> labels_in_order() const;
  std::vector<std::string> severity_tags_in_order() const;

  // Order-invariant content hash; reorder never changes it.
  std::uint64_t content_checksum() const;

 private:
  struct StoredBatch {
    NumericArray features;
    std::vector<int> labels;
    std::string severity_tag;
  };
  std::vector<StoredBatch> batches_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  int batch_size_ = 0;
};

std::string severity_tag(double severity);

}  // namespace dltta
