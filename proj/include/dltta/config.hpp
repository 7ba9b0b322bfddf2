#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dltta/engine.hpp"
#include "dltta/stream.hpp"

namespace dltta {

// Flat key = value run configuration. '#' starts a comment; keys outside the
// registry and missing required keys raise ConfigError naming the key.
class RunConfig {
 public:
  static RunConfig from_file(const std::filesystem::path& path);
  static RunConfig from_string(const std::string& text, const std::string& origin = "<string>");

  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value);  // key must be registered

  int get_int(const std::string& key) const;
  double get_double(const std::string& key) const;
  std::uint64_t get_u64(const std::string& key) const;
  std::string get_string(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<double> get_double_list(const std::string& key) const;
  bool has(const std::string& key) const;

  // Every key present, sorted; feeds the run manifest.
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Everything a run needs, resolved from a RunConfig.
struct Scenario {
  ModelSpec model;
  TrainOptions train;
  SourceSpec source;
  SchedulePattern pattern = SchedulePattern::alternating;
  int n_segments = 40;
  int segment_length = 50;
  double mild_severity = 0.0;
  double severe_severity = 1.0;
  ShiftScales scales;
  int stream_batch_size = 16;
  std::uint64_t stream_seed = 0;
  int horizon = 0;  // 0 means the full schedule
  AdaptConfig adapt;

  std::vector<ShiftSegment> schedule() const;
  ShiftStream make_stream(std::uint64_t seed_override) const;
  ShiftStream make_stream() const { return make_stream(stream_seed); }
};

Scenario build_scenario(const RunConfig& cfg);

}  // namespace dltta
