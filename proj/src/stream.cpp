#include "dltta/stream.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace dltta {

SchedulePattern schedule_pattern_from_string(std::string_view name) {
  if (name == "alternating") return SchedulePattern::alternating;
  if (name == "ramp") return SchedulePattern::ramp;
  if (name == "constant") return SchedulePattern::constant;
  throw ConfigError("unknown schedule pattern '" + std::string(name) + "'");
}

const char* schedule_pattern_name(SchedulePattern pattern) {
  switch (pattern) {
    case SchedulePattern::alternating:
      return "alternating";
    case SchedulePattern::ramp:
      return "ramp";
    case SchedulePattern::constant:
      return "constant";
  }
  return "?";
}

std::string severity_tag(double severity) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", severity);
  return buf;
}

namespace {

NumericArray default_means(int n_classes, int dim, double separation) {
  // Class c sits at `separation / 2` along axes (2c, 2c+1), so any two
  // classes are exactly `separation` apart when 2 * n_classes <= dim.
  NumericArray means(n_classes, dim);
  const double v = separation / 2.0;
  for (int c = 0; c < n_classes; ++c) {
    means.at(c, (2 * c) % dim) = v;
    means.at(c, (2 * c + 1) % dim) = v;
  }
  return means;
}

void check_separation(const NumericArray& means, double cluster_std) {
  for (std::size_t a = 0; a < means.rows; ++a)
    for (std::size_t b = a + 1; b < means.rows; ++b) {
      const double d = l2_distance(means.row_span(a), means.row_span(b));
      if (d < 6.0 * cluster_std)
        throw ConfigError("source: cluster means " + std::to_string(a) + " and " +
                          std::to_string(b) + " are " + std::to_string(d) +
                          " apart, need >= 6 * cluster_std = " + std::to_string(6.0 * cluster_std));
    }
}

// Random rotation from a seeded Gaussian matrix via modified Gram-Schmidt.
NumericArray random_rotation(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  NumericArray q(dim, dim);
  for (auto& v : q.data) v = normal(rng);
  // Orthonormalize columns.
  for (int j = 0; j < dim; ++j) {
    for (int k = 0; k < j; ++k) {
      double proj = 0.0;
      for (int i = 0; i < dim; ++i) proj += q.at(i, j) * q.at(i, k);
      for (int i = 0; i < dim; ++i) q.at(i, j) -= proj * q.at(i, k);
    }
    double norm = 0.0;
    for (int i = 0; i < dim; ++i) norm += q.at(i, j) * q.at(i, j);
    norm = std::sqrt(norm);
    if (norm < 1e-10) throw DomainError("random_rotation: degenerate draw");
    for (int i = 0; i < dim; ++i) q.at(i, j) /= norm;
  }
  return q;
}

}  // namespace

LabeledDataset make_source(const SourceSpec& spec) {
  if (spec.n_classes < 2) throw ConfigError("source: n_classes must be >= 2");
  if (spec.dim < 1) throw ConfigError("source: dim must be >= 1");
  if (!(spec.cluster_std > 0.0)) throw ConfigError("source: cluster_std must be > 0");
  if (spec.n_samples < 0) throw ConfigError("source: n_samples must be >= 0");

  NumericArray means = spec.cluster_means;
  if (means.size() == 0) {
    if (2 * spec.n_classes > spec.dim)
      throw ConfigError("source: default means need dim >= 2 * n_classes");
    means = default_means(spec.n_classes, spec.dim, spec.mean_separation);
  }
  if (means.rows != static_cast<std::size_t>(spec.n_classes) ||
      means.cols != static_cast<std::size_t>(spec.dim))
    throw ConfigError("source: cluster_means must be n_classes x dim");
  check_separation(means, spec.cluster_std);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  LabeledDataset out;
  out.features = NumericArray(spec.n_samples, spec.dim);
  out.labels.resize(spec.n_samples);
  for (int i = 0; i < spec.n_samples; ++i) {
    const int y = i % spec.n_classes;  // balanced
    out.labels[i] = y;
    double* row = out.features.row(i);
    for (int f = 0; f < spec.dim; ++f)
      row[f] = means.at(y, f) + spec.cluster_std * normal(rng);
  }
  return out;
}

std::vector<ShiftSegment> make_schedule(SchedulePattern pattern, int n_segments, double mild,
                                        double severe, int segment_length, int dim,
                                        const ShiftScales& scales, std::uint64_t seed) {
  if (n_segments < 1) throw ConfigError("schedule: n_segments must be >= 1");
  if (segment_length < 1) throw ConfigError("schedule: segment_length must be >= 1");
  if (mild < 0.0 || severe < 0.0) throw ConfigError("schedule: severities must be >= 0");

  std::vector<ShiftSegment> out(n_segments);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int i = 0; i < n_segments; ++i) {
    ShiftSegment& seg = out[i];
    seg.length = segment_length;
    seg.seed = rng();
    switch (pattern) {
      case SchedulePattern::alternating:
        seg.severity = (i % 2 == 0) ? mild : severe;
        break;
      case SchedulePattern::ramp:
        seg.severity = n_segments == 1
                           ? severe
                           : mild + (severe - mild) * static_cast<double>(i) /
                                        static_cast<double>(n_segments - 1);
        break;
      case SchedulePattern::constant:
        seg.severity = severe;
        break;
    }

    std::mt19937_64 seg_rng(seg.seed);
    seg.offset.assign(dim, 0.0);
    seg.noise_std = scales.noise_scale * seg.severity;
    if (seg.severity == 0.0) {
      seg.matrix = NumericArray(dim, dim);
      for (int f = 0; f < dim; ++f) seg.matrix.at(f, f) = 1.0;
      continue;
    }
    const double w = std::min(1.0, scales.rotation_mix * seg.severity);
    const NumericArray r = random_rotation(dim, seg_rng);
    seg.matrix = NumericArray(dim, dim);
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < dim; ++b)
        seg.matrix.at(a, b) = (a == b ? 1.0 - w : 0.0) + w * r.at(a, b);
    std::normal_distribution<double> seg_normal(0.0, 1.0);
    for (int f = 0; f < dim; ++f)
      seg.offset[f] = scales.offset_scale * seg.severity * seg_normal(seg_rng);
  }
  return out;
}

ShiftStream::ShiftStream(const SourceSpec& source, std::vector<ShiftSegment> schedule,
                         int batch_size, std::uint64_t seed)
    : batch_size_(batch_size) {
  if (batch_size < 1) throw ConfigError("stream: batch_size must be >= 1");
  if (schedule.empty()) throw ConfigError("stream: empty schedule");

  NumericArray means = source.cluster_means;
  if (means.size() == 0) means = default_means(source.n_classes, source.dim, source.mean_separation);
  check_separation(means, source.cluster_std);

  const auto& k = kernels::active();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> base(source.dim);
  for (const ShiftSegment& seg : schedule) {
    if (seg.matrix.rows != static_cast<std::size_t>(source.dim) ||
        seg.matrix.cols != static_cast<std::size_t>(source.dim) ||
        seg.offset.size() != static_cast<std::size_t>(source.dim))
      throw DimensionError("stream: segment transform extents do not match source dim");
    for (int t = 0; t < seg.length; ++t) {
      StoredBatch sb;
      sb.features = NumericArray(batch_size, source.dim);
      sb.labels.resize(batch_size);
      sb.severity_tag = severity_tag(seg.severity);
      for (int r = 0; r < batch_size; ++r) {
        const int y = static_cast<int>(rng() % static_cast<std::uint64_t>(source.n_classes));
        sb.labels[r] = y;
        for (int f = 0; f < source.dim; ++f)
          base[f] = means.at(y, f) + source.cluster_std * normal(rng);
        double* row = sb.features.row(r);
        for (int f = 0; f < source.dim; ++f)
          row[f] = k.dot(seg.matrix.row(f), base.data(), base.size()) + seg.offset[f];
        if (seg.noise_std > 0.0)
          for (int f = 0; f < source.dim; ++f) row[f] += seg.noise_std * normal(rng);
      }
      batches_.push_back(std::move(sb));
    }
  }
  order_.resize(batches_.size());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
}

std::optional<Batch> ShiftStream::next_batch() {
  if (cursor_ >= order_.size()) return std::nullopt;
  const StoredBatch& sb = batches_[order_[cursor_++]];
  return Batch{sb.features, sb.severity_tag};
}

void ShiftStream::reset() { cursor_ = 0; }

void ShiftStream::reorder(std::uint64_t order_seed) {
  std::mt19937_64 rng(order_seed);
  for (std::size_t i = order_.size(); i > 1; --i)
    std::swap(order_[i - 1], order_[rng() % i]);
  cursor_ = 0;
}

std::vector<std::vector<int>> ShiftStream::labels_in_order() const {
  std::vector<std::vector<int>> out;
  out.reserve(order_.size());
  for (std::size_t i : order_) out.push_back(batches_[i].labels);
  return out;
}

std::vector<std::string> ShiftStream::severity_tags_in_order() const {
  std::vector<std::string> out;
  out.reserve(order_.size());
  for (std::size_t i : order_) out.push_back(batches_[i].severity_tag);
  return out;
}

std::uint64_t ShiftStream::content_checksum() const {
  // XOR of per-batch FNV-1a hashes commutes, so any order hashes alike.
  std::uint64_t acc = 0;
  for (const StoredBatch& sb : batches_) {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](const unsigned char* p, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
      }
    };
    mix(reinterpret_cast<const unsigned char*>(sb.features.data.data()),
        sb.features.data.size() * sizeof(double));
    mix(reinterpret_cast<const unsigned char*>(sb.labels.data()), sb.labels.size() * sizeof(int));
    acc ^= h;
  }
  return acc;
}

}  // namespace dltta
