#include "dltta/memory_bank.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace dltta {

Similarity similarity_from_string(std::string_view name) {
  if (name == "l2") return Similarity::l2;
  if (name == "cosine") return Similarity::cosine;
  throw ConfigError("unknown similarity '" + std::string(name) + "'");
}

const char* similarity_name(Similarity sim) { return sim == Similarity::l2 ? "l2" : "cosine"; }

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw DomainError("memory bank: capacity must be >= 1");
}

void MemoryBank::push(std::vector<double> key, std::vector<double> value) {
  if (key.empty() || value.empty()) throw DimensionError("memory bank: empty key or value");
  if (key_dim_ == 0) {
    key_dim_ = key.size();
    value_dim_ = value.size();
  } else if (key.size() != key_dim_ || value.size() != value_dim_) {
    throw DimensionError("memory bank: key/value extents changed");
  }
  double total = 0.0;
  for (double v : value) {
    if (!std::isfinite(v) || v < 0.0) throw DomainError("memory bank: value is not a distribution");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw DomainError("memory bank: value sums to " + std::to_string(total));
  for (double k : key)
    if (!std::isfinite(k)) throw DomainError("memory bank: non-finite key");

  if (entries_.size() == capacity_) entries_.pop_front();
  entries_.push_back(BankEntry{std::move(key), std::move(value), next_index_++});
}

SupportSet MemoryBank::retrieve(std::span<const double> query, std::size_t d,
                                Similarity sim) const {
  if (d == 0) throw DomainError("memory bank: retrieval size must be >= 1");
  if (entries_.empty()) return {};
  if (query.size() != key_dim_) throw DimensionError("memory bank: query width mismatch");

  const auto& k = kernels::active();
  struct Scored {
    double score;  // lower ranks first
    const BankEntry* entry;
  };
  std::vector<Scored> scored;
  scored.reserve(entries_.size());
  for (const auto& e : entries_) {
    const double s = sim == Similarity::l2
                         ? k.sq_l2(query.data(), e.key.data(), key_dim_)
                         : -cosine_similarity(query, e.key);
    scored.push_back({s, &e});
  }
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.entry->insert_index > b.entry->insert_index;  // recency breaks ties
  });

  SupportSet out;
  out.reserve(std::min(d, scored.size()));
  for (std::size_t i = 0; i < scored.size() && i < d; ++i) out.push_back(scored[i].entry);
  return out;
}

std::vector<double> reference_prediction(const SupportSet& support) {
  if (support.empty()) throw StateError("reference_prediction: empty support set");
  const std::size_t dim = support.front()->value.size();
  std::vector<double> out(dim, 0.0);
  const auto& k = kernels::active();
  for (const BankEntry* e : support) {
    if (e->value.size() != dim) throw DimensionError("reference_prediction: ragged values");
    k.add(out.data(), e->value.data(), dim);
  }
  k.scale(out.data(), 1.0 / static_cast<double>(support.size()), dim);
  return out;
}

double sample_discrepancy(std::span<const double> reference, std::span<const double> prediction) {
  return 0.5 * (kl_div(reference, prediction) + kl_div(prediction, reference));
}

double batch_discrepancy(std::span<const double> per_sample) {
  if (per_sample.empty()) throw DomainError("batch_discrepancy: empty batch");
  return kernels::active().sum(per_sample.data(), per_sample.size()) /
         static_cast<double>(per_sample.size());
}

}  // namespace dltta
