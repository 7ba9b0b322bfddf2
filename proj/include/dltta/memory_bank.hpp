#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <string_view>
#include <vector>

#include "dltta/array.hpp"

namespace dltta {

enum class Similarity { l2, cosine };

Similarity similarity_from_string(std::string_view name);
const char* similarity_name(Similarity sim);

struct BankEntry {
  std::vector<double> key;    // feature vector
  std::vector<double> value;  // prediction distribution
  std::uint64_t insert_index;
};

using SupportSet = std::vector<const BankEntry*>;

// Fixed-capacity FIFO of (feature, prediction) pairs with linear-scan
// nearest-neighbor retrieval. Ties on the similarity metric go to the entry
// pushed most recently.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t capacity);

  // Evicts the oldest entry once full. The value must be a distribution
  // (sums to 1 within 1e-6); key and value extents are fixed by the first
  // push.
  void push(std::vector<double> key, std::vector<double> value);

  // The d entries nearest to the query, nearest first, capped at size().
  // An empty result on an empty bank signals the warm-up condition.
  SupportSet retrieve(std::span<const double> query, std::size_t d, Similarity sim) const;

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const std::deque<BankEntry>& entries() const { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<BankEntry> entries_;
  std::uint64_t next_index_ = 0;
  std::size_t key_dim_ = 0;
  std::size_t value_dim_ = 0;
};

// Mean of the support values (the reference prediction p_hat).
std::vector<double> reference_prediction(const SupportSet& support);

// Symmetric KL: (KL(ref || pred) + KL(pred || ref)) / 2, in nats.
double sample_discrepancy(std::span<const double> reference, std::span<const double> prediction);

// Mean of per-sample discrepancies.
double batch_discrepancy(std::span<const double> per_sample);

}  // namespace dltta
