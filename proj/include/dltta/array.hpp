#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace dltta {

// Dense row-major matrix of doubles. Rank-1 data is carried as a single row.
struct NumericArray {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  NumericArray() = default;
  NumericArray(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  static NumericArray from_rows(std::initializer_list<std::initializer_list<double>> rows);

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
  std::span<const double> row_span(std::size_t r) const { return {row(r), cols}; }
  std::size_t size() const { return data.size(); }
  bool finite() const;
  bool operator==(const NumericArray&) const = default;
};

// C = A * B. Throws DimensionError on mismatched inner extents and
// DomainError when the product contains non-finite values.
NumericArray matmul(const NumericArray& a, const NumericArray& b);

// Row-wise softmax with max-subtraction. Rows must be non-empty.
NumericArray softmax(const NumericArray& logits);

inline constexpr double kProbClampEps = 1e-7;

// KL(p || q) in nats. Both arguments are clamped to [kProbClampEps, 1] and
// renormalized before evaluation, so kl_div(p, p) is exactly zero.
double kl_div(std::span<const double> p, std::span<const double> q);

double l2_distance(std::span<const double> a, std::span<const double> b);

// dot(a, b) / (max(|a|, eps) * max(|b|, eps)); larger means more similar
double cosine_similarity(std::span<const double> a, std::span<const double> b);

// Throws DomainError unless every entry is in [0, 1] and each row sums to 1
// within 1e-6.
void check_distribution_rows(const NumericArray& p);

}  // namespace dltta
