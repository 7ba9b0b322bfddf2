#include "dltta/array.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace dltta {

NumericArray NumericArray::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  NumericArray out;
  out.rows = rows.size();
  out.cols = rows.size() ? rows.begin()->size() : 0;
  out.data.reserve(out.rows * out.cols);
  for (const auto& r : rows) {
    if (r.size() != out.cols) throw DimensionError("from_rows: ragged row lengths");
    out.data.insert(out.data.end(), r.begin(), r.end());
  }
  return out;
}

bool NumericArray::finite() const {
  return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

NumericArray matmul(const NumericArray& a, const NumericArray& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul: inner extents " + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows));
  const auto& k = kernels::active();
  NumericArray c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* out = c.row(i);
    const double* ar = a.row(i);
    for (std::size_t j = 0; j < a.cols; ++j) k.axpy(out, ar[j], b.row(j), b.cols);
  }
  if (!c.finite()) throw DomainError("matmul: non-finite product");
  return c;
}

NumericArray softmax(const NumericArray& logits) {
  if (logits.cols == 0) throw DimensionError("softmax: empty rows");
  const auto& k = kernels::active();
  NumericArray out(logits.rows, logits.cols);
  for (std::size_t r = 0; r < logits.rows; ++r) {
    const double* z = logits.row(r);
    double* p = out.row(r);
    const double m = k.max(z, logits.cols);
    if (!std::isfinite(m)) throw DomainError("softmax: non-finite logits");
    for (std::size_t c = 0; c < logits.cols; ++c) p[c] = std::exp(z[c] - m);
    const double total = k.sum(p, logits.cols);
    k.scale(p, 1.0 / total, logits.cols);
  }
  return out;
}

namespace {

// Shared clamp + renormalize step of kl_div.
void clamp_renorm(std::span<const double> in, std::vector<double>& out) {
  out.resize(in.size());
  double total = 0.0;
  for (std::size_t i = 0; i < in.size(); ++i) {
    out[i] = std::clamp(in[i], kProbClampEps, 1.0);
    total += out[i];
  }
  for (double& v : out) v /= total;
}

void check_distribution(std::span<const double> p, const char* what) {
  double total = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError(std::string(what) + ": entry outside [0, 1]");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6)
    throw DomainError(std::string(what) + ": row sums to " + std::to_string(total));
}

}  // namespace

double kl_div(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionError("kl_div: length mismatch");
  if (p.empty()) throw DimensionError("kl_div: empty distributions");
  check_distribution(p, "kl_div");
  check_distribution(q, "kl_div");
  std::vector<double> pc, qc;
  clamp_renorm(p, pc);
  clamp_renorm(q, qc);
  double acc = 0.0;
  for (std::size_t i = 0; i < pc.size(); ++i)
    if (pc[i] != qc[i]) acc += pc[i] * std::log(pc[i] / qc[i]);
  return acc;
}

double l2_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("l2_distance: length mismatch");
  return std::sqrt(kernels::active().sq_l2(a.data(), b.data(), a.size()));
}

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  const auto& k = kernels::active();
  constexpr double eps = 1e-12;
  const double na = std::sqrt(k.dot(a.data(), a.data(), a.size()));
  const double nb = std::sqrt(k.dot(b.data(), b.data(), b.size()));
  return k.dot(a.data(), b.data(), a.size()) / (std::max(na, eps) * std::max(nb, eps));
}

void check_distribution_rows(const NumericArray& p) {
  for (std::size_t r = 0; r < p.rows; ++r) check_distribution(p.row_span(r), "distribution");
}

}  // namespace dltta
