#include "dltta/objective.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dltta/errors.hpp"

namespace dltta {

ObjectiveKind objective_from_string(std::string_view name) {
  if (name == "entropy") return ObjectiveKind::entropy;
  throw ConfigError("unknown objective '" + std::string(name) + "'");
}

const char* objective_name(ObjectiveKind kind) {
  switch (kind) {
    case ObjectiveKind::entropy:
      return "entropy";
  }
  return "?";
}

namespace {

double row_entropy(const double* p, std::size_t n) {
  double h = 0.0;
  for (std::size_t i = 0; i < n; ++i) h -= p[i] * std::log(std::clamp(p[i], kProbClampEps, 1.0));
  return h;
}

}  // namespace

double entropy_loss(const NumericArray& probs) {
  if (probs.rows == 0 || probs.cols == 0) throw DimensionError("entropy_loss: empty batch");
  check_distribution_rows(probs);
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows; ++r) total += row_entropy(probs.row(r), probs.cols);
  return total / static_cast<double>(probs.rows);
}

NumericArray entropy_grad_logits(const NumericArray& probs) {
  if (probs.rows == 0 || probs.cols == 0) throw DimensionError("entropy_grad_logits: empty batch");
  check_distribution_rows(probs);
  NumericArray grad(probs.rows, probs.cols);
  const double inv_b = 1.0 / static_cast<double>(probs.rows);
  for (std::size_t r = 0; r < probs.rows; ++r) {
    const double* p = probs.row(r);
    double* g = grad.row(r);
    const double h = row_entropy(p, probs.cols);
    for (std::size_t c = 0; c < probs.cols; ++c)
      g[c] = -p[c] * (std::log(std::clamp(p[c], kProbClampEps, 1.0)) + h) * inv_b;
  }
  return grad;
}

}  // namespace dltta
