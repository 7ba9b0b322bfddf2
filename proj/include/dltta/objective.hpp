#pragma once

#include <string_view>

#include "dltta/array.hpp"

namespace dltta {

enum class ObjectiveKind { entropy };

ObjectiveKind objective_from_string(std::string_view name);
const char* objective_name(ObjectiveKind kind);

// Mean Shannon entropy of the prediction rows, in nats. Probabilities are
// clamped to [kProbClampEps, 1] inside the log only, so one-hot rows score 0
// up to clamp slack and the value stays within [0, ln C].
double entropy_loss(const NumericArray& probs);

// d(entropy_loss)/d(logits) for probs = softmax(logits):
// grad[r][k] = -p[r][k] * (ln p[r][k] + H_r) / B
NumericArray entropy_grad_logits(const NumericArray& probs);

}  // namespace dltta
