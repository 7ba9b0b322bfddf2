#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dltta/array.hpp"

namespace dltta {

inline constexpr std::uint32_t kModelFormatVersion = 1;

// Small enough that the test_batch output-variance contract (gamma^2 within
// 1e-6) holds at double precision on desk-scale activations.
inline constexpr double kBnEps = 1e-12;

struct DenseLayer {
  NumericArray weight;  // out x in
  std::vector<double> bias;
};

struct BatchNormLayer {
  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double momentum = 0.1;  // running-stat update rate during source training
};

struct ReluLayer {};

using Layer = std::variant<DenseLayer, BatchNormLayer, ReluLayer>;

// How batchnorm layers derive statistics outside source training:
//   train_running - frozen running stats, no state mutation
//   test_batch    - current batch stats; falls back to test_ema at B == 1
//   test_ema      - EMA update of running stats, then normalize with them
enum class NormMode { train_running, test_batch, test_ema };

struct NormPolicy {
  NormMode mode = NormMode::test_batch;
  double ema_momentum = 0.1;
};

NormMode norm_mode_from_string(std::string_view name);
const char* norm_mode_name(NormMode mode);

// Which parameters adapt_mask marks as free at test time.
enum class AdaptScope { bn_affine, extractor };

AdaptScope adapt_scope_from_string(std::string_view name);
const char* adapt_scope_name(AdaptScope scope);

struct Model {
  std::vector<Layer> feature_layers;  // extractor
  std::vector<Layer> head_layers;     // classifier head; forward appends softmax
  std::vector<std::uint8_t> adapt_mask;  // one flag per parameter, canonical order
  std::uint32_t version_tag = kModelFormatVersion;
  std::uint64_t revision = 0;  // bumped on every parameter mutation

  std::size_t param_count() const;
  std::size_t adaptable_count() const;
  std::size_t input_dim() const;
  std::size_t feature_dim() const;
  std::size_t n_classes() const;
  std::vector<double> flatten_params() const;
};

// Canonical parameter order: feature layers then head layers; per dense layer
// weights row-major then bias; per batchnorm gamma then beta. Running stats
// are not parameters.
template <class LayerT, class F>
void visit_layer_params(LayerT& layer, F&& f) {
  if (auto* d = std::get_if<DenseLayer>(&layer)) {
    for (auto& v : d->weight.data) f(v);
    for (auto& v : d->bias) f(v);
  } else if (auto* bn = std::get_if<BatchNormLayer>(&layer)) {
    for (auto& v : bn->gamma) f(v);
    for (auto& v : bn->beta) f(v);
  }
}

template <class ModelT, class F>
void visit_params(ModelT& m, F&& f) {
  for (auto& l : m.feature_layers) visit_layer_params(l, f);
  for (auto& l : m.head_layers) visit_layer_params(l, f);
}

struct ModelSpec {
  int input_dim = 8;
  std::vector<int> hidden_dims{32, 32};
  int n_classes = 4;
  AdaptScope scope = AdaptScope::bn_affine;
  std::uint64_t seed = 0;
};

// Dense(+BN+ReLU) blocks per hidden dim, then a dense head. Weights are
// Glorot-uniform from the seed, biases zero, BN stats at identity.
Model make_model(const ModelSpec& spec);

struct LayerCache {
  NumericArray input;       // dense, batchnorm
  NumericArray normalized;  // batchnorm
  NumericArray output;      // relu
  std::vector<double> inv_std;
  std::vector<double> stat_mean;
  std::vector<double> anchor;
  double stat_coeff = 0.0;
  double var_coeff = 0.0;
  // Running-stat update staged by batch_train/ema forwards; applied only by
  // commit_running_stats so repeated forwards stay pure.
  std::vector<double> new_running_mean;
  std::vector<double> new_running_var;
};

struct ForwardCache {
  std::vector<LayerCache> feature;
  std::vector<LayerCache> head;
  NumericArray logits;
  NumericArray probs;
  std::uint64_t revision = 0;
  std::size_t batch_rows = 0;
};

struct ForwardResult {
  NumericArray features;
  NumericArray logits;
  NumericArray probs;
  ForwardCache cache;
};

// Pure with respect to model state: running-stat updates implied by the
// policy are staged in the cache, not applied. Call commit_running_stats to
// apply them (at most once per adaptation step).
ForwardResult forward(Model& m, const NumericArray& batch, const NormPolicy& policy);

// Applies the running-stat updates staged in `cache`. Throws StateError if
// the model's parameters changed since the forward that produced it.
void commit_running_stats(Model& m, const ForwardCache& cache);

// Gradient w.r.t. the masked (adaptable) parameters, canonical order.
struct Gradients {
  std::vector<double> values;
};

// grad_logits is dL/d(logits) for the batch the cache came from. Throws
// StateError when the model mutated since the forward pass.
Gradients backward(const Model& m, const ForwardCache& cache, const NumericArray& grad_logits);

// theta <- theta - eta * grad on adaptable parameters only. eta must be
// finite and > 0; grads must be finite and sized to adaptable_count().
void sgd_step(Model& m, const Gradients& grads, double eta);

struct LabeledDataset {
  NumericArray features;  // N x F
  std::vector<int> labels;
};

struct TrainOptions {
  int epochs = 60;
  double lr = 1e-3;
  int batch_size = 32;
  std::string optimizer = "adam";  // "adam" | "momentum"
  double val_fraction = 0.2;
  std::uint64_t seed = 0;
};

struct TrainLogRow {
  int epoch;
  double loss;
  double train_accuracy;
  double val_accuracy;  // NaN when val_fraction rounds to zero rows
};

// Mini-batch cross-entropy training over all parameters. Batchnorm uses
// batch statistics and updates running stats with the layer momentum.
// Deterministic for a fixed seed.
std::vector<TrainLogRow> train_source(Model& m, const LabeledDataset& data,
                                      const TrainOptions& opts);

void save_model(const Model& m, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

// Lowest index wins ties; rows of p are scanned left to right.
std::vector<int> argmax_rows(const NumericArray& p);

}  // namespace dltta
