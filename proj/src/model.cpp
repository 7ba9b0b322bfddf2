#include "dltta/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <string>

#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace dltta {

NormMode norm_mode_from_string(std::string_view name) {
  if (name == "train_running") return NormMode::train_running;
  if (name == "test_batch") return NormMode::test_batch;
  if (name == "test_ema") return NormMode::test_ema;
  throw ConfigError("unknown norm mode '" + std::string(name) + "'");
}

const char* norm_mode_name(NormMode mode) {
  switch (mode) {
    case NormMode::train_running:
      return "train_running";
    case NormMode::test_batch:
      return "test_batch";
    case NormMode::test_ema:
      return "test_ema";
  }
  return "?";
}

AdaptScope adapt_scope_from_string(std::string_view name) {
  if (name == "bn_affine") return AdaptScope::bn_affine;
  if (name == "extractor") return AdaptScope::extractor;
  throw ConfigError("unknown adapt scope '" + std::string(name) + "'");
}

const char* adapt_scope_name(AdaptScope scope) {
  return scope == AdaptScope::bn_affine ? "bn_affine" : "extractor";
}

namespace {

std::size_t layer_param_count(const Layer& layer) {
  if (const auto* d = std::get_if<DenseLayer>(&layer)) return d->weight.size() + d->bias.size();
  if (const auto* bn = std::get_if<BatchNormLayer>(&layer)) return bn->gamma.size() + bn->beta.size();
  return 0;
}

}  // namespace

std::size_t Model::param_count() const {
  std::size_t n = 0;
  for (const auto& l : feature_layers) n += layer_param_count(l);
  for (const auto& l : head_layers) n += layer_param_count(l);
  return n;
}

std::size_t Model::adaptable_count() const {
  std::size_t n = 0;
  for (auto flag : adapt_mask) n += flag ? 1 : 0;
  return n;
}

std::size_t Model::input_dim() const {
  for (const auto& l : feature_layers)
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->weight.cols;
  for (const auto& l : head_layers)
    if (const auto* d = std::get_if<DenseLayer>(&l)) return d->weight.cols;
  throw StateError("model has no dense layer");
}

std::size_t Model::feature_dim() const {
  std::size_t width = input_dim();
  for (const auto& l : feature_layers)
    if (const auto* d = std::get_if<DenseLayer>(&l)) width = d->weight.rows;
  return width;
}

std::size_t Model::n_classes() const {
  for (auto it = head_layers.rbegin(); it != head_layers.rend(); ++it)
    if (const auto* d = std::get_if<DenseLayer>(&*it)) return d->weight.rows;
  throw StateError("model has no head dense layer");
}

std::vector<double> Model::flatten_params() const {
  std::vector<double> out;
  out.reserve(param_count());
  visit_params(*this, [&](const double& v) { out.push_back(v); });
  return out;
}

Model make_model(const ModelSpec& spec) {
  if (spec.input_dim < 1) throw ConfigError("model: input_dim must be >= 1");
  if (spec.n_classes < 2) throw ConfigError("model: n_classes must be >= 2");
  for (int h : spec.hidden_dims)
    if (h < 1) throw ConfigError("model: hidden dims must be >= 1");

  std::mt19937_64 rng(spec.seed);
  auto glorot_dense = [&](int out, int in) {
    DenseLayer d;
    d.weight = NumericArray(out, in);
    d.bias.assign(out, 0.0);
    const double lim = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-lim, lim);
    for (auto& w : d.weight.data) w = dist(rng);
    return d;
  };

  Model m;
  int width = spec.input_dim;
  for (int h : spec.hidden_dims) {
    m.feature_layers.emplace_back(glorot_dense(h, width));
    BatchNormLayer bn;
    bn.gamma.assign(h, 1.0);
    bn.beta.assign(h, 0.0);
    bn.running_mean.assign(h, 0.0);
    bn.running_var.assign(h, 1.0);
    m.feature_layers.emplace_back(std::move(bn));
    m.feature_layers.emplace_back(ReluLayer{});
    width = h;
  }
  m.head_layers.emplace_back(glorot_dense(spec.n_classes, width));

  m.adapt_mask.assign(m.param_count(), 0);
  std::size_t p = 0;
  auto mark_layers = [&](const std::vector<Layer>& layers, bool in_scope) {
    for (const auto& l : layers) {
      const std::size_t n = layer_param_count(l);
      const bool mark = in_scope && (spec.scope == AdaptScope::extractor ||
                                     std::holds_alternative<BatchNormLayer>(l));
      for (std::size_t i = 0; i < n; ++i) m.adapt_mask[p++] = mark ? 1 : 0;
    }
  };
  mark_layers(m.feature_layers, true);
  mark_layers(m.head_layers, false);
  return m;
}

namespace {

enum class StatMode { frozen, batch, batch_train, ema };

NumericArray apply_dense(const DenseLayer& d, const NumericArray& x, LayerCache& cache) {
  if (x.cols != d.weight.cols)
    throw DimensionError("dense: input width " + std::to_string(x.cols) + " vs " +
                         std::to_string(d.weight.cols));
  const auto& k = kernels::active();
  NumericArray y(x.rows, d.weight.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    double* yr = y.row(r);
    for (std::size_t o = 0; o < d.weight.rows; ++o)
      yr[o] = k.dot(x.row(r), d.weight.row(o), d.weight.cols) + d.bias[o];
  }
  cache.input = x;
  return y;
}

NumericArray apply_batchnorm(BatchNormLayer& bn, const NumericArray& x, LayerCache& cache,
                             StatMode mode, double ema_momentum) {
  const std::size_t b = x.rows, h = x.cols;
  if (bn.gamma.size() != h)
    throw DimensionError("batchnorm: width " + std::to_string(h) + " vs " +
                         std::to_string(bn.gamma.size()));
  const double inv_b = 1.0 / static_cast<double>(b);

  std::vector<double> stat_mean(h), stat_var(h), anchor(h, 0.0);
  double cs = 0.0, cv = 0.0;
  if (mode == StatMode::frozen) {
    stat_mean = bn.running_mean;
    stat_var = bn.running_var;
  } else if (mode == StatMode::batch || mode == StatMode::batch_train) {
    for (std::size_t f = 0; f < h; ++f) {
      double mu = 0.0;
      for (std::size_t r = 0; r < b; ++r) mu += x.at(r, f);
      mu *= inv_b;
      double var = 0.0;
      for (std::size_t r = 0; r < b; ++r) {
        const double d = x.at(r, f) - mu;
        var += d * d;
      }
      var *= inv_b;
      stat_mean[f] = mu;
      stat_var[f] = var;
    }
    anchor = stat_mean;
    cs = inv_b;
    cv = 2.0 * inv_b;
    if (mode == StatMode::batch_train) {
      const double mom = bn.momentum;
      cache.new_running_mean.resize(h);
      cache.new_running_var.resize(h);
      for (std::size_t f = 0; f < h; ++f) {
        cache.new_running_mean[f] = (1.0 - mom) * bn.running_mean[f] + mom * stat_mean[f];
        cache.new_running_var[f] = (1.0 - mom) * bn.running_var[f] + mom * stat_var[f];
      }
    }
  } else {  // ema
    const double mom = ema_momentum;
    anchor = bn.running_mean;  // pre-update mean anchors the variance estimate
    for (std::size_t f = 0; f < h; ++f) {
      double mu = 0.0, var = 0.0;
      for (std::size_t r = 0; r < b; ++r) mu += x.at(r, f);
      mu *= inv_b;
      for (std::size_t r = 0; r < b; ++r) {
        const double d = x.at(r, f) - anchor[f];
        var += d * d;
      }
      var *= inv_b;
      stat_mean[f] = (1.0 - mom) * bn.running_mean[f] + mom * mu;
      stat_var[f] = (1.0 - mom) * bn.running_var[f] + mom * var;
    }
    cache.new_running_mean = stat_mean;
    cache.new_running_var = stat_var;
    cs = mom * inv_b;
    cv = 2.0 * mom * inv_b;
  }

  NumericArray y(b, h);
  NumericArray normalized(b, h);
  std::vector<double> inv_std(h);
  for (std::size_t f = 0; f < h; ++f) inv_std[f] = 1.0 / std::sqrt(stat_var[f] + kBnEps);
  for (std::size_t r = 0; r < b; ++r) {
    for (std::size_t f = 0; f < h; ++f) {
      const double xn = (x.at(r, f) - stat_mean[f]) * inv_std[f];
      normalized.at(r, f) = xn;
      y.at(r, f) = bn.gamma[f] * xn + bn.beta[f];
    }
  }
  cache.input = x;
  cache.normalized = std::move(normalized);
  cache.inv_std = std::move(inv_std);
  cache.stat_mean = std::move(stat_mean);
  cache.anchor = std::move(anchor);
  cache.stat_coeff = cs;
  cache.var_coeff = cv;
  return y;
}

NumericArray apply_relu(const NumericArray& x, LayerCache& cache) {
  NumericArray y(x.rows, x.cols);
  kernels::active().relu(y.data.data(), x.data.data(), x.size());
  cache.output = y;
  return y;
}

ForwardResult forward_impl(Model& m, const NumericArray& batch, StatMode stat_mode,
                           double ema_momentum) {
  if (batch.rows == 0) throw DimensionError("forward: empty batch");
  if (batch.cols != m.input_dim())
    throw DimensionError("forward: input width " + std::to_string(batch.cols) + " vs " +
                         std::to_string(m.input_dim()));
  if (!batch.finite()) throw DomainError("forward: non-finite input");

  ForwardResult out;
  out.cache.revision = m.revision;
  out.cache.batch_rows = batch.rows;

  auto run = [&](std::vector<Layer>& layers, std::vector<LayerCache>& caches, NumericArray x) {
    caches.resize(layers.size());
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (auto* d = std::get_if<DenseLayer>(&layers[i]))
        x = apply_dense(*d, x, caches[i]);
      else if (auto* bn = std::get_if<BatchNormLayer>(&layers[i]))
        x = apply_batchnorm(*bn, x, caches[i], stat_mode, ema_momentum);
      else
        x = apply_relu(x, caches[i]);
    }
    return x;
  };

  out.features = run(m.feature_layers, out.cache.feature, batch);
  out.logits = run(m.head_layers, out.cache.head, out.features);
  if (!out.logits.finite()) throw DomainError("forward: non-finite logits");
  out.probs = softmax(out.logits);
  out.cache.logits = out.logits;
  out.cache.probs = out.probs;
  return out;
}

StatMode resolve_mode(const NormPolicy& policy, std::size_t batch_rows) {
  switch (policy.mode) {
    case NormMode::train_running:
      return StatMode::frozen;
    case NormMode::test_batch:
      return batch_rows == 1 ? StatMode::ema : StatMode::batch;
    case NormMode::test_ema:
      return StatMode::ema;
  }
  return StatMode::frozen;
}

NumericArray dense_backward(const DenseLayer& d, const LayerCache& cache, const NumericArray& g,
                            double* block) {
  const auto& k = kernels::active();
  const std::size_t b = g.rows, out = d.weight.rows, in = d.weight.cols;
  double* dw = block;
  double* db = block + out * in;
  for (std::size_t r = 0; r < b; ++r) {
    const double* gr = g.row(r);
    const double* xr = cache.input.row(r);
    for (std::size_t o = 0; o < out; ++o) {
      k.axpy(dw + o * in, gr[o], xr, in);
      db[o] += gr[o];
    }
  }
  NumericArray dx(b, in);
  for (std::size_t r = 0; r < b; ++r) {
    double* dxr = dx.row(r);
    const double* gr = g.row(r);
    for (std::size_t o = 0; o < out; ++o) k.axpy(dxr, gr[o], d.weight.row(o), in);
  }
  return dx;
}

NumericArray batchnorm_backward(const BatchNormLayer& bn, const LayerCache& cache,
                                const NumericArray& g, double* block) {
  const std::size_t b = g.rows, h = g.cols;
  double* dgamma = block;
  double* dbeta = block + h;
  NumericArray dx(b, h);
  for (std::size_t f = 0; f < h; ++f) {
    const double gam = bn.gamma[f];
    const double inv = cache.inv_std[f];
    const double s = cache.stat_mean[f];
    const double a = cache.anchor[f];
    double sum_g = 0.0, sum_g_xn = 0.0, sum_gh = 0.0, sum_gh_xc = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
      const double gv = g.at(r, f);
      sum_g += gv;
      sum_g_xn += gv * cache.normalized.at(r, f);
      const double gh = gv * gam;
      sum_gh += gh;
      sum_gh_xc += gh * (cache.input.at(r, f) - s) * inv;
    }
    dgamma[f] += sum_g_xn;
    dbeta[f] += sum_g;
    const double d_stat = -inv * sum_gh;
    const double d_var = -0.5 * inv * inv * sum_gh_xc;
    for (std::size_t r = 0; r < b; ++r)
      dx.at(r, f) = g.at(r, f) * gam * inv + d_stat * cache.stat_coeff +
                    d_var * cache.var_coeff * (cache.input.at(r, f) - a);
  }
  return dx;
}

NumericArray relu_backward(const LayerCache& cache, const NumericArray& g) {
  NumericArray dx(g.rows, g.cols);
  kernels::active().relu_bwd(dx.data.data(), cache.output.data.data(), g.data.data(), g.size());
  return dx;
}

// Gradient w.r.t. every parameter, canonical order.
std::vector<double> backward_full(const Model& m, const ForwardCache& cache,
                                  const NumericArray& grad_logits) {
  if (cache.revision != m.revision)
    throw StateError("backward: cache is stale, model mutated since forward");
  if (grad_logits.rows != cache.logits.rows || grad_logits.cols != cache.logits.cols)
    throw DimensionError("backward: grad_logits shape mismatch");

  std::vector<double> full(m.param_count(), 0.0);

  auto run_back = [&](const std::vector<Layer>& layers, const std::vector<LayerCache>& caches,
                      std::size_t base_offset, NumericArray g) {
    std::vector<std::size_t> offsets(layers.size());
    std::size_t off = base_offset;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      offsets[i] = off;
      off += layer_param_count(layers[i]);
    }
    for (std::size_t i = layers.size(); i-- > 0;) {
      if (const auto* d = std::get_if<DenseLayer>(&layers[i]))
        g = dense_backward(*d, caches[i], g, full.data() + offsets[i]);
      else if (const auto* bn = std::get_if<BatchNormLayer>(&layers[i]))
        g = batchnorm_backward(*bn, caches[i], g, full.data() + offsets[i]);
      else
        g = relu_backward(caches[i], g);
    }
    return g;
  };

  std::size_t feature_params = 0;
  for (const auto& l : m.feature_layers) feature_params += layer_param_count(l);

  NumericArray g = run_back(m.head_layers, cache.head, feature_params, grad_logits);
  run_back(m.feature_layers, cache.feature, 0, std::move(g));
  return full;
}

}  // namespace

ForwardResult forward(Model& m, const NumericArray& batch, const NormPolicy& policy) {
  return forward_impl(m, batch, resolve_mode(policy, batch.rows), policy.ema_momentum);
}

void commit_running_stats(Model& m, const ForwardCache& cache) {
  if (cache.revision != m.revision)
    throw StateError("commit_running_stats: stale forward cache");
  auto apply = [](std::vector<Layer>& layers, const std::vector<LayerCache>& caches) {
    if (layers.size() != caches.size())
      throw StateError("commit_running_stats: cache does not match model layout");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      auto* bn = std::get_if<BatchNormLayer>(&layers[i]);
      if (!bn || caches[i].new_running_mean.empty()) continue;
      bn->running_mean = caches[i].new_running_mean;
      bn->running_var = caches[i].new_running_var;
    }
  };
  apply(m.feature_layers, cache.feature);
  apply(m.head_layers, cache.head);
}

Gradients backward(const Model& m, const ForwardCache& cache, const NumericArray& grad_logits) {
  const std::vector<double> full = backward_full(m, cache, grad_logits);
  Gradients out;
  out.values.reserve(m.adaptable_count());
  for (std::size_t p = 0; p < full.size(); ++p)
    if (m.adapt_mask[p]) out.values.push_back(full[p]);
  return out;
}

void sgd_step(Model& m, const Gradients& grads, double eta) {
  if (!std::isfinite(eta) || eta <= 0.0) throw DomainError("sgd_step: eta must be finite and > 0");
  if (grads.values.size() != m.adaptable_count())
    throw DimensionError("sgd_step: gradient length " + std::to_string(grads.values.size()) +
                         " vs " + std::to_string(m.adaptable_count()));
  for (double v : grads.values)
    if (!std::isfinite(v)) throw DomainError("sgd_step: non-finite gradient");

  std::size_t p = 0, k = 0;
  visit_params(m, [&](double& v) {
    if (m.adapt_mask[p]) v -= eta * grads.values[k++];
    ++p;
  });
  ++m.revision;
}

std::vector<int> argmax_rows(const NumericArray& p) {
  std::vector<int> out(p.rows);
  for (std::size_t r = 0; r < p.rows; ++r) {
    const double* row = p.row(r);
    int best = 0;
    for (std::size_t c = 1; c < p.cols; ++c)
      if (row[c] > row[best]) best = static_cast<int>(c);
    out[r] = best;
  }
  return out;
}

namespace {

void fisher_yates(std::vector<std::size_t>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
}

struct Optimizer {
  bool adam = true;
  double lr = 1e-3;
  std::vector<double> m1, m2;  // adam moments / momentum velocity in m1
  std::int64_t t = 0;

  void step(Model& model, const std::vector<double>& grad) {
    ++t;
    std::size_t p = 0;
    if (adam) {
      constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
      visit_params(model, [&](double& v) {
        m1[p] = b1 * m1[p] + (1.0 - b1) * grad[p];
        m2[p] = b2 * m2[p] + (1.0 - b2) * grad[p] * grad[p];
        v -= lr * (m1[p] / c1) / (std::sqrt(m2[p] / c2) + eps);
        ++p;
      });
    } else {
      constexpr double mu = 0.9;
      visit_params(model, [&](double& v) {
        m1[p] = mu * m1[p] + grad[p];
        v -= lr * m1[p];
        ++p;
      });
    }
    ++model.revision;
  }
};

double evaluate_accuracy(Model& m, const NumericArray& features, const std::vector<int>& labels,
                         const std::vector<std::size_t>& idx) {
  if (idx.empty()) return std::nan("");
  NumericArray batch(idx.size(), features.cols);
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(features.row(idx[i]), features.cols, batch.row(i));
  const NormPolicy frozen{NormMode::train_running, 0.1};
  const auto pred = argmax_rows(forward(m, batch, frozen).probs);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < idx.size(); ++i)
    if (pred[i] == labels[idx[i]]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(idx.size());
}

}  // namespace

std::vector<TrainLogRow> train_source(Model& m, const LabeledDataset& data,
                                      const TrainOptions& opts) {
  const std::size_t n = data.features.rows;
  if (n == 0) throw DomainError("train_source: empty dataset");
  if (data.labels.size() != n) throw DimensionError("train_source: label count mismatch");
  if (data.features.cols != m.input_dim()) throw DimensionError("train_source: feature width mismatch");
  const int classes = static_cast<int>(m.n_classes());
  for (int y : data.labels)
    if (y < 0 || y >= classes) throw DomainError("train_source: label out of range");
  if (opts.epochs < 0) throw DomainError("train_source: negative epochs");
  if (opts.batch_size < 1) throw DomainError("train_source: batch_size must be >= 1");
  if (!(opts.lr > 0.0)) throw DomainError("train_source: lr must be > 0");
  if (opts.val_fraction < 0.0 || opts.val_fraction > 0.9)
    throw DomainError("train_source: val_fraction outside [0, 0.9]");
  if (opts.optimizer != "adam" && opts.optimizer != "momentum")
    throw ConfigError("train_source: unknown optimizer '" + opts.optimizer + "'");

  std::mt19937_64 rng(opts.seed);
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  fisher_yates(order, rng);
  const std::size_t n_val = static_cast<std::size_t>(std::lround(opts.val_fraction * n));
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::size_t> train_idx(order.begin() + n_val, order.end());
  if (train_idx.empty()) throw DomainError("train_source: no training rows after split");

  Optimizer opt;
  opt.adam = opts.optimizer == "adam";
  opt.lr = opts.lr;
  opt.m1.assign(m.param_count(), 0.0);
  opt.m2.assign(m.param_count(), 0.0);

  std::vector<TrainLogRow> log;
  for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
    fisher_yates(train_idx, rng);
    double loss_sum = 0.0;
    std::size_t loss_batches = 0, hits = 0, seen = 0;
    for (std::size_t start = 0; start < train_idx.size();
         start += static_cast<std::size_t>(opts.batch_size)) {
      const std::size_t stop =
          std::min(train_idx.size(), start + static_cast<std::size_t>(opts.batch_size));
      const std::size_t rows = stop - start;
      if (rows < 2) continue;  // batch statistics need at least two rows

      NumericArray batch(rows, data.features.cols);
      for (std::size_t i = 0; i < rows; ++i)
        std::copy_n(data.features.row(train_idx[start + i]), data.features.cols, batch.row(i));

      auto fwd = forward_impl(m, batch, StatMode::batch_train, 0.1);
      commit_running_stats(m, fwd.cache);
      NumericArray dlogits(rows, fwd.probs.cols);
      double batch_loss = 0.0;
      const double inv_rows = 1.0 / static_cast<double>(rows);
      for (std::size_t i = 0; i < rows; ++i) {
        const int y = data.labels[train_idx[start + i]];
        batch_loss -= std::log(std::clamp(fwd.probs.at(i, y), kProbClampEps, 1.0));
        for (std::size_t c = 0; c < fwd.probs.cols; ++c)
          dlogits.at(i, c) =
              (fwd.probs.at(i, c) - (static_cast<int>(c) == y ? 1.0 : 0.0)) * inv_rows;
      }
      batch_loss *= inv_rows;
      loss_sum += batch_loss;
      ++loss_batches;

      const auto pred = argmax_rows(fwd.probs);
      for (std::size_t i = 0; i < rows; ++i)
        if (pred[i] == data.labels[train_idx[start + i]]) ++hits;
      seen += rows;

      opt.step(m, backward_full(m, fwd.cache, dlogits));
    }
    TrainLogRow row;
    row.epoch = epoch;
    row.loss = loss_batches ? loss_sum / static_cast<double>(loss_batches) : std::nan("");
    row.train_accuracy = seen ? static_cast<double>(hits) / static_cast<double>(seen) : std::nan("");
    row.val_accuracy = evaluate_accuracy(m, data.features, data.labels, val_idx);
    log.push_back(row);
  }
  return log;
}

namespace {

constexpr char kMagic[8] = {'D', 'L', 'T', 'T', 'A', 'M', 'D', 'L'};
constexpr std::size_t kMaxExtent = 1u << 20;

template <class T>
void put_raw(std::ofstream& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    out.write(reinterpret_cast<const char*>(bytes.data()), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
}

void put_f64(std::ofstream& out, double v) { put_raw(out, std::bit_cast<std::uint64_t>(v)); }

void put_f64s(std::ofstream& out, const std::vector<double>& v) {
  for (double x : v) put_f64(out, x);
}

template <class T>
T get_raw(std::ifstream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  std::array<unsigned char, sizeof(T)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), sizeof(T));
  if (!in) throw FormatError("model file: truncated");
  if constexpr (std::endian::native == std::endian::big)
    std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

double get_f64(std::ifstream& in) { return std::bit_cast<double>(get_raw<std::uint64_t>(in)); }

std::vector<double> get_f64s(std::ifstream& in, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = get_f64(in);
  return out;
}

void write_layers(std::ofstream& out, const std::vector<Layer>& layers) {
  for (const auto& l : layers) {
    if (const auto* d = std::get_if<DenseLayer>(&l)) {
      put_raw<std::uint8_t>(out, 0);
      put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d->weight.rows));
      put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(d->weight.cols));
      put_f64s(out, d->weight.data);
      put_f64s(out, d->bias);
    } else if (const auto* bn = std::get_if<BatchNormLayer>(&l)) {
      put_raw<std::uint8_t>(out, 1);
      put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(bn->gamma.size()));
      put_f64(out, bn->momentum);
      put_f64s(out, bn->gamma);
      put_f64s(out, bn->beta);
      put_f64s(out, bn->running_mean);
      put_f64s(out, bn->running_var);
    } else {
      put_raw<std::uint8_t>(out, 2);
    }
  }
}

std::vector<Layer> read_layers(std::ifstream& in, std::size_t count) {
  std::vector<Layer> layers;
  layers.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto kind = get_raw<std::uint8_t>(in);
    if (kind == 0) {
      const auto rows = get_raw<std::uint32_t>(in);
      const auto cols = get_raw<std::uint32_t>(in);
      if (rows == 0 || cols == 0 || rows > kMaxExtent || cols > kMaxExtent)
        throw FormatError("model file: bad dense extents");
      DenseLayer d;
      d.weight = NumericArray(rows, cols);
      d.weight.data = get_f64s(in, static_cast<std::size_t>(rows) * cols);
      d.bias = get_f64s(in, rows);
      layers.emplace_back(std::move(d));
    } else if (kind == 1) {
      const auto width = get_raw<std::uint32_t>(in);
      if (width == 0 || width > kMaxExtent) throw FormatError("model file: bad batchnorm width");
      BatchNormLayer bn;
      bn.momentum = get_f64(in);
      bn.gamma = get_f64s(in, width);
      bn.beta = get_f64s(in, width);
      bn.running_mean = get_f64s(in, width);
      bn.running_var = get_f64s(in, width);
      layers.emplace_back(std::move(bn));
    } else if (kind == 2) {
      layers.emplace_back(ReluLayer{});
    } else {
      throw FormatError("model file: unknown layer kind " + std::to_string(kind));
    }
  }
  return layers;
}

}  // namespace

void save_model(const Model& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_model: cannot open " + path.string());
  out.write(kMagic, sizeof(kMagic));
  put_raw<std::uint32_t>(out, m.version_tag);
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(m.feature_layers.size()));
  put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(m.head_layers.size()));
  write_layers(out, m.feature_layers);
  write_layers(out, m.head_layers);
  put_raw<std::uint64_t>(out, static_cast<std::uint64_t>(m.adapt_mask.size()));
  std::uint8_t byte = 0;
  for (std::size_t p = 0; p < m.adapt_mask.size(); ++p) {
    if (m.adapt_mask[p]) byte |= static_cast<std::uint8_t>(1u << (p % 8));
    if (p % 8 == 7 || p + 1 == m.adapt_mask.size()) {
      put_raw(out, byte);
      byte = 0;
    }
  }
  if (!out) throw FormatError("save_model: write failed for " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_model: cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw FormatError("load_model: bad magic, not a model file");
  const auto version = get_raw<std::uint32_t>(in);
  if (version > kModelFormatVersion)
    throw FormatError("load_model: format version " + std::to_string(version) +
                      " is newer than supported version " + std::to_string(kModelFormatVersion));
  const auto n_feature = get_raw<std::uint32_t>(in);
  const auto n_head = get_raw<std::uint32_t>(in);
  if (n_feature > 1024 || n_head > 1024) throw FormatError("load_model: bad layer counts");

  Model m;
  m.version_tag = version;
  m.feature_layers = read_layers(in, n_feature);
  m.head_layers = read_layers(in, n_head);

  const auto mask_len = get_raw<std::uint64_t>(in);
  if (mask_len != m.param_count())
    throw FormatError("load_model: adapt mask length does not match parameter count");
  m.adapt_mask.assign(mask_len, 0);
  std::uint8_t byte = 0;
  for (std::size_t p = 0; p < mask_len; ++p) {
    if (p % 8 == 0) byte = get_raw<std::uint8_t>(in);
    m.adapt_mask[p] = (byte >> (p % 8)) & 1u;
  }
  in.peek();
  if (!in.eof()) throw FormatError("load_model: trailing bytes after model data");
  return m;
}

}  // namespace dltta
