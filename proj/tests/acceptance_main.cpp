// Acceptance gate: one line per criterion, nonzero exit when any fails.
// argv[1] = path to the dltta CLI binary, argv[2] = path to the default config.
#include <algorithm>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dltta/config.hpp"
#include "dltta/drivers.hpp"
#include "dltta/engine.hpp"
#include "dltta/errors.hpp"
#include "dltta/memory_bank.hpp"
#include "dltta/metrics.hpp"
#include "dltta/model.hpp"
#include "dltta/objective.hpp"

using namespace dltta;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Gate {
  int failures = 0;

  void run(const char* id, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("unexpected exception: ") + e.what()};
    }
    std::printf("%s %s — %s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
};

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof(buf), f, ap);
  va_end(ap);
  return buf;
}

std::vector<double> random_simplex(std::mt19937_64& rng, std::size_t dim) {
  std::exponential_distribution<double> exp1(1.0);
  std::vector<double> v(dim);
  double s = 0.0;
  for (double& x : v) s += (x = exp1(rng));
  for (double& x : v) x /= s;
  return v;
}

// --- AC-1: analytic entropy gradients vs central finite differences --------

std::vector<std::uint8_t> relu_pattern(const Model& m, const ForwardCache& cache) {
  std::vector<std::uint8_t> pattern;
  for (std::size_t i = 0; i < m.feature_layers.size(); ++i)
    if (std::holds_alternative<ReluLayer>(m.feature_layers[i]))
      for (double x : cache.feature[i].output.data) pattern.push_back(x > 0.0);
  return pattern;
}

Outcome ac1_gradients(const Scenario& sc) {
  constexpr double kStep = 1e-4;
  constexpr double kRelTol = 1e-4;
  constexpr int kPairs = 20;
  const NormPolicy policy = sc.adapt.norm_policy;

  double max_rel = 0.0;
  std::size_t checked = 0, skipped = 0;
  for (int pair = 0; pair < kPairs; ++pair) {
    ModelSpec spec = sc.model;
    spec.seed = 7000 + static_cast<std::uint64_t>(pair);
    spec.scope = pair % 2 ? AdaptScope::extractor : AdaptScope::bn_affine;
    Model m = make_model(spec);

    std::mt19937_64 rng(9000 + static_cast<std::uint64_t>(pair));
    std::normal_distribution<double> normal(0.0, 1.0);
    NumericArray batch(16, static_cast<std::size_t>(spec.input_dim));
    for (double& x : batch.data) x = normal(rng);

    const ForwardResult base = forward(m, batch, policy);
    const Gradients analytic = backward(m, base.cache, entropy_grad_logits(base.probs));

    std::vector<double*> masked;
    std::size_t k = 0;
    visit_params(m, [&](double& v) {
      if (m.adapt_mask[k]) masked.push_back(&v);
      ++k;
    });

    for (std::size_t j = 0; j < masked.size(); ++j) {
      double* p = masked[j];
      const double orig = *p;
      *p = orig + kStep;
      const ForwardResult plus = forward(m, batch, policy);
      *p = orig - kStep;
      const ForwardResult minus = forward(m, batch, policy);
      *p = orig;
      // a ReLU kink inside the stencil invalidates the central difference
      if (relu_pattern(m, plus.cache) != relu_pattern(m, minus.cache)) {
        ++skipped;
        continue;
      }
      const double fd = (entropy_loss(plus.probs) - entropy_loss(minus.probs)) / (2.0 * kStep);
      const double a = analytic.values[j];
      const double rel =
          std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6});
      max_rel = std::max(max_rel, rel);
      ++checked;
    }
  }

  const bool pass = max_rel <= kRelTol && checked >= 15000 && skipped * 50 <= checked;
  return {pass, fmt("entropy gradcheck: max rel err %.3g over %zu coords, %zu kink-skipped "
                    "(h=%g, tol %g, 20 pairs)",
                    max_rel, checked, skipped, kStep, kRelTol)};
}

// --- AC-2: symmetric KL vs an independent evaluation ------------------------

long double direct_kl(const std::vector<double>& p, const std::vector<double>& q) {
  auto clamp_renorm = [](const std::vector<double>& v) {
    std::vector<double> c(v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += (c[i] = std::clamp(v[i], 1e-7, 1.0));
    for (double& x : c) x /= s;
    return c;
  };
  const std::vector<double> pc = clamp_renorm(p), qc = clamp_renorm(q);
  long double acc = 0.0L;
  for (std::size_t i = 0; i < pc.size(); ++i)
    acc += static_cast<long double>(pc[i]) * std::log(static_cast<long double>(pc[i]) / qc[i]);
  return acc;
}

Outcome ac2_discrepancy() {
  constexpr double kAbsTol = 1e-9;
  constexpr double kSymTol = 1e-12;
  constexpr int kPairs = 1000;

  std::mt19937_64 rng(1234);
  double max_diff = 0.0, max_asym = 0.0;
  for (int i = 0; i < kPairs; ++i) {
    const std::size_t dim = 2 + static_cast<std::size_t>(i % 9);
    std::vector<double> p = random_simplex(rng, dim);
    std::vector<double> q = random_simplex(rng, dim);
    if (i % 97 == 0) q = p;  // identical pair must score ~0
    const double got = sample_discrepancy(p, q);
    const double want = static_cast<double>(0.5L * (direct_kl(p, q) + direct_kl(q, p)));
    max_diff = std::max(max_diff, std::abs(got - want));
    max_asym = std::max(max_asym, std::abs(got - sample_discrepancy(q, p)));
  }
  // hand-checked pair: sym-KL([.5,.5],[.9,.1]) in nats
  const double hand = sample_discrepancy(std::vector<double>{0.5, 0.5},
                                         std::vector<double>{0.9, 0.1});
  const bool hand_ok = std::abs(hand - 0.4394449154672439) <= 1e-12;

  const bool pass = max_diff <= kAbsTol && max_asym <= kSymTol && hand_ok;
  return {pass, fmt("sym-KL vs direct evaluation: max |diff| %.3g (tol %g), "
                    "max asymmetry %.3g (tol %g), %d pairs",
                    max_diff, kAbsTol, max_asym, kSymTol, kPairs)};
}

// --- AC-3: bank FIFO + retrieval vs brute force -----------------------------

struct MirrorEntry {
  std::vector<double> key, value;
  std::uint64_t index;
};

Outcome ac3_bank() {
  constexpr int kOps = 10000;
  constexpr std::size_t kCapacity = 48, kKeyDim = 8, kValueDim = 4;

  std::mt19937_64 rng(4321);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  MemoryBank bank(kCapacity);
  std::deque<MirrorEntry> mirror;
  std::uint64_t next_index = 0;
  int pushes = 0, retrievals = 0, mismatches = 0;

  for (int op = 0; op < kOps; ++op) {
    if (mirror.empty() || unit(rng) < 0.6) {
      std::vector<double> key(kKeyDim);
      for (double& x : key) x = normal(rng);
      std::vector<double> value = random_simplex(rng, kValueDim);
      bank.push(key, value);
      mirror.push_back({std::move(key), std::move(value), next_index++});
      if (mirror.size() > kCapacity) mirror.pop_front();
      ++pushes;
    } else {
      std::vector<double> query(kKeyDim);
      for (double& x : query) x = normal(rng);
      const std::size_t d = 1 + static_cast<std::size_t>(rng() % 20);
      const Similarity sim = op % 2 ? Similarity::cosine : Similarity::l2;

      // independent brute-force scan, ties to the most recent push
      std::vector<std::pair<double, std::uint64_t>> scored;
      for (const MirrorEntry& e : mirror) {
        double s = 0.0;
        if (sim == Similarity::l2) {
          for (std::size_t i = 0; i < kKeyDim; ++i)
            s += (query[i] - e.key[i]) * (query[i] - e.key[i]);
        } else {
          double dot = 0.0, nq = 0.0, nk = 0.0;
          for (std::size_t i = 0; i < kKeyDim; ++i) {
            dot += query[i] * e.key[i];
            nq += query[i] * query[i];
            nk += e.key[i] * e.key[i];
          }
          s = -dot / (std::sqrt(nq) * std::sqrt(nk));
        }
        scored.emplace_back(s, e.index);
      }
      std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return a.second > b.second;
      });

      const SupportSet got = bank.retrieve(query, d, sim);
      const std::size_t want_n = std::min(d, mirror.size());
      if (got.size() != want_n) ++mismatches;
      for (std::size_t i = 0; i < std::min(want_n, got.size()); ++i)
        if (got[i]->insert_index != scored[i].second) ++mismatches;
      ++retrievals;
    }

    // FIFO invariants: size cap and exact content of the retained window
    if (bank.size() != mirror.size()) ++mismatches;
    if (op % 997 == 0 || op + 1 == kOps) {
      std::size_t i = 0;
      for (const BankEntry& e : bank.entries()) {
        if (e.insert_index != mirror[i].index || e.key != mirror[i].key ||
            e.value != mirror[i].value)
          ++mismatches;
        ++i;
      }
    }
  }

  const bool pass = mismatches == 0;
  return {pass, fmt("bank vs brute force: %d pushes + %d retrievals, %d mismatches",
                    pushes, retrievals, mismatches)};
}

// --- AC-4: warm-up and learning-rate law ------------------------------------

Outcome ac4_lr_law(const Scenario& sc, const Model& source) {
  constexpr double kLawTol = 1e-12;
  const double alpha = sc.adapt.alpha;
  const std::size_t gate = std::min<std::size_t>(
      static_cast<std::size_t>(sc.adapt.retrieval_size),
      static_cast<std::size_t>(sc.adapt.capacity_steps) *
          static_cast<std::size_t>(sc.adapt.batch_size));

  double max_law_err = 0.0;
  std::size_t warmups = 0, post = 0, violations = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RunOverrides ov;
    ov.stream_seed = sc.stream_seed + seed;
    const RunOutcome out = execute_run(sc, source, ov);
    if (out.result.any_aborted) ++violations;
    for (const StepTelemetry& t : out.result.telemetry) {
      if (t.bank_size < gate) {
        ++warmups;
        if (t.discrepancy != -1.0 || t.applied_lr != alpha) ++violations;
      } else {
        ++post;
        const double err = std::abs(t.applied_lr - alpha * t.discrepancy);
        max_law_err = std::max(max_law_err, err);
        if (!(err <= kLawTol) || t.discrepancy < 0.0) ++violations;
      }
    }
  }

  const bool pass = violations == 0 && warmups >= 5 && post >= 5000;
  return {pass, fmt("5 runs: %zu warm-up steps at lr == alpha exactly, "
                    "%zu steps with max |lr - alpha*d| = %.3g (tol %g), %zu violations",
                    warmups, post, max_law_err, kLawTol, violations)};
}

// --- AC-5 / AC-6: learning-rate sensitivity and smoothness ------------------

std::vector<std::uint64_t> five_seeds(const Scenario& sc) {
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t i = 0; i < 5; ++i) seeds.push_back(sc.stream_seed + i);
  return seeds;
}

Outcome ac5_sensitivity(const Scenario& sc, const Model& source, std::vector<SweepCell>& cells) {
  const double alpha = sc.adapt.alpha;
  const std::vector<double> grid = {alpha / 4, alpha / 2, alpha, 2 * alpha, 4 * alpha};
  cells = sweep_lr(sc, source, {Method::fixed, Method::dltta}, grid, five_seeds(sc));

  auto rate_mean = [&](const char* method, double a) {
    std::vector<double> finals;
    for (const SweepCell& c : cells)
      if (c.method == method && c.alpha == a) finals.push_back(c.metrics.final_accuracy);
    return mean_of(finals);
  };

  int wins = 0;
  std::vector<double> fixed_means, dltta_means;
  for (double a : grid) {
    fixed_means.push_back(rate_mean("fixed", a));
    dltta_means.push_back(rate_mean("dltta", a));
    if (dltta_means.back() >= fixed_means.back()) ++wins;
  }
  const double fixed_std = population_std(fixed_means);
  const double dltta_std = population_std(dltta_means);

  const bool pass = wins >= 4 && dltta_std < fixed_std;
  return {pass, fmt("dltta mean final acc >= fixed at %d/5 rates; std across the rate grid "
                    "%.4f (dltta) vs %.4f (fixed), 5 seeds",
                    wins, dltta_std, fixed_std)};
}

Outcome ac6_smoothness(const Scenario& sc, const std::vector<SweepCell>& cells) {
  const double alpha = sc.adapt.alpha;
  std::vector<double> fixed_s, dltta_s;
  for (const SweepCell& c : cells) {
    if (c.alpha != alpha) continue;
    (c.method == "dltta" ? dltta_s : fixed_s).push_back(c.metrics.loss_smoothness);
  }
  const double fixed_mean = mean_of(fixed_s);
  const double dltta_mean = mean_of(dltta_s);

  const bool pass = dltta_mean <= fixed_mean;
  return {pass, fmt("mean loss smoothness over 5 seeds at alpha=%g: "
                    "%.4f (dltta) vs %.4f (fixed); lower is smoother",
                    alpha, dltta_mean, fixed_mean)};
}

// --- AC-7: order insensitivity ----------------------------------------------

Outcome ac7_order(const Scenario& sc, const Model& source) {
  constexpr double kStdTol = 0.01;  // one percentage point
  std::vector<double> finals;
  for (int i = 0; i < 5; ++i) {
    RunOverrides ov;
    ov.stream_seed = sc.stream_seed;
    ov.order_seed = sc.stream_seed + 1000003ull * static_cast<std::uint64_t>(i + 1);
    finals.push_back(execute_run(sc, source, ov).metrics.final_accuracy);
  }
  const double sd = population_std(finals);
  const bool pass = sd <= kStdTol;
  return {pass, fmt("dltta final acc std over 5 shuffled orders = %.4f (tol %.2f), "
                    "min %.4f max %.4f",
                    sd, kStdTol, *std::min_element(finals.begin(), finals.end()),
                    *std::max_element(finals.begin(), finals.end()))};
}

// --- AC-8: shift severity and adaptation sanity ------------------------------

Outcome ac8_shift_sanity(const Scenario& sc, const Model& source) {
  constexpr double kMinDrop = 0.10;
  const auto cells = sweep_lr(sc, source, {Method::none, Method::ptbn, Method::fixed, Method::dltta},
                              {sc.adapt.alpha}, five_seeds(sc));

  auto method_mean = [&](const char* method, auto&& proj) {
    std::vector<double> vals;
    for (const SweepCell& c : cells)
      if (c.method == method) vals.push_back(proj(c.metrics));
    return mean_of(vals);
  };
  auto streaming = [](const Metrics& m) { return m.streaming_accuracy; };

  const double drop = method_mean("none", [](const Metrics& m) {
    return m.per_segment_accuracy.at("0") - m.per_segment_accuracy.at("1");
  });
  const double none_acc = method_mean("none", streaming);
  const double ptbn_acc = method_mean("ptbn", streaming);
  const double fixed_acc = method_mean("fixed", streaming);
  const double dltta_acc = method_mean("dltta", streaming);

  const bool pass = drop >= kMinDrop && ptbn_acc > none_acc && fixed_acc > none_acc &&
                    dltta_acc > none_acc;
  return {pass, fmt("frozen model drops %.1f pts on severe segments (need >= %.0f); "
                    "streaming acc none %.4f | ptbn %.4f | fixed %.4f | dltta %.4f, 5 seeds",
                    100.0 * drop, 100.0 * kMinDrop, none_acc, ptbn_acc, fixed_acc, dltta_acc)};
}

// --- AC-9: one-step sufficiency ----------------------------------------------

Outcome ac9_steps(const Scenario& sc, const Model& source) {
  constexpr double kSpreadTol = 0.015;
  const std::vector<int> steps = {1, 4, 8};

  std::vector<double> finals, walls;
  for (int spb : steps) {
    RunOverrides ov;
    ov.steps_per_batch = spb;
    double best_wall = std::numeric_limits<double>::infinity();
    double final_acc = 0.0;
    for (int rep = 0; rep < 2; ++rep) {  // min over reps absorbs scheduler noise
      const RunOutcome out = execute_run(sc, source, ov);
      best_wall = std::min(best_wall, out.wall_seconds);
      final_acc = out.metrics.final_accuracy;
    }
    finals.push_back(final_acc);
    walls.push_back(best_wall);
  }

  const double spread = *std::max_element(finals.begin(), finals.end()) -
                        *std::min_element(finals.begin(), finals.end());
  const double r4 = walls[1] / walls[0];
  const double r8 = walls[2] / walls[0];
  // linear cost in steps plus a fixed per-batch overhead
  const bool runtime_ok = walls[2] > walls[1] && walls[1] > walls[0] && r4 >= 1.5 &&
                          r4 <= 6.0 && r8 >= 2.5 && r8 <= 12.0;

  const bool pass = spread <= kSpreadTol && runtime_ok;
  return {pass, fmt("dltta final acc at steps {1,4,8}: %.4f / %.4f / %.4f "
                    "(spread %.2f pts, tol %.1f); runtime x%.1f / x%.1f vs 1 step",
                    finals[0], finals[1], finals[2], 100.0 * spread, 100.0 * kSpreadTol,
                    r4, r8)};
}

// --- AC-10: CLI determinism ---------------------------------------------------

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("acceptance: cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Outcome ac10_determinism(const std::string& cli, const std::string& cfg_path) {
  const auto root = std::filesystem::temp_directory_path() / "dltta_acceptance";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);

  auto shell = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null";
    return std::system(cmd.c_str()) == 0;
  };
  auto dir = [&](const char* name) { return (root / name).string(); };

  bool ran = shell("train --config \"" + cfg_path + "\" --out \"" + dir("t1") + "\"") &&
             shell("train --config \"" + cfg_path + "\" --out \"" + dir("t2") + "\"") &&
             shell("adapt --config \"" + cfg_path + "\" --model \"" + dir("t1") +
                   "/model.bin\" --out \"" + dir("a1") + "\"") &&
             shell("adapt --config \"" + cfg_path + "\" --model \"" + dir("t2") +
                   "/model.bin\" --out \"" + dir("a2") + "\"");
  if (!ran) return {false, "CLI invocation failed"};

  const std::vector<std::pair<std::string, std::string>> files = {
      {"t1/model.bin", "t2/model.bin"},         {"t1/train_log.csv", "t2/train_log.csv"},
      {"t1/manifest.json", "t2/manifest.json"}, {"a1/telemetry.csv", "a2/telemetry.csv"},
      {"a1/metrics.json", "a2/metrics.json"},   {"a1/manifest.json", "a2/manifest.json"}};
  std::vector<std::string> unequal;
  for (const auto& [a, b] : files)
    if (slurp(root / a) != slurp(root / b)) unequal.push_back(a);

  const bool pass = unequal.empty();
  std::string detail = "repeated train + adapt: ";
  if (pass) {
    detail += fmt("all %zu artifacts byte-identical across reruns", files.size());
  } else {
    detail += "differs:";
    for (const auto& f : unequal) detail += " " + f;
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <dltta-cli> <config>\n", argv[0]);
    return 2;
  }
  const std::string cli = argv[1];
  const std::string cfg_path = argv[2];

  Gate gate;
  try {
    const RunConfig cfg = RunConfig::from_file(cfg_path);
    const Scenario sc = build_scenario(cfg);

    gate.run("AC-1", [&] { return ac1_gradients(sc); });
    gate.run("AC-2", [&] { return ac2_discrepancy(); });
    gate.run("AC-3", [&] { return ac3_bank(); });

    const Model source = train_scenario_model(sc, nullptr);
    gate.run("AC-4", [&] { return ac4_lr_law(sc, source); });

    std::vector<SweepCell> cells;
    gate.run("AC-5", [&] { return ac5_sensitivity(sc, source, cells); });
    gate.run("AC-6", [&] { return ac6_smoothness(sc, cells); });
    gate.run("AC-7", [&] { return ac7_order(sc, source); });
    gate.run("AC-8", [&] { return ac8_shift_sanity(sc, source); });
    gate.run("AC-9", [&] { return ac9_steps(sc, source); });
    gate.run("AC-10", [&] { return ac10_determinism(cli, cfg_path); });
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance setup failed: %s\n", e.what());
    return 2;
  }

  std::printf("acceptance: %d/10 criteria passed\n", 10 - gate.failures);
  return gate.failures == 0 ? 0 : 1;
}
