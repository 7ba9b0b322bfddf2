#include "dltta/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

#include "dltta/errors.hpp"

namespace dltta {
namespace {

struct KeySpec {
  const char* name;
  bool required;
};

constexpr std::array<KeySpec, 35> kKeys{{
    {"model.input_dim", true},
    {"model.hidden_dims", true},
    {"model.n_classes", true},
    {"model.scope", false},
    {"model.seed", true},
    {"train.optimizer", true},
    {"train.lr", true},
    {"train.epochs", true},
    {"train.batch_size", true},
    {"train.val_fraction", true},
    {"train.seed", true},
    {"source.n_samples", true},
    {"source.cluster_std", true},
    {"source.mean_separation", true},
    {"source.cluster_means", false},
    {"source.seed", true},
    {"stream.batch_size", true},
    {"stream.pattern", true},
    {"stream.n_segments", true},
    {"stream.segment_length", true},
    {"stream.mild_severity", true},
    {"stream.severe_severity", true},
    {"stream.horizon", true},
    {"stream.seed", true},
    {"shift.rotation_mix", true},
    {"shift.offset_scale", true},
    {"shift.noise_scale", true},
    {"adapt.method", true},
    {"adapt.alpha", true},
    {"adapt.retrieval_size", true},
    {"adapt.capacity_steps", true},
    {"adapt.steps_per_batch", true},
    {"adapt.objective", true},
    {"adapt.norm_mode", true},
    {"adapt.similarity", true},
}};

// adapt.ema_momentum is optional with a fixed default; kept out of the
// required set so existing configs stay minimal.
constexpr std::array<KeySpec, 1> kExtraKeys{{{"adapt.ema_momentum", false}}};

bool registered(const std::string& key) {
  for (const auto& k : kKeys)
    if (key == k.name) return true;
  for (const auto& k : kExtraKeys)
    if (key == k.name) return true;
  return false;
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path.string());
}

RunConfig RunConfig::from_string(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!registered(key))
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": unknown key '" +
                        key + "'");
    if (value.empty())
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": empty value for '" +
                        key + "'");
    if (cfg.values_.count(key))
      throw ConfigError("config: " + origin + ":" + std::to_string(lineno) + ": duplicate key '" +
                        key + "'");
    cfg.values_[key] = value;
  }
  for (const auto& k : kKeys)
    if (k.required && !cfg.values_.count(k.name))
      throw ConfigError("config: " + origin + ": missing required key '" + std::string(k.name) +
                        "'");
  return cfg;
}

const std::string& RunConfig::raw(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: missing key '" + key + "'");
  return it->second;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!registered(key)) throw ConfigError("config: unknown key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) != 0; }

int RunConfig::get_int(const std::string& key) const {
  const std::string& v = raw(key);
  int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "': '" + v + "' is not an integer");
  return out;
}

std::uint64_t RunConfig::get_u64(const std::string& key) const {
  const std::string& v = raw(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("config: key '" + key + "': '" + v + "' is not an unsigned integer");
  return out;
}

double RunConfig::get_double(const std::string& key) const {
  const std::string& v = raw(key);
  try {
    std::size_t pos = 0;
    const double out = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "': '" + v + "' is not a number");
  }
}

std::string RunConfig::get_string(const std::string& key) const { return raw(key); }

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

std::vector<int> RunConfig::get_int_list(const std::string& key) const {
  std::vector<int> out;
  for (const auto& part : split(raw(key), ',')) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), v);
    if (ec != std::errc{} || ptr != part.data() + part.size())
      throw ConfigError("config: key '" + key + "': '" + part + "' is not an integer");
    out.push_back(v);
  }
  return out;
}

std::vector<double> RunConfig::get_double_list(const std::string& key) const {
  std::vector<double> out;
  for (const auto& part : split(raw(key), ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(part, &pos));
      if (pos != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("config: key '" + key + "': '" + part + "' is not a number");
    }
  }
  return out;
}

std::vector<ShiftSegment> Scenario::schedule() const {
  return make_schedule(pattern, n_segments, mild_severity, severe_severity, segment_length,
                       source.dim, scales, stream_seed);
}

ShiftStream Scenario::make_stream(std::uint64_t seed_override) const {
  Scenario tmp = *this;
  tmp.stream_seed = seed_override;
  return ShiftStream(tmp.source, tmp.schedule(), tmp.stream_batch_size, seed_override + 1);
}

Scenario build_scenario(const RunConfig& cfg) {
  Scenario sc;
  sc.model.input_dim = cfg.get_int("model.input_dim");
  sc.model.hidden_dims = cfg.get_int_list("model.hidden_dims");
  sc.model.n_classes = cfg.get_int("model.n_classes");
  sc.model.scope =
      cfg.has("model.scope") ? adapt_scope_from_string(cfg.get_string("model.scope"))
                             : AdaptScope::bn_affine;
  sc.model.seed = cfg.get_u64("model.seed");

  sc.train.optimizer = cfg.get_string("train.optimizer");
  sc.train.lr = cfg.get_double("train.lr");
  sc.train.epochs = cfg.get_int("train.epochs");
  sc.train.batch_size = cfg.get_int("train.batch_size");
  sc.train.val_fraction = cfg.get_double("train.val_fraction");
  sc.train.seed = cfg.get_u64("train.seed");

  sc.source.n_classes = sc.model.n_classes;
  sc.source.dim = sc.model.input_dim;
  sc.source.n_samples = cfg.get_int("source.n_samples");
  sc.source.cluster_std = cfg.get_double("source.cluster_std");
  sc.source.mean_separation = cfg.get_double("source.mean_separation");
  sc.source.seed = cfg.get_u64("source.seed");
  if (cfg.has("source.cluster_means")) {
    const auto rows = split(cfg.raw("source.cluster_means"), ';');
    NumericArray means(rows.size(), sc.source.dim);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto cells = split(rows[r], ',');
      if (cells.size() != static_cast<std::size_t>(sc.source.dim))
        throw ConfigError("config: key 'source.cluster_means': row " + std::to_string(r) +
                          " has " + std::to_string(cells.size()) + " entries, want " +
                          std::to_string(sc.source.dim));
      for (std::size_t c = 0; c < cells.size(); ++c) {
        try {
          std::size_t pos = 0;
          means.at(r, c) = std::stod(cells[c], &pos);
          if (pos != cells[c].size()) throw std::invalid_argument(cells[c]);
        } catch (const std::exception&) {
          throw ConfigError("config: key 'source.cluster_means': '" + cells[c] +
                            "' is not a number");
        }
      }
    }
    sc.source.cluster_means = std::move(means);
  }

  sc.pattern = schedule_pattern_from_string(cfg.get_string("stream.pattern"));
  sc.n_segments = cfg.get_int("stream.n_segments");
  sc.segment_length = cfg.get_int("stream.segment_length");
  sc.mild_severity = cfg.get_double("stream.mild_severity");
  sc.severe_severity = cfg.get_double("stream.severe_severity");
  sc.stream_batch_size = cfg.get_int("stream.batch_size");
  sc.stream_seed = cfg.get_u64("stream.seed");
  sc.horizon = cfg.get_int("stream.horizon");

  sc.scales.rotation_mix = cfg.get_double("shift.rotation_mix");
  sc.scales.offset_scale = cfg.get_double("shift.offset_scale");
  sc.scales.noise_scale = cfg.get_double("shift.noise_scale");

  sc.adapt.method = method_from_string(cfg.get_string("adapt.method"));
  sc.adapt.alpha = cfg.get_double("adapt.alpha");
  sc.adapt.batch_size = sc.stream_batch_size;
  sc.adapt.retrieval_size = cfg.get_int("adapt.retrieval_size");
  sc.adapt.capacity_steps = cfg.get_int("adapt.capacity_steps");
  sc.adapt.steps_per_batch = cfg.get_int("adapt.steps_per_batch");
  sc.adapt.objective = objective_from_string(cfg.get_string("adapt.objective"));
  sc.adapt.norm_policy.mode = norm_mode_from_string(cfg.get_string("adapt.norm_mode"));
  sc.adapt.norm_policy.ema_momentum =
      cfg.has("adapt.ema_momentum") ? cfg.get_double("adapt.ema_momentum") : 0.1;
  sc.adapt.similarity = similarity_from_string(cfg.get_string("adapt.similarity"));

  validate_adapt_config(sc.adapt);
  if (sc.horizon < 0) throw ConfigError("config: stream.horizon must be >= 0");
  return sc;
}

}  // namespace dltta
