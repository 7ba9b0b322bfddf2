#include "dltta/manifest.hpp"

#include <fstream>

#include "json.hpp"

#include "dltta/errors.hpp"
#include "dltta/kernels.hpp"

namespace dltta {

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("fnv1a64: cannot open " + path.string());
  std::uint64_t h = 14695981039346656037ull;
  char buf[4096];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ManifestBuilder::ManifestBuilder(std::string command, const RunConfig& cfg)
    : command_(std::move(command)), config_(cfg.entries()) {}

void ManifestBuilder::add_override(const std::string& key, const std::string& value) {
  overrides_[key] = value;
}

void ManifestBuilder::add_input(const std::filesystem::path& path) {
  inputs_[path.filename().string()] = hash_hex(fnv1a64_file(path));
}

void ManifestBuilder::add_output(const std::filesystem::path& path) {
  outputs_[path.filename().string()] = hash_hex(fnv1a64_file(path));
}

void ManifestBuilder::add_note(const std::string& key, const std::string& value) {
  notes_[key] = value;
}

void ManifestBuilder::write(const std::filesystem::path& path) const {
  nlohmann::json j;
  j["command"] = command_;
  j["config"] = config_;
  j["overrides"] = overrides_;
  j["kernel_backend"] = kernels::active().name;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["notes"] = notes_;
  std::ofstream out(path);
  if (!out) throw FormatError("manifest: cannot open " + path.string() + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw FormatError("manifest: write failed for " + path.string());
}

}  // namespace dltta
