#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "dltta/config.hpp"

namespace dltta {

std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

// Reproducibility record written next to every command's outputs: the
// resolved config, CLI overrides, kernel backend, and content hashes of
// inputs and outputs. Contains nothing time- or host-dependent.
class ManifestBuilder {
 public:
  ManifestBuilder(std::string command, const RunConfig& cfg);
  void add_override(const std::string& key, const std::string& value);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add_note(const std::string& key, const std::string& value);
  void write(const std::filesystem::path& path) const;

 private:
  std::string command_;
  std::map<std::string, std::string> config_;
  std::map<std::string, std::string> overrides_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  std::map<std::string, std::string> notes_;
};

}  // namespace dltta
