#pragma once

#include <filesystem>
#include <vector>

namespace dltta {

// Sorts the given CSVs into telemetry files and retrieval-sweep summaries by
// header, validates the columns each plot needs, and writes matplotlib
// scripts (not images) into out_dir. Returns the script paths. Regeneration
// from identical inputs is byte-identical.
std::vector<std::filesystem::path> emit_plots(const std::vector<std::filesystem::path>& csvs,
                                              const std::filesystem::path& out_dir);

}  // namespace dltta
