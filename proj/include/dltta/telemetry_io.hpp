#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dltta/metrics.hpp"
#include "dltta/model.hpp"

namespace dltta {

// Shortest round-trippable decimal form; byte-stable across reruns.
std::string format_double(double v);

extern const std::vector<std::string> kTelemetryHeader;
// step,method,severity,discrepancy,applied_lr,tta_loss,correct_count,bank_size

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws FormatError naming the column.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Streams telemetry rows for one or more runs into a single CSV.
class TelemetryCsvWriter {
 public:
  explicit TelemetryCsvWriter(const std::filesystem::path& path);
  void add_run(const std::string& method, const std::vector<StepTelemetry>& telemetry,
               const std::vector<int>& correct);
  void close();

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log);

// Throws FormatError unless the file carries the exact telemetry header.
CsvTable read_telemetry_csv(const std::filesystem::path& path);

}  // namespace dltta
