#include "dltta/telemetry_io.hpp"

#include <cstdio>
#include <sstream>

#include "dltta/errors.hpp"

namespace dltta {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

const std::vector<std::string> kTelemetryHeader = {
    "step",    "method",   "severity",      "discrepancy",
    "applied_lr", "tta_loss", "correct_count", "bank_size"};

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw FormatError("csv: missing column '" + name + "'");
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("csv: cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("csv: empty file " + path.string());
  table.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto row = split_line(line);
    if (row.size() != table.header.size())
      throw FormatError("csv: row width " + std::to_string(row.size()) + " vs header width " +
                        std::to_string(table.header.size()) + " in " + path.string());
    table.rows.push_back(std::move(row));
  }
  return table;
}

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::ofstream out(path);
  if (!out) throw FormatError("csv: cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
  out << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
  if (!out) throw FormatError("csv: write failed for " + path.string());
}

TelemetryCsvWriter::TelemetryCsvWriter(const std::filesystem::path& path)
    : out_(path), path_(path) {
  if (!out_) throw FormatError("csv: cannot open " + path.string() + " for writing");
  for (std::size_t i = 0; i < kTelemetryHeader.size(); ++i)
    out_ << (i ? "," : "") << kTelemetryHeader[i];
  out_ << "\n";
}

void TelemetryCsvWriter::add_run(const std::string& method,
                                 const std::vector<StepTelemetry>& telemetry,
                                 const std::vector<int>& correct) {
  if (telemetry.size() != correct.size())
    throw DimensionError("telemetry csv: correct_count length mismatch");
  for (std::size_t t = 0; t < telemetry.size(); ++t) {
    const StepTelemetry& s = telemetry[t];
    out_ << s.step_index << ',' << method << ',' << s.severity_tag << ','
         << format_double(s.discrepancy) << ',' << format_double(s.applied_lr) << ','
         << format_double(s.tta_loss_before) << ',' << correct[t] << ',' << s.bank_size << "\n";
  }
}

void TelemetryCsvWriter::close() {
  out_.close();
  if (out_.fail()) throw FormatError("csv: write failed for " + path_.string());
}

void write_train_log_csv(const std::filesystem::path& path, const std::vector<TrainLogRow>& log) {
  std::vector<std::vector<std::string>> rows;
  rows.reserve(log.size());
  for (const auto& r : log)
    rows.push_back({std::to_string(r.epoch), format_double(r.loss),
                    format_double(r.train_accuracy), format_double(r.val_accuracy)});
  write_csv(path, {"epoch", "loss", "train_accuracy", "val_accuracy"}, rows);
}

CsvTable read_telemetry_csv(const std::filesystem::path& path) {
  CsvTable table = read_csv(path);
  if (table.header != kTelemetryHeader)
    throw FormatError("csv: " + path.string() + " does not carry the telemetry schema");
  return table;
}

}  // namespace dltta
