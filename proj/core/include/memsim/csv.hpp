#pragma once

#include <string>
#include <variant>
#include <vector>

namespace memsim {

// Minimal CSV writer/reader with a pinned number format so identical data
// always serializes to identical bytes. Doubles use max_digits10 shortest
// round-trip formatting via std::to_chars.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(const std::vector<std::variant<std::int64_t, double, std::string>>& cells);
  void write(const std::string& path) const;
  std::string to_string() const;

  const std::vector<std::string>& header() const { return header_; }
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
  double as_double(std::size_t row, int col) const;
};

CsvTable read_csv(const std::string& path);

std::string format_double(double v);

// Plain-text table mirroring a CSV, for human-readable reports.
std::string render_text_table(const CsvTable& table);

}  // namespace memsim
