#include "memsim/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace memsim {

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(const std::vector<std::variant<std::int64_t, double, std::string>>& cells) {
  if (cells.size() != header_.size()) {
    throw std::invalid_argument("csv row width does not match header");
  }
  std::vector<std::string> row;
  row.reserve(cells.size());
  for (const auto& c : cells) {
    if (std::holds_alternative<std::int64_t>(c)) {
      row.push_back(std::to_string(std::get<std::int64_t>(c)));
    } else if (std::holds_alternative<double>(c)) {
      row.push_back(format_double(std::get<double>(c)));
    } else {
      row.push_back(std::get<std::string>(c));
    }
  }
  rows_.push_back(std::move(row));
}

std::string CsvWriter::to_string() const {
  std::ostringstream out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out << ',';
    out << header_[i];
  }
  out << '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  return out.str();
}

void CsvWriter::write(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << to_string();
  if (!f) throw std::runtime_error("write failed: " + path);
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double CsvTable::as_double(std::size_t row, int col) const {
  return std::stod(rows.at(row).at(static_cast<std::size_t>(col)));
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  CsvTable t;
  std::string line;
  if (std::getline(f, line)) t.header = split_line(line);
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    t.rows.push_back(split_line(line));
  }
  return t;
}

std::string render_text_table(const CsvTable& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  for (std::size_t c = 0; c < table.header.size(); ++c) width[c] = table.header[c].size();
  for (const auto& row : table.rows) {
    for (std::size_t c = 0; c < row.size() && c < width.size(); ++c) {
      width[c] = std::max(width[c], row[c].size());
    }
  }
  std::ostringstream out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < width.size(); ++c) {
      const std::string& cell = c < row.size() ? row[c] : std::string{};
      out << cell << std::string(width[c] - cell.size() + 2, ' ');
    }
    out << '\n';
  };
  emit_row(table.header);
  for (std::size_t c = 0; c < width.size(); ++c) out << std::string(width[c], '-') << "  ";
  out << '\n';
  for (const auto& row : table.rows) emit_row(row);
  return out.str();
}

}  // namespace memsim
