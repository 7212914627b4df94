#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "firefly3d/errors.hpp"
#include "firefly3d/util.hpp"

namespace firefly::csv {

inline std::vector<std::string_view> split_row(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

// Reads a CSV with a mandatory header. Errors name the file and 1-based line.
class Reader {
 public:
  Reader(const std::string& path, const std::string& expected_header) : path_(path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path + ": empty file (missing header)");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != expected_header)
      throw DataError(path + ":1: unexpected header '" + line + "' (want '" + expected_header + "')");
    n_cols_ = split_row(expected_header).size();
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto cells = split_row(line);
      if (cells.size() != n_cols_)
        throw DataError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(n_cols_) +
                        " columns, got " + std::to_string(cells.size()));
      rows_.emplace_back();
      auto& row = rows_.back();
      row.reserve(cells.size());
      for (auto c : cells) row.emplace_back(c);
      line_numbers_.push_back(lineno);
    }
  }

  std::size_t size() const { return rows_.size(); }
  const std::vector<std::string>& row(std::size_t i) const { return rows_[i]; }

  double num(std::size_t i, std::size_t col) const {
    return parse_double(rows_[i][col], path_ + ":" + std::to_string(line_numbers_[i]));
  }
  std::int64_t integer(std::size_t i, std::size_t col) const {
    return parse_int(rows_[i][col], path_ + ":" + std::to_string(line_numbers_[i]));
  }

 private:
  std::string path_;
  std::size_t n_cols_ = 0;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::size_t> line_numbers_;
};

class Writer {
 public:
  Writer(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw DataError("cannot write CSV: " + path);
    out_ << header << "\n";
  }

  // Cells are pre-formatted strings; use firefly::format_double for numbers.
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

}  // namespace firefly::csv
