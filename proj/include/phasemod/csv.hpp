#pragma once

// Comma-separated output with a header row and shortest round-trip doubles.

#include <charconv>
#include <fstream>
#include <initializer_list>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "phasemod/error.hpp"

namespace phasemod {

inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::span<const std::string> header) : out_(out) {
    write_row_strings(header);
  }
  CsvWriter(std::ostream& out, std::initializer_list<std::string> header) : out_(out) {
    std::vector<std::string> h(header);
    write_row_strings(h);
  }

  void row(std::span<const double> values) {
    bool first = true;
    for (double v : values) {
      if (!first) out_ << ',';
      out_ << format_double(v);
      first = false;
    }
    out_ << '\n';
  }
  void row(std::initializer_list<double> values) {
    row(std::span<const double>(values.begin(), values.size()));
  }
  void text_row(std::span<const std::string> cells) { write_row_strings(cells); }

 private:
  void write_row_strings(std::span<const std::string> cells) {
    bool first = true;
    for (const auto& c : cells) {
      if (!first) out_ << ',';
      out_ << c;
      first = false;
    }
    out_ << '\n';
  }

  std::ostream& out_;
};

inline std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::out | std::ios::trunc);
  if (!f) throw Error(Errc::configuration, "csv", "cannot open " + path + " for writing");
  return f;
}

}  // namespace phasemod
