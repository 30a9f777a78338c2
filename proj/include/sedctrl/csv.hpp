#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "sedctrl/errors.hpp"

namespace sedctrl {

// Doubles are written with 17 significant digits so that a value survives a
// write/read round trip exactly and reruns are byte-identical.
inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw IoError("cannot open for writing: " + path);
    write_strings(header);
    path_ = path;
  }

  void write_strings(const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
      if (k) out_ << ',';
      out_ << fields[k];
    }
    out_ << '\n';
  }

  void write_row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (k) out_ << ',';
      out_ << format_double(values[k]);
    }
    out_ << '\n';
    if (!out_) throw IoError("write failure: " + path_);
  }

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace sedctrl
