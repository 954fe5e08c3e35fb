#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>

#include "ouqsd/version.hpp"

// Bit-stable CSV emission: 17 significant digits reproduce every double
// exactly, so identical (config, seed) runs produce byte-identical files.

namespace ouqsd::csv {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Writer {
 public:
  Writer(const std::string& path, const std::string& header, std::uint64_t seed)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot open output file: " + path);
    out_ << header << "\n";
    out_ << "# ouqsd " << kVersion << " seed=" << seed << "\n";
  }

  void row(std::initializer_list<double> values) {
    bool first = true;
    for (const double v : values) {
      if (!first) out_ << ",";
      out_ << format_real(v);
      first = false;
    }
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

}  // namespace ouqsd::csv
