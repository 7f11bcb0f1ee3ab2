#ifndef REVHMC_CSV_HPP
#define REVHMC_CSV_HPP

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace revhmc {

/// %.17g round-trips doubles exactly and keeps outputs byte-stable per build.
inline std::string csv_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string csv_num(long long v) { return std::to_string(v); }
inline std::string csv_num(int v) { return std::to_string(v); }

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
      : out_(path) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    write_row(header);
  }

  void row(const std::vector<std::string>& cells) { write_row(cells); }

 private:
  void write_row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
};

}  // namespace revhmc

#endif
