#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace subt_beacon::csv {

/// Raised on any malformed input file; message carries "path:line:".
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Floating-point fields in every log are printed with 9 significant digits.
std::string format_g9(double v);

/// The value a double becomes after a round trip through format_g9.
double quantize_g9(double v);

double parse_double(const std::string& field, const std::string& context);
std::int64_t parse_int64(const std::string& field, const std::string& context);

std::vector<std::string> split(const std::string& line, char sep = ',');

/// Line-oriented CSV reader that verifies the header and reports
/// "path:line:" on malformed rows.
class Reader {
 public:
  Reader(const std::string& path, const std::string& expected_header);

  /// Reads the next data row. Returns false at end of file.
  bool next(std::vector<std::string>& fields);

  int line() const { return line_; }
  std::string context() const;
  const std::string& path() const { return path_; }

 private:
  std::ifstream in_;
  std::string path_;
  std::size_t n_columns_ = 0;
  int line_ = 0;
};

class Writer {
 public:
  Writer(const std::string& path, const std::string& header);
  void row(const std::string& line);
  void flush();

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace subt_beacon::csv
