#include "subt_beacon/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace subt_beacon::csv {

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

double quantize_g9(double v) {
  // Round to 9 significant decimal digits without going through snprintf
  // (this runs for every simulated point). The result prints losslessly
  // with %.9g, which is what keeps replayed logs bit-identical.
  if (v == 0.0 || !std::isfinite(v)) return v;
  const int exponent = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  const double scale = std::pow(10.0, 8 - exponent);
  return std::round(v * scale) / scale;
}

double parse_double(const std::string& field, const std::string& context) {
  double v = 0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) {
    throw ParseError(context + ": bad number '" + field + "'");
  }
  return v;
}

std::int64_t parse_int64(const std::string& field, const std::string& context) {
  std::int64_t v = 0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc{} || p != e) {
    throw ParseError(context + ": bad integer '" + field + "'");
  }
  return v;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

Reader::Reader(const std::string& path, const std::string& expected_header)
    : in_(path), path_(path) {
  if (!in_) throw ParseError(path + ": cannot open file");
  std::string header;
  if (!std::getline(in_, header)) throw ParseError(path + ":1: missing header");
  if (!header.empty() && header.back() == '\r') header.pop_back();
  line_ = 1;
  if (header != expected_header) {
    throw ParseError(path + ":1: expected header '" + expected_header +
                     "', got '" + header + "'");
  }
  n_columns_ = split(expected_header).size();
}

bool Reader::next(std::vector<std::string>& fields) {
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  fields = split(line);
  if (fields.size() != n_columns_) {
    throw ParseError(context() + ": expected " + std::to_string(n_columns_) +
                     " fields, got " + std::to_string(fields.size()));
  }
  return true;
}

std::string Reader::context() const {
  return path_ + ":" + std::to_string(line_);
}

Writer::Writer(const std::string& path, const std::string& header)
    : out_(path), path_(path) {
  if (!out_) throw std::runtime_error(path + ": cannot open for writing");
  out_ << header << '\n';
}

void Writer::row(const std::string& line) { out_ << line << '\n'; }

void Writer::flush() { out_.flush(); }

}  // namespace subt_beacon::csv
