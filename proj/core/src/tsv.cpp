#include "interfere/tsv.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ostream>
#include <sstream>

#include "interfere/errors.hpp"

namespace interfere {

namespace {

std::string_view trim(std::string_view s) {
  const auto blank = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
  while (!s.empty() && blank(s.front())) s.remove_prefix(1);
  while (!s.empty() && blank(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace

std::vector<std::string> split_fields(std::string_view line, char delimiter) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delimiter, start);
    const auto field = line.substr(start, pos == std::string_view::npos ? line.npos : pos - start);
    // Tabs are significant when they are the delimiter, so only trim spaces then.
    if (delimiter == '\t') {
      std::string_view f = field;
      while (!f.empty() && f.front() == ' ') f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
      out.emplace_back(f);
    } else {
      out.emplace_back(trim(field));
    }
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string format_number(double value, int precision) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // folds -0
  std::ostringstream os;
  os.precision(precision);
  os << value;
  return os.str();
}

std::string format_optional(const std::optional<double>& value, int precision) {
  return value ? format_number(*value, precision) : std::string("NA");
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  // std::from_chars for double is available in libstdc++ 11+.
  double v = 0.0;
  if (text.front() == '+') text.remove_prefix(1);
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<long long> parse_integer(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end) return std::nullopt;
  return v;
}

ReportWriter::ReportWriter(std::ostream& out, std::vector<std::string> columns, int precision)
    : out_(out), columns_(std::move(columns)), precision_(precision) {}

void ReportWriter::comment(std::string_view key, std::string_view value) {
  out_ << "# " << key << ": " << value << '\n';
}

void ReportWriter::header() {
  for (std::size_t i = 0; i < columns_.size(); ++i) out_ << (i ? "\t" : "") << columns_[i];
  out_ << '\n';
}

void ReportWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != columns_.size()) {
    throw Error("report row has " + std::to_string(cells.size()) + " cells, expected " +
                std::to_string(columns_.size()));
  }
  for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "\t" : "") << cells[i];
  out_ << '\n';
}

}  // namespace interfere
