#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace interfere {

/// Delimited-text dialect shared by every reader and report writer.
struct DelimitedFormat {
  char delimiter = ',';

  static DelimitedFormat csv() { return {','}; }
  static DelimitedFormat tsv() { return {'\t'}; }
};

/// Splits one line on the delimiter; fields are trimmed of blanks and a trailing CR.
std::vector<std::string> split_fields(std::string_view line, char delimiter);

/// Decimal formatting with `precision` significant digits; NaN prints as "NA".
std::string format_number(double value, int precision = 6);
std::string format_optional(const std::optional<double>& value, int precision = 6);

/// Strict numeric parsing; rejects empty strings and trailing garbage.
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_integer(std::string_view text);

/// Row-oriented writer for the TSV reports. Lines starting with '#' carry
/// provenance and are ignored by readers.
class ReportWriter {
 public:
  ReportWriter(std::ostream& out, std::vector<std::string> columns, int precision = 6);

  void comment(std::string_view key, std::string_view value);
  void header();
  void row(const std::vector<std::string>& cells);

  int precision() const noexcept { return precision_; }
  std::string num(double v) const { return format_number(v, precision_); }
  std::string num(const std::optional<double>& v) const { return format_optional(v, precision_); }

 private:
  std::ostream& out_;
  std::vector<std::string> columns_;
  int precision_;
};

}  // namespace interfere
