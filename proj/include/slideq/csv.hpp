#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace slideq {

/// Minimal RFC 4180 reader: comma separated, optional double quotes, LF or
/// CRLF line endings. The first record is the header.
class CsvReader {
 public:
  CsvReader(std::istream& in, std::string source);

  const std::vector<std::string>& header() const noexcept { return header_; }
  /// Reads the next non-empty record; false at end of input.
  bool next(std::vector<std::string>& fields);
  /// "source:line" of the last record read, for error messages.
  std::string where() const;

 private:
  bool read_record(std::vector<std::string>& fields);

  std::istream& in_;
  std::string source_;
  std::vector<std::string> header_;
  std::size_t line_ = 0;
};

double parse_double(std::string_view text, const std::string& where);

/// 17 significant digits, so a written double parses back to the same value.
std::string format_double(double v);

/// Writes records with LF endings, quoting fields only when needed.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

}  // namespace slideq
