#include "slideq/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "slideq/error.hpp"

namespace slideq {

CsvReader::CsvReader(std::istream& in, std::string source)
    : in_(in), source_(std::move(source)) {
  if (!read_record(header_)) {
    throw Error(ErrorCode::ParseError, source_ + ": missing header row");
  }
  if (!header_.empty() && header_[0].starts_with("\xEF\xBB\xBF")) header_[0].erase(0, 3);
}

bool CsvReader::next(std::vector<std::string>& fields) {
  while (read_record(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    return true;
  }
  return false;
}

std::string CsvReader::where() const { return source_ + ":" + std::to_string(line_); }

bool CsvReader::read_record(std::vector<std::string>& fields) {
  fields.clear();
  std::string line;
  if (!std::getline(in_, line)) return false;
  ++line_;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (!quoted) break;
      // Quoted field spans a line break.
      std::string more;
      if (!std::getline(in_, more)) {
        throw Error(ErrorCode::ParseError, where() + ": unterminated quoted field");
      }
      ++line_;
      field += '\n';
      line += '\n' + more;
      continue;
    }
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\r' && i + 1 == line.size()) {
      // CRLF
    } else {
      field += c;
    }
  }
  fields.push_back(std::move(field));
  return true;
}

double parse_double(std::string_view text, const std::string& where) {
  while (!text.empty() && text.front() == ' ') text.remove_prefix(1);
  while (!text.empty() && text.back() == ' ') text.remove_suffix(1);
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw Error(ErrorCode::ParseError, where + ": not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    const std::string& f = fields[i];
    if (f.find_first_of(",\"\n\r") == std::string::npos) {
      out_ << f;
      continue;
    }
    out_ << '"';
    for (char c : f) {
      if (c == '"') out_ << '"';
      out_ << c;
    }
    out_ << '"';
  }
  out_ << '\n';
}

}  // namespace slideq
