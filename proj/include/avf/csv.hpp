#pragma once

#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace avf {

/// RFC 4180 field: quoted only when it contains a comma, quote, CR or LF.
/// Rows end with a bare LF.
inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + "\n";
}

inline std::string csv_row(std::initializer_list<std::string> fields) {
  return csv_row(std::vector<std::string>(fields));
}

} // namespace avf
