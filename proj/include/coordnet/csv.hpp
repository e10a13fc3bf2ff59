#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace coordnet::csv {

/// Splits one CSV line into fields. Supports RFC 4180 double-quote escaping
/// within a single physical line.
std::vector<std::string> split_line(std::string_view line);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Parses a double, throwing ParseError on trailing garbage or empty input.
double parse_double(std::string_view text);

/// Row-oriented writer producing LF-terminated lines.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  Writer& field(std::string_view s);
  Writer& field(const char* s) { return field(std::string_view(s)); }
  Writer& field(const std::string& s) { return field(std::string_view(s)); }
  Writer& field(double v);
  Writer& field(long long v);
  Writer& field(unsigned long long v);
  Writer& field(int v) { return field(static_cast<long long>(v)); }
  Writer& field(std::size_t v) { return field(static_cast<unsigned long long>(v)); }
  Writer& field(bool v) { return field(std::string_view(v ? "1" : "0")); }
  void end_row();

  template <typename... Ts>
  void row(const Ts&... values) {
    (field(values), ...);
    end_row();
  }

 private:
  std::ostream& out_;
  bool first_ = true;
};

/// Reads all rows of a CSV file. Blank lines are skipped; CR before LF is stripped.
std::vector<std::vector<std::string>> read_file(const std::filesystem::path& path);

}  // namespace coordnet::csv
