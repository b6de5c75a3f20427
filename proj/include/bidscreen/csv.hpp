#pragma once

#include <filesystem>
#include <functional>
#include <istream>
#include <string>
#include <string_view>
#include <vector>

namespace bidscreen::csv {

/// Splits one CSV record. Double-quoted fields may contain commas and doubled quotes.
/// Returns false on an unterminated quote.
bool split_record(std::string_view line, std::vector<std::string>& fields);

/// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

/// Joins fields into one record (no trailing newline).
std::string join(const std::vector<std::string>& fields);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double value);

/// Fixed-point representation with the given number of decimals.
std::string format_fixed(double value, int decimals);

/// Strict numeric parse of a whole field (no surrounding garbage).
bool parse_double(std::string_view text, double& out);
bool parse_int(std::string_view text, long long& out);

/// Reads lines from a stream, stripping a trailing '\r'. Returns false at EOF.
bool read_line(std::istream& in, std::string& line);

/// Writes a file atomically: content goes to `<path>.tmp` which is then renamed over `path`.
/// The temporary is removed if the writer throws.
void write_atomic(const std::filesystem::path& path,
                  const std::function<void(std::ostream&)>& writer);

/// Reads a headed CSV file into rows; throws bidscreen::Error if the header differs from
/// `expected_header` or a row has the wrong arity.
std::vector<std::vector<std::string>> read_table(const std::filesystem::path& path,
                                                 const std::vector<std::string>& expected_header);

}  // namespace bidscreen::csv
