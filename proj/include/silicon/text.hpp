#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace silicon::text {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
/// First letter upper-cased, the rest lower-cased (ASCII).
std::string to_title(std::string_view s);
bool contains(std::string_view haystack, std::string_view needle);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
std::size_t count_words(std::string_view s);

/// Fixed-point formatting with round-half-away-from-zero on the decimal
/// representation; never prints "-0.00".
std::string fixed(double value, int decimals);
/// fixed() without trailing zeros: 0.20 -> "0.2", 1.0 -> "1".
std::string trimmed(double value, int decimals);
/// Shortest round-trip representation; integral values keep one decimal ("1.0").
std::string shortest(double value);

/// Escape newlines, tabs, carriage returns and backslashes so the value fits
/// on one line.
std::string escape_line(std::string_view s);
std::string unescape_line(std::string_view s);

using Row = std::vector<std::string>;

/// RFC 4180-style delimited reader: quoted fields, doubled quotes, embedded
/// newlines inside quotes. Trailing CR is stripped.
class DelimitedReader {
public:
    DelimitedReader(std::istream& in, char delimiter);
    bool next(Row& row);
    std::size_t line() const noexcept { return line_; }

private:
    std::istream& in_;
    char delim_;
    std::size_t line_ = 0;
};

std::string quote_field(std::string_view field, char delimiter);
void write_row(std::ostream& out, const Row& row, char delimiter);

}  // namespace silicon::text
