#include "silicon/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>

namespace silicon::text {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

std::string to_title(std::string_view s) {
    std::string out = to_lower(s);
    if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    return out;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.emplace_back(s.substr(start));
            return out;
        }
        out.emplace_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::size_t count_words(std::string_view s) {
    std::size_t n = 0;
    bool in_word = false;
    for (char c : s) {
        if (is_space(c)) {
            in_word = false;
        } else if (!in_word) {
            in_word = true;
            ++n;
        }
    }
    return n;
}

std::string fixed(double value, int decimals) {
    if (std::isnan(value)) return "NA";
    // Round on the shortest decimal representation so 0.125 -> 0.13 and
    // values like 0.8449999999 that print as 0.845 are not double-rounded.
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::fixed);
    std::string repr(buf, res.ptr);
    bool negative = !repr.empty() && repr[0] == '-';
    if (negative) repr.erase(0, 1);
    auto dot = repr.find('.');
    std::string int_part = dot == std::string::npos ? repr : repr.substr(0, dot);
    std::string frac = dot == std::string::npos ? "" : repr.substr(dot + 1);
    if (static_cast<int>(frac.size()) <= decimals) {
        frac.append(static_cast<std::size_t>(decimals) - frac.size(), '0');
    } else {
        bool round_up = frac[static_cast<std::size_t>(decimals)] >= '5';
        frac.resize(static_cast<std::size_t>(decimals));
        if (round_up) {
            std::string digits = int_part + frac;
            int i = static_cast<int>(digits.size()) - 1;
            while (i >= 0) {
                if (digits[static_cast<std::size_t>(i)] == '9') {
                    digits[static_cast<std::size_t>(i)] = '0';
                    --i;
                } else {
                    ++digits[static_cast<std::size_t>(i)];
                    break;
                }
            }
            if (i < 0) digits.insert(digits.begin(), '1');
            int_part = digits.substr(0, digits.size() - frac.size());
            frac = digits.substr(digits.size() - frac.size());
        }
    }
    std::string out = int_part;
    if (decimals > 0) out += "." + frac;
    bool all_zero = std::all_of(out.begin(), out.end(), [](char c) { return c == '0' || c == '.'; });
    if (negative && !all_zero) out.insert(out.begin(), '-');
    return out;
}

std::string trimmed(double value, int decimals) {
    std::string s = fixed(value, decimals);
    if (s.find('.') == std::string::npos) return s;
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
    return s == "-0" ? "0" : s;
}

std::string shortest(double value) {
    if (std::isnan(value)) return "NA";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, value);
    std::string out(buf, res.ptr);
    if (out.find_first_of(".eE") == std::string::npos && out.find("inf") == std::string::npos) out += ".0";
    return out;
}

std::string escape_line(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    return out;
}

std::string unescape_line(std::string_view s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '\\' && i + 1 < s.size()) {
            char n = s[++i];
            switch (n) {
                case 'n': out += '\n'; break;
                case 'r': out += '\r'; break;
                case 't': out += '\t'; break;
                default: out += n;
            }
        } else {
            out += s[i];
        }
    }
    return out;
}

DelimitedReader::DelimitedReader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

bool DelimitedReader::next(Row& row) {
    row.clear();
    std::string line;
    if (!std::getline(in_, line)) return false;
    ++line_;
    std::string field;
    bool in_quotes = false;
    bool was_quoted = false;
    for (;;) {
        for (std::size_t i = 0; i < line.size(); ++i) {
            char c = line[i];
            if (in_quotes) {
                if (c == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        field += '"';
                        ++i;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    field += c;
                }
            } else if (c == '"' && field.empty() && !was_quoted) {
                in_quotes = true;
                was_quoted = true;
            } else if (c == delim_) {
                row.push_back(std::move(field));
                field.clear();
                was_quoted = false;
            } else if (c == '\r' && i + 1 == line.size()) {
                // CRLF line ending
            } else {
                field += c;
            }
        }
        if (!in_quotes) break;
        field += '\n';
        if (!std::getline(in_, line)) break;
        ++line_;
    }
    row.push_back(std::move(field));
    return true;
}

std::string quote_field(std::string_view field, char delimiter) {
    bool needs = field.find_first_of(std::string{delimiter, '"', '\n', '\r'}) != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void write_row(std::ostream& out, const Row& row, char delimiter) {
    for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out << delimiter;
        out << quote_field(row[i], delimiter);
    }
    out << '\n';
}

}  // namespace silicon::text
