#include "silicon/extraction.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <regex>

#include "silicon/text.hpp"

namespace silicon {

namespace {

constexpr std::size_t kMaxWords = 6;

std::string clean_item(std::string s) {
    s = text::trim(s);
    while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) {
        s.pop_back();
        s = text::trim(s);
    }
    return s;
}

std::string strip_bullet(const std::string& line) {
    std::string s = text::trim(line);
    for (std::string_view b : {"- ", "* ", "\xE2\x80\xA2 "}) {
        if (s.rfind(b, 0) == 0) return text::trim(s.substr(b.size()));
    }
    return s;
}

std::vector<std::string> nonblank_lines(const std::string& raw) {
    std::vector<std::string> out;
    for (auto& l : text::split(raw, '\n')) {
        std::string t = text::trim(l);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::optional<std::vector<std::string>> numbered_items(const std::vector<std::string>& lines) {
    static const std::regex numbered(R"(^\s*(\d+)[.)]\s*(.+)$)");
    std::vector<std::string> items;
    std::optional<long> first_number;
    std::size_t first_line = 0;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::smatch m;
        if (std::regex_match(lines[i], m, numbered)) {
            if (!first_number) {
                first_number = std::stol(m[1].str());
                first_line = i;
            }
            items.push_back(m[2].str());
        } else if (first_number) {
            break;
        }
    }
    if (!first_number) return std::nullopt;
    // Completion continuing a prompt that ended in "1.": the unnumbered first line is item one.
    if (*first_number == 2 && first_line == 1) items.insert(items.begin(), lines[0]);
    else if (items.size() < 2 && *first_number != 1) return std::nullopt;
    return items;
}

std::optional<std::vector<std::string>> line_items(const std::vector<std::string>& lines) {
    std::vector<std::string> items;
    for (auto& l : lines) {
        std::string s = strip_bullet(l);
        if (text::count_words(s) > kMaxWords) break;
        items.push_back(s);
    }
    if (items.size() < 2) return std::nullopt;
    return items;
}

std::optional<std::vector<std::string>> comma_items(const std::vector<std::string>& lines) {
    if (lines.empty()) return std::nullopt;
    std::string first = clean_item(lines[0]);
    for (std::string_view stop : {". ", "? ", "! "})
        if (first.find(stop) != std::string::npos) return std::nullopt;
    auto parts = text::split(first, ',');
    if (parts.size() < 2) return std::nullopt;
    std::vector<std::string> items;
    for (auto& p : parts) {
        std::string s = text::trim(p);
        if (s.rfind("and ", 0) == 0) s = text::trim(s.substr(4));
        if (s.empty() || text::count_words(s) > kMaxWords) return std::nullopt;
        items.push_back(s);
    }
    return items;
}

std::optional<std::int64_t> digits(const std::string& s) {
    if (s.empty() || s.size() > 12 || !std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; }))
        return std::nullopt;
    std::int64_t v = 0;
    std::from_chars(s.data(), s.data() + s.size(), v);
    return v;
}

}  // namespace

WordList extract_word_list(const std::string& raw) {
    WordList out;
    out.raw = raw;
    auto lines = nonblank_lines(raw);
    auto items = numbered_items(lines);
    if (!items) items = line_items(lines);
    if (!items) items = comma_items(lines);
    if (!items) return out;
    for (auto& it : *items) {
        std::string s = clean_item(it);
        if (s.empty()) continue;
        out.entries[out.count++] = s;
        if (out.count == out.entries.size()) break;
    }
    out.compliant = out.count > 0;
    return out;
}

std::string join_numbered(const WordList& list) {
    std::vector<std::string> lines;
    for (std::size_t i = 0; i < list.count; ++i) lines.push_back(std::to_string(i + 1) + ". " + list.entries[i]);
    return text::join(lines, "\n");
}

ClosedAnswer match_closed_answer(const std::string& completion, const InterviewItem& item, const VariableSpec* spec) {
    ClosedAnswer out;
    out.raw = completion;
    std::string s = text::trim(text::to_lower(completion));
    if (auto nl = s.find('\n'); nl != std::string::npos) s = text::trim(s.substr(0, nl));
    if (item.numeric()) {
        auto v = digits(s);
        if (!v) return out;
        if (spec && spec->kind == VariableKind::integer && (*v < spec->min || *v > spec->max)) return out;
        out.code = std::to_string(*v);
        out.surface = s;
        return out;
    }
    for (auto& opt : item.options) {
        if (text::to_lower(opt.surface) == s) {
            out.code = opt.code;
            out.surface = opt.surface;
            break;
        }
    }
    return out;
}

std::vector<FrequencyRow> word_frequencies(const std::vector<GroupedWordList>& lists) {
    struct Group {
        std::string source, ideology, target;
        std::map<std::string, std::size_t> counts;
        std::size_t total = 0;
    };
    std::vector<Group> groups;
    std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index;
    for (auto& g : lists) {
        auto key = std::make_tuple(g.source, g.writer_ideology, g.target_party);
        auto [it, inserted] = index.emplace(key, groups.size());
        if (inserted) groups.push_back({g.source, g.writer_ideology, g.target_party, {}, 0});
        Group& grp = groups[it->second];
        for (std::size_t i = 0; i < g.list.entries.size(); ++i) {
            std::string w = text::trim(text::to_lower(g.list.entries[i]));
            if (w.empty()) continue;
            ++grp.counts[w];
            ++grp.total;
        }
    }
    std::vector<FrequencyRow> rows;
    for (auto& g : groups) {
        std::vector<std::pair<std::string, std::size_t>> words(g.counts.begin(), g.counts.end());
        std::stable_sort(words.begin(), words.end(), [](auto& a, auto& b) { return a.second > b.second; });
        for (auto& [w, n] : words)
            rows.push_back({g.source, g.ideology, g.target, w, n,
                            static_cast<double>(n) / static_cast<double>(g.total)});
    }
    return rows;
}

std::array<std::size_t, 5> entry_histogram(const std::vector<WordList>& lists) {
    std::array<std::size_t, 5> h{};
    for (auto& l : lists) ++h[std::min<std::size_t>(l.count, 4)];
    return h;
}

}  // namespace silicon
