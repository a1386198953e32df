#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "silicon/survey_data.hpp"
#include "silicon/templating.hpp"

namespace silicon {

struct WordList {
    std::array<std::string, 4> entries;  // blank-padded
    std::size_t count = 0;
    bool compliant = false;
    std::string raw;
};

/// Numbered lines, then short newline-separated lines, then comma-separated
/// items; the first four items are kept.
WordList extract_word_list(const std::string& raw);
/// "1. a\n2. b" rendering of the nonblank entries.
std::string join_numbered(const WordList& list);

struct ClosedAnswer {
    std::optional<std::string> code;
    std::optional<std::string> surface;
    std::string raw;
};

/// Lower-cases, trims and truncates at the first newline, then matches option
/// surfaces exactly. Numeric items accept a digit string inside the variable's range.
ClosedAnswer match_closed_answer(const std::string& completion, const InterviewItem& item,
                                 const VariableSpec* spec = nullptr);

struct GroupedWordList {
    std::string source;  // e.g. human / silicon
    std::string writer_ideology;
    std::string target_party;
    WordList list;
};

struct FrequencyRow {
    std::string source;
    std::string writer_ideology;
    std::string target_party;
    std::string word;
    std::size_t count = 0;
    double relative = 0.0;
};

/// Rows grouped by (source, ideology, target) in first-seen order; words within a
/// group by descending count, then alphabetically.
std::vector<FrequencyRow> word_frequencies(const std::vector<GroupedWordList>& lists);

/// histogram[k] = number of lists with exactly k entries (k = 0..4).
std::array<std::size_t, 5> entry_histogram(const std::vector<WordList>& lists);

}  // namespace silicon
