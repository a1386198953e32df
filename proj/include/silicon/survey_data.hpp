#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "silicon/errors.hpp"

namespace silicon {

enum class VariableKind { categorical, integer, free_text };

/// One codebook entry. Categorical level codes are raw strings ("1", "-9")
/// and keep declaration order, which is also the order used for tables.
struct VariableSpec {
    std::string name;
    VariableKind kind = VariableKind::categorical;
    std::vector<std::pair<std::string, std::string>> levels;  // code -> label
    std::int64_t min = 0;
    std::int64_t max = 0;
    std::set<std::string> missing_codes;
    std::string label;  // display label for reports; defaults to name

    bool has_level(const std::string& code) const;
    std::optional<std::size_t> level_index(const std::string& code) const;
    const std::string& display() const { return label.empty() ? name : label; }
    /// Returns an empty string when the value validates, else the reason.
    std::string check(const std::string& value) const;
};

class Codebook {
public:
    Codebook() = default;
    explicit Codebook(std::vector<VariableSpec> variables);

    const std::vector<VariableSpec>& variables() const noexcept { return vars_; }
    std::size_t size() const noexcept { return vars_.size(); }
    std::optional<std::size_t> index_of(const std::string& name) const;
    std::size_t require(const std::string& name) const;
    const VariableSpec& at(const std::string& name) const { return vars_[require(name)]; }
    const VariableSpec& operator[](std::size_t i) const { return vars_[i]; }

private:
    std::vector<VariableSpec> vars_;
    std::unordered_map<std::string, std::size_t> index_;
};

Codebook load_codebook(const std::filesystem::path& path);
Codebook parse_codebook(const std::string& json_text);

/// A coded respondent row; values are indexed by codebook position.
struct SurveyRecord {
    std::string respondent_id;
    std::vector<std::optional<std::string>> values;

    const std::optional<std::string>& value(std::size_t var) const { return values[var]; }
};

class SurveyDataset {
public:
    SurveyDataset() = default;
    SurveyDataset(Codebook codebook, std::vector<SurveyRecord> records, std::string provenance = {});

    const Codebook& codebook() const noexcept { return codebook_; }
    const std::vector<SurveyRecord>& records() const noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    bool empty() const noexcept { return records_.empty(); }
    const std::string& provenance() const noexcept { return provenance_; }

    std::optional<std::size_t> find(const std::string& respondent_id) const;
    const SurveyRecord& at(const std::string& respondent_id) const;
    /// Value of a named variable for a record, empty when missing.
    std::optional<std::string> get(const SurveyRecord& r, const std::string& variable) const;
    /// Column of coded values (missing = nullopt) in record order.
    std::vector<std::optional<std::string>> column(const std::string& variable) const;

private:
    Codebook codebook_;
    std::vector<SurveyRecord> records_;
    std::string provenance_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

struct LoadOptions {
    char delimiter = ',';
    /// When false, invalid cells throw ValidationError listing every bad cell.
    /// When true, they are recorded as missing and returned in the report.
    bool lenient = false;
};

struct LoadResult {
    SurveyDataset dataset;
    std::vector<CellError> errors;
};

LoadResult load_dataset_report(const std::filesystem::path& table, const Codebook& codebook,
                               const LoadOptions& options = {});
SurveyDataset load_dataset(const std::filesystem::path& table, const std::filesystem::path& codebook,
                           const LoadOptions& options = {});
SurveyDataset load_dataset(const std::filesystem::path& table, const Codebook& codebook,
                           const LoadOptions& options = {});
/// Writes `respondent_id` followed by every codebook variable; missing cells are empty.
void save_dataset(const SurveyDataset& dataset, const std::filesystem::path& path, char delimiter = ',');

/// A conjunctive clause: a level set (categorical / free text) or an
/// inclusive integer range.
struct FilterClause {
    std::string variable;
    std::optional<std::set<std::string>> levels;
    std::optional<std::int64_t> min;
    std::optional<std::int64_t> max;
};

struct SubgroupFilter {
    std::vector<FilterClause> clauses;
};

struct NamedSubgroup {
    std::string name;
    SubgroupFilter filter;
};

SubgroupFilter parse_filter(const std::string& json_text);
SubgroupFilter load_filter(const std::filesystem::path& path);
std::vector<NamedSubgroup> parse_subgroups(const std::string& json_text);
std::vector<NamedSubgroup> load_subgroups(const std::filesystem::path& path);

bool matches(const SurveyDataset& dataset, const SurveyRecord& record, const SubgroupFilter& filter);
/// Indices of matching records, in record order.
std::vector<std::size_t> select(const SurveyDataset& dataset, const SubgroupFilter& filter);
SurveyDataset filter_subgroup(const SurveyDataset& dataset, const SubgroupFilter& filter);

/// Keeps respondents present in both datasets with non-missing values for every
/// listed variable in both; the result follows the first dataset's order.
std::pair<SurveyDataset, SurveyDataset> complete_cases(const SurveyDataset& a, const SurveyDataset& b,
                                                       const std::vector<std::string>& variables);

struct MissingnessRow {
    std::string variable;
    std::size_t missing = 0;
    std::size_t total = 0;
    double percent = 0.0;
};

std::vector<MissingnessRow> missingness_report(const SurveyDataset& dataset,
                                               const std::vector<std::string>& variables);

struct Descriptives {
    std::string variable;
    std::size_t n = 0;
    std::size_t missing = 0;
    // Unset when n == 0 (sd also unset when n == 1).
    std::optional<double> mean, sd, min, p25, p75, max;
};

/// Nearest-rank percentile of an ascending-sorted sample (p in (0, 100]).
double nearest_rank(const std::vector<double>& sorted, double p);
std::vector<Descriptives> describe(const SurveyDataset& dataset, const std::vector<std::string>& variables);

}  // namespace silicon
