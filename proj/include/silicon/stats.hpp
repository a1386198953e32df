#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "silicon/survey_data.hpp"

namespace silicon {

class ContingencyTable {
public:
    ContingencyTable() = default;
    ContingencyTable(std::vector<std::string> row_levels, std::vector<std::string> col_levels);
    ContingencyTable(std::initializer_list<std::initializer_list<std::int64_t>> rows);

    std::size_t rows() const noexcept { return row_levels_.size(); }
    std::size_t cols() const noexcept { return col_levels_.size(); }
    std::int64_t& at(std::size_t r, std::size_t c) { return cells_[r * cols() + c]; }
    std::int64_t at(std::size_t r, std::size_t c) const { return cells_[r * cols() + c]; }
    std::int64_t total() const;
    std::int64_t row_total(std::size_t r) const;
    std::int64_t col_total(std::size_t c) const;
    const std::vector<std::string>& row_levels() const noexcept { return row_levels_; }
    const std::vector<std::string>& col_levels() const noexcept { return col_levels_; }
    bool square() const noexcept { return rows() == cols(); }

    /// Removes rows and columns whose margin is zero.
    ContingencyTable drop_empty() const;

private:
    std::vector<std::string> row_levels_, col_levels_;
    std::vector<std::int64_t> cells_;
};

using CodedColumn = std::vector<std::optional<std::string>>;

/// Pairwise-complete tally. Rows follow x_levels, columns y_levels; values
/// outside the level lists are an error. Zero complete pairs is an error.
ContingencyTable crosstab(const CodedColumn& x, const CodedColumn& y, const std::vector<std::string>& x_levels,
                          const std::vector<std::string>& y_levels);
/// Levels inferred from the data (numeric order when every code is an integer).
ContingencyTable crosstab(const CodedColumn& x, const CodedColumn& y);
/// Codebook level order for categorical variables, numeric order otherwise.
std::vector<std::string> level_order(const VariableSpec& spec, const CodedColumn& values);

struct MetricResult {
    std::string metric;
    std::optional<double> value;
    bool degenerate = false;
    bool corrected = false;
    int iterations = 0;
    std::map<std::string, double> diagnostics;
    std::string note;
};

double normal_cdf(double x);
double normal_quantile(double p);
/// P(X <= h, Y <= k) for a standard bivariate normal with correlation rho.
double bvn_cdf(double h, double k, double rho);

MetricResult proportion_agreement(const ContingencyTable& t);
MetricResult cohens_kappa(const ContingencyTable& t);
/// Latent correlation of a 2x2 table; throws DegenerateError on an empty margin.
MetricResult tetrachoric(const ContingencyTable& t);
/// Shrout-Fleiss average-measure ICC(1,2), ICC(2,2), ICC(3,2); value is their minimum.
MetricResult icc_pair(const std::vector<double>& x, const std::vector<double>& y);
/// Throws DegenerateError when a row or column margin is zero.
MetricResult cramers_v(const ContingencyTable& t);

enum class MatrixSource { human, silicon_vs_human_input, fully_synthetic };
std::string to_string(MatrixSource s);

struct AssociationMatrix {
    std::vector<std::string> variables;
    MatrixSource source = MatrixSource::human;
    std::size_t observations = 0;
    /// values[i][j] = V(input variables[i] from x, output variables[j] from y); diagonal unset.
    std::vector<std::vector<std::optional<double>>> values;
    std::vector<std::vector<std::string>> flags;

    std::optional<double> at(const std::string& input, const std::string& output) const;
};

AssociationMatrix association_matrix(const SurveyDataset& x, const SurveyDataset& y,
                                     const std::vector<std::string>& variables, MatrixSource source);

struct DifferenceCell {
    std::string input, output;
    double human = 0, silicon = 0, difference = 0;
};

struct DifferenceSummary {
    double mean = 0, min = 0, max = 0, sd = 0;
    std::size_t cells = 0;
    std::size_t observations = 0;
};

struct MatrixComparison {
    std::vector<DifferenceCell> cells;
    DifferenceSummary summary;
    std::vector<std::string> excluded;
};

/// silicon - human over cells defined in both; variables in `exclude` are left out.
MatrixComparison compare_matrices(const AssociationMatrix& human, const AssociationMatrix& silicon,
                                  const std::vector<std::string>& exclude = {});
DifferenceSummary summarize(const std::vector<double>& differences, std::size_t observations);

struct FidelityRow {
    std::string subgroup;
    std::size_t n = 0;
    std::size_t ties = 0;
    MetricResult tetrachoric, kappa, icc, agreement;
};

struct FidelityReport {
    std::vector<FidelityRow> rows;
};

/// Metrics for one set of paired binary votes (silicon already dichotomized).
FidelityRow fidelity_row(const std::string& name, const std::vector<int>& human, const std::vector<int>& silicon);

/// Dichotomizes silicon probabilities and scores every subgroup against human votes.
FidelityReport subgroup_fidelity_report(const std::vector<std::optional<int>>& human_votes,
                                        const std::vector<std::optional<double>>& silicon_probs,
                                        const std::vector<NamedSubgroup>& subgroups, const SurveyDataset& dataset,
                                        bool tie_as_positive = false);

}  // namespace silicon
