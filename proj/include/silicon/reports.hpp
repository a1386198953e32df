#pragma once

#include <string>
#include <utility>
#include <vector>

#include "silicon/stats.hpp"
#include "silicon/survey_data.hpp"

namespace silicon::reports {

/// Variable,Tetrachoric Correlation,Cohen's Kappa,ICC,Prop. agreement (2 decimals, NA when undefined).
std::string fidelity_table(const FidelityReport& report);

/// Subgroup rows by year: Variable,<year> Tetra.,<year> Prop. Agree,... Rows follow
/// first appearance across the reports; a subgroup missing from a year prints NA.
std::string yearly_fidelity_table(const std::vector<std::pair<std::string, FidelityReport>>& years);

/// Summary Statistic,Temp: <t>,... with Mean/Minimum/Maximum/Standard Deviation (3 decimals) and N.
std::string temperature_table(const std::vector<std::pair<std::string, DifferenceSummary>>& columns);

struct MissingnessPair {
    std::string label;
    double human_percent = 0;
    double silicon_percent = 0;
};

/// Variable,<human>,<silicon>; one decimal, trailing zeros dropped.
std::string missingness_table(const std::vector<MissingnessPair>& rows, const std::string& human_label = "Human",
                              const std::string& silicon_label = "Silicon");

struct SourcedDescriptives {
    std::string label;
    std::string source;
    Descriptives stats;
};

/// Variable,Source,N,Mean,St. Dev.,Min,Pctl(25),Pctl(75),Max.
std::string descriptives_table(const std::vector<SourcedDescriptives>& rows);

/// Input,Output,<human> Cramer's V,<silicon> Cramer's V,Difference (human - silicon);
/// two decimals, trailing zeros dropped.
std::string cramers_v_comparison(const MatrixComparison& cmp, const std::string& human_label = "Human",
                                 const std::string& silicon_label = "Silicon");

std::string matrix_csv(const AssociationMatrix& m);
std::string matrix_json(const AssociationMatrix& m);

/// One-column summary: Summary Statistic,Value.
std::string difference_summary(const DifferenceSummary& s);

}  // namespace silicon::reports
