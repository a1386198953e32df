#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "silicon/lm_backend.hpp"
#include "silicon/survey_data.hpp"
#include "silicon/templating.hpp"

namespace silicon {

struct TokenSet {
    std::string label;
    std::vector<std::string> surfaces;
    bool auto_variants = true;
};

struct Probe {
    std::string prompt_suffix;
    std::vector<TokenSet> candidates;
    /// Label scored as 1 when dichotomizing (the Republican candidate).
    std::string positive;

    std::size_t index_of(const std::string& label) const;
};

Probe parse_probe(const std::string& json_text);
Probe load_probe(const std::filesystem::path& path);

/// lower / UPPER / Title forms crossed with optional leading and trailing space.
std::set<std::string> expand_variants(const std::string& surface);
std::set<std::string> variant_set(const TokenSet& set);
/// Throws ConfigError when two candidates share a variant or labels repeat.
void validate_probe(const Probe& probe);

/// Per-candidate log mass (log-sum-exp of matching tokens; -inf when none matched).
struct Collapsed {
    std::vector<std::string> labels;
    std::vector<double> log_mass;
    double residual = 0.0;  // reported mass outside every token set

    double mass(std::size_t i) const;
};

Collapsed collapse(const NextTokenDistribution& dist, const Probe& probe);

struct CandidateProbabilities {
    std::vector<std::string> labels;
    std::vector<double> probs;
    double residual = 0.0;

    double at(const std::string& label) const;
};

/// Throws NoSignalError when no candidate received any mass.
CandidateProbabilities normalize(const Collapsed& collapsed);

struct VoteCall {
    std::optional<int> vote;  // 1 positive, 0 negative, unset on a tie
    bool tie = false;
};

VoteCall dichotomize(double p, double threshold = 0.5, bool tie_as_positive = false);

struct MarginalEstimate {
    std::vector<std::string> labels;
    std::vector<double> means;
    std::size_t with_signal = 0;
    std::size_t no_signal = 0;
    /// Per-record probabilities in record order; empty rows had no signal.
    std::vector<std::optional<CandidateProbabilities>> per_record;
};

/// Renders backstory + probe stem for every record, probes the next token and
/// averages normalized candidate probabilities over records with signal.
MarginalEstimate estimate_marginal(const SurveyDataset& dataset, const PersonaTemplate& tmpl, const Probe& probe,
                                   LmClient& client, std::size_t parallelism = 1, int top_k = 100);

}  // namespace silicon
