#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "silicon/extraction.hpp"
#include "silicon/lm_backend.hpp"
#include "silicon/probes.hpp"
#include "silicon/stats.hpp"
#include "silicon/survey_data.hpp"
#include "silicon/templating.hpp"

namespace silicon {

enum class StudyKind { wordlist, vote, interview, ablation, temperature_sweep };
std::string to_string(StudyKind kind);

struct HumanVoteSpec {
    std::string variable;
    std::set<std::string> positive;  // codes scored 1 (Republican)
    std::set<std::string> negative;  // codes scored 0 (Democrat)
};

struct CostPlan {
    std::int64_t avg_prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::optional<std::int64_t> queries;  // defaults to the dataset size
    std::int64_t targets = 1;
};

/// Command-line overrides; each applied value is echoed into the manifest.
struct Overrides {
    std::optional<std::filesystem::path> backend;
    std::optional<std::filesystem::path> cache;
    std::optional<std::filesystem::path> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallelism;
    std::optional<std::vector<double>> temperatures;
};

struct ExperimentConfig {
    std::filesystem::path path;
    std::string raw_json;
    std::map<std::string, std::string> overrides;

    StudyKind study = StudyKind::vote;
    std::filesystem::path dataset, codebook, template_path, probe_path, script_path, subgroups_path, human_lists;
    HumanVoteSpec human_vote;
    std::vector<BackendDescriptor> backends;
    int max_tokens = 1;
    double temperature = 0.7;
    std::uint64_t seed = 0;
    std::size_t parallelism = 1;
    std::optional<std::filesystem::path> cache;
    std::filesystem::path output_dir;
    std::vector<std::string> targets;
    std::vector<std::string> analysis_variables;
    std::vector<double> temperatures;
    AblationPolicy ablation;
    std::optional<CostPlan> cost;
    std::string ideology_variable;
    std::vector<std::string> target_parties{"Republican", "Democratic"};
    bool tie_as_positive = false;
    int top_k = 100;
    std::string human_label = "Human";
    std::string silicon_label = "Silicon";
};

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});
ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir,
                              const Overrides& overrides = {});

struct RunCounts {
    std::size_t queries = 0;
    std::size_t cache_hits = 0;
    std::size_t fetches = 0;
    std::size_t attempts = 0;
    std::size_t successes = 0;
    std::size_t failures = 0;
    std::size_t no_signal = 0;
    std::size_t non_compliant = 0;
    std::size_t ties = 0;
    std::size_t skipped = 0;  // guarded interview items never queried

    RunCounts& operator+=(const RunCounts& o);
};

struct BackendRun {
    BackendDescriptor descriptor;
    LedgerSnapshot ledger;
    RunCounts counts;
};

// ---------------------------------------------------------------- per-study results

struct VoteRun {
    std::string backend;
    std::vector<std::optional<double>> p_positive;  // by record
    std::vector<std::optional<int>> human_votes;
    FidelityReport report;
    MarginalEstimate marginal;
    double human_share = 0.0;
    RunCounts counts;
};

struct WordlistRun {
    std::string backend;
    std::vector<std::string> respondent_ids;
    std::vector<std::string> target_parties;
    std::vector<WordList> lists;  // record-major, one per (record, target)
    std::vector<bool> failed;
    std::vector<FrequencyRow> frequencies;
    std::array<std::size_t, 5> histogram{};
    RunCounts counts;
};

struct InterviewRun {
    std::string backend;
    double temperature = 0.0;
    SurveyDataset silicon;
    SurveyDataset human_complete, silicon_complete;
    AssociationMatrix human_matrix, silicon_matrix, synthetic_matrix;
    MatrixComparison comparison;
    std::vector<std::string> zero_variance;
    RunCounts counts;
};

struct AblationRow {
    std::string backend;
    std::string label;
    std::size_t fragments = 0;
    std::size_t n = 0;
    std::optional<double> agreement;
};

struct RunResult {
    StudyKind study = StudyKind::vote;
    std::filesystem::path output_dir;
    std::vector<BackendRun> backends;
    RunCounts counts;
    std::vector<VoteRun> votes;
    std::vector<WordlistRun> wordlists;
    std::vector<InterviewRun> interviews;
    std::vector<AblationRow> ablation;
    std::vector<std::pair<std::string, DifferenceSummary>> temperature_summary;
};

/// Dispatches on config.study and writes reports plus manifest.json.
RunResult run_experiment(const ExperimentConfig& config);
RunResult run_vote_study(const ExperimentConfig& config);
RunResult run_wordlist_study(const ExperimentConfig& config);
RunResult run_interview_study(const ExperimentConfig& config);
RunResult run_ablation(const ExperimentConfig& config);
RunResult run_temperature_sweep(const ExperimentConfig& config);

/// Backend from a descriptor. Echo backends need the study's dataset, script and targets.
struct BackendContext {
    const SurveyDataset* dataset = nullptr;
    const InterviewScript* script = nullptr;
    std::vector<std::string> targets;
    std::shared_ptr<CacheStore> cache;
    std::uint64_t seed = 0;
};
std::shared_ptr<Backend> make_backend(const BackendDescriptor& descriptor, const BackendContext& context);

struct CostEstimate {
    std::int64_t queries = 0;
    std::int64_t tokens_per_target = 0;
    std::int64_t cents_per_target = 0;
    std::int64_t targets = 1;
    std::int64_t total_tokens = 0;
    std::int64_t total_cents = 0;
    double price_per_1k = 0.0;
};

/// Planned-run cost from the config's cost section; never contacts a backend.
CostEstimate estimate_cost(const ExperimentConfig& config);

/// Rendered conditioning text for one record (dry run). `target` selects the
/// interview item or the word-list target party.
std::string render_for_record(const ExperimentConfig& config, const std::string& respondent_id,
                              const std::string& target);

// ---------------------------------------------------------------- evaluation plan

struct EvaluationPlan {
    std::vector<std::string> list_ids;
    std::vector<std::vector<std::size_t>> raters;  // list indices per rater
    std::vector<std::size_t> coverage;             // raters per list
    std::size_t per_rater = 0;
    std::size_t per_list = 0;
    std::size_t below = 0;  // lists with fewer than per_list raters
    std::size_t above = 0;  // lists with more than per_list raters
};

/// Seeded assignment of lists to raters. Coverage is per_list, or per_list +- 1
/// when n_raters * per_rater is not a multiple of the list count.
EvaluationPlan build_evaluation_plan(const std::vector<std::string>& list_ids, std::size_t n_raters,
                                     std::size_t per_rater = 8, std::size_t per_list = 3, std::uint64_t seed = 0);
/// Throws ValidationError describing the first violated invariant.
void check_evaluation_plan(const EvaluationPlan& plan);

}  // namespace silicon
