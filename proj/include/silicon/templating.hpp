#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "silicon/survey_data.hpp"

namespace silicon {

struct Bin {
    std::int64_t lo = 0;
    std::optional<std::int64_t> hi;  // open-ended when unset
    std::string phrase;
};

/// Ordered integer intervals mapped to phrases.
struct BinMap {
    std::vector<Bin> bins;

    const std::string& phrase_for(std::int64_t value) const;
    /// Throws ConfigError unless the bins are ordered, contiguous and cover [min, max].
    void check_covers(std::int64_t min, std::int64_t max) const;
};

enum class PhraseKind { fixed, passthrough, map, bins };

struct Fragment {
    std::string id;
    std::string variable;  // empty for fixed text
    std::string text;      // zero or one "{value}" placeholder
    PhraseKind kind = PhraseKind::passthrough;
    std::map<std::string, std::string> phrases;
    BinMap bins;
};

struct PersonaTemplate {
    std::string name;
    std::vector<Fragment> fragments;
    /// Appended last. May reference render parameters such as "{target}".
    std::string suffix;
};

PersonaTemplate parse_template(const std::string& json_text);
PersonaTemplate load_template(const std::filesystem::path& path);
/// Checks bound variables exist and every phrase map / bin map covers its variable.
void validate_template(const PersonaTemplate& tmpl, const Codebook& codebook);

using RenderParams = std::map<std::string, std::string>;

const std::string& bin_value(const BinMap& bins, std::int64_t value);
/// The phrase a fragment contributes for one record, or nullopt when the value is missing.
std::optional<std::string> render_fragment(const Fragment& fragment, const SurveyDataset& dataset,
                                           const SurveyRecord& record);
std::string render_backstory(const PersonaTemplate& tmpl, const SurveyDataset& dataset,
                             const SurveyRecord& record, const RenderParams& params = {});
/// Replaces "{key}" occurrences; unknown keys are an error.
std::string substitute(const std::string& text, const RenderParams& params);
/// Joins a backstory and a prompt stem with one space, skipping empty parts.
std::string compose_prompt(const std::string& backstory, const std::string& stem);

struct AnswerOption {
    std::string surface;
    std::string code;
};

struct ItemGuard {
    std::string variable;
    std::set<std::string> levels;
    /// Code assigned to the item when the guard fails (e.g. "did not vote").
    std::optional<std::string> otherwise;
};

struct InterviewItem {
    std::string variable;
    std::string question;
    /// Empty for numeric items whose answer is the coded value itself.
    std::vector<AnswerOption> options;
    std::optional<ItemGuard> conditional_on;

    bool numeric() const noexcept { return options.empty(); }
    const AnswerOption* option_for_code(const std::string& code) const;
};

struct InterviewScript {
    std::string name;
    std::vector<InterviewItem> items;
    std::string interviewer = "Interviewer:";
    std::string respondent = "Me:";

    const InterviewItem& item(const std::string& variable) const;
};

InterviewScript parse_script(const std::string& json_text);
InterviewScript load_script(const std::filesystem::path& path);
void validate_script(const InterviewScript& script, const Codebook& codebook);

/// True when the item's guard (if any) is satisfied by the record.
bool item_applies(const InterviewItem& item, const SurveyDataset& dataset, const SurveyRecord& record);

/// Interview transcript with the target question last and an empty answer.
/// Returns nullopt when the target item's guard excludes this record.
std::optional<std::string> render_interview(const InterviewScript& script, const SurveyDataset& dataset,
                                            const SurveyRecord& record, const std::string& target);

struct AblationPolicy {
    bool include_full = true;
    bool include_leave_one_out = true;
    bool include_leave_two_out = true;
    bool include_singletons = true;
    bool include_empty = true;
    std::optional<std::vector<std::pair<std::string, std::string>>> pairs;
};

struct AblationVariant {
    std::string label;
    PersonaTemplate tmpl;
};

AblationPolicy parse_ablation_policy(const std::string& json_text);
std::vector<AblationVariant> ablation_variants(const PersonaTemplate& tmpl, const AblationPolicy& policy);

}  // namespace silicon
