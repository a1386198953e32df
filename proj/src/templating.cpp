#include "silicon/templating.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "silicon/text.hpp"

namespace silicon {

using ordered_json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kPlaceholder = "{value}";

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_placeholders(const std::string& text) {
    std::size_t n = 0;
    for (auto pos = text.find(kPlaceholder); pos != std::string::npos; pos = text.find(kPlaceholder, pos + 1)) ++n;
    return n;
}

std::string code_string(const ordered_json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
    throw ConfigError("codes must be strings or integers");
}

std::optional<std::int64_t> as_int(const std::string& s) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

Fragment parse_fragment(const ordered_json& j, std::size_t index) {
    Fragment f;
    f.variable = j.value("variable", std::string());
    f.id = j.value("id", f.variable.empty() ? "fixed" + std::to_string(index) : f.variable);
    f.text = j.value("text", std::string("{value}"));
    std::size_t holes = count_placeholders(f.text);
    if (holes > 1) throw ConfigError("fragment '" + f.id + "' has more than one {value} placeholder");
    if (f.variable.empty()) {
        if (holes) throw ConfigError("fixed fragment '" + f.id + "' cannot contain {value}");
        f.kind = PhraseKind::fixed;
        return f;
    }
    if (auto it = j.find("map"); it != j.end()) {
        f.kind = PhraseKind::map;
        for (auto& [code, phrase] : it->items()) f.phrases[code] = phrase.get<std::string>();
    } else if (auto b = j.find("bins"); b != j.end()) {
        f.kind = PhraseKind::bins;
        for (auto& bin : *b) {
            Bin x;
            x.lo = bin.at("min").get<std::int64_t>();
            if (bin.contains("max") && !bin.at("max").is_null()) x.hi = bin.at("max").get<std::int64_t>();
            x.phrase = bin.at("phrase").get<std::string>();
            f.bins.bins.push_back(std::move(x));
        }
        if (f.bins.bins.empty()) throw ConfigError("fragment '" + f.id + "' has an empty bin list");
        // ordered and contiguous on their own span; the codebook range is checked at validation
        const auto& last = f.bins.bins.back();
        f.bins.check_covers(f.bins.bins.front().lo, last.hi ? *last.hi : last.lo);
    } else {
        f.kind = PhraseKind::passthrough;
    }
    return f;
}

}  // namespace

const std::string& BinMap::phrase_for(std::int64_t value) const {
    for (auto& b : bins)
        if (value >= b.lo && (!b.hi || value <= *b.hi)) return b.phrase;
    throw ValidationError("value " + std::to_string(value) + " falls outside every bin");
}

void BinMap::check_covers(std::int64_t min, std::int64_t max) const {
    if (bins.empty()) throw ConfigError("empty bin map");
    if (bins.front().lo > min) throw ConfigError("bins start at " + std::to_string(bins.front().lo) +
                                                 ", above the declared minimum " + std::to_string(min));
    for (std::size_t i = 0; i < bins.size(); ++i) {
        const Bin& b = bins[i];
        if (b.hi && *b.hi < b.lo) throw ConfigError("bin '" + b.phrase + "' is empty");
        if (i + 1 < bins.size()) {
            if (!b.hi) throw ConfigError("only the last bin may be open-ended");
            if (bins[i + 1].lo != *b.hi + 1)
                throw ConfigError("bins '" + b.phrase + "' and '" + bins[i + 1].phrase + "' leave a gap or overlap");
        }
    }
    if (bins.back().hi && *bins.back().hi < max)
        throw ConfigError("bins end at " + std::to_string(*bins.back().hi) + ", below the declared maximum " +
                          std::to_string(max));
}

const std::string& bin_value(const BinMap& bins, std::int64_t value) { return bins.phrase_for(value); }

PersonaTemplate parse_template(const std::string& json_text) {
    PersonaTemplate t;
    try {
        auto j = ordered_json::parse(json_text);
        t.name = j.value("name", std::string());
        t.suffix = j.value("suffix", std::string());
        std::size_t i = 0;
        for (auto& f : j.at("fragments")) t.fragments.push_back(parse_fragment(f, i++));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed template: ") + e.what());
    }
    std::set<std::string> ids;
    for (auto& f : t.fragments)
        if (!ids.insert(f.id).second) throw ConfigError("duplicate fragment id '" + f.id + "'");
    return t;
}

PersonaTemplate load_template(const std::filesystem::path& path) { return parse_template(read_file(path)); }

void validate_template(const PersonaTemplate& tmpl, const Codebook& codebook) {
    for (auto& f : tmpl.fragments) {
        if (f.kind == PhraseKind::fixed) continue;
        auto idx = codebook.index_of(f.variable);
        if (!idx) throw ConfigError("fragment '" + f.id + "' binds unknown variable '" + f.variable + "'");
        const VariableSpec& spec = codebook[*idx];
        if (f.kind == PhraseKind::map) {
            if (spec.kind == VariableKind::categorical) {
                for (auto& [code, _] : spec.levels)
                    if (!f.phrases.count(code))
                        throw ConfigError("fragment '" + f.id + "' has no phrase for level '" + code + "'");
            }
        } else if (f.kind == PhraseKind::bins) {
            if (spec.kind != VariableKind::integer)
                throw ConfigError("fragment '" + f.id + "' bins a non-integer variable");
            try {
                f.bins.check_covers(spec.min, spec.max);
            } catch (const ConfigError& e) {
                throw ConfigError("fragment '" + f.id + "': " + e.what());
            }
        }
    }
}

std::optional<std::string> render_fragment(const Fragment& f, const SurveyDataset& dataset,
                                           const SurveyRecord& record) {
    if (f.kind == PhraseKind::fixed) return f.text;
    const auto& value = record.values[dataset.codebook().require(f.variable)];
    if (!value) return std::nullopt;
    std::string phrase;
    switch (f.kind) {
        case PhraseKind::passthrough:
            phrase = *value;
            break;
        case PhraseKind::map: {
            auto it = f.phrases.find(*value);
            if (it == f.phrases.end())
                throw ValidationError("fragment '" + f.id + "' has no phrase for code '" + *value + "' (record " +
                                      record.respondent_id + ")");
            phrase = it->second;
            break;
        }
        case PhraseKind::bins: {
            auto n = as_int(*value);
            if (!n) throw ValidationError("fragment '" + f.id + "' needs an integer, got '" + *value + "'");
            try {
                phrase = f.bins.phrase_for(*n);
            } catch (const ValidationError& e) {
                throw ValidationError("fragment '" + f.id + "', record " + record.respondent_id + ": " + e.what());
            }
            break;
        }
        case PhraseKind::fixed:
            break;
    }
    std::string out = f.text;
    auto pos = out.find(kPlaceholder);
    if (pos != std::string::npos) out.replace(pos, kPlaceholder.size(), phrase);
    return out;
}

std::string substitute(const std::string& text, const RenderParams& params) {
    std::string out;
    std::size_t i = 0;
    while (i < text.size()) {
        auto open = text.find('{', i);
        if (open == std::string::npos) break;
        auto close = text.find('}', open);
        if (close == std::string::npos) break;
        std::string key = text.substr(open + 1, close - open - 1);
        auto it = params.find(key);
        if (it == params.end()) throw ValidationError("no value for template parameter '{" + key + "}'");
        out.append(text, i, open - i);
        out += it->second;
        i = close + 1;
    }
    out.append(text, i, std::string::npos);
    return out;
}

std::string compose_prompt(const std::string& backstory, const std::string& stem) {
    if (backstory.empty()) return stem;
    if (stem.empty()) return backstory;
    return backstory + " " + stem;
}

std::string render_backstory(const PersonaTemplate& tmpl, const SurveyDataset& dataset, const SurveyRecord& record,
                             const RenderParams& params) {
    std::vector<std::string> parts;
    for (auto& f : tmpl.fragments)
        if (auto s = render_fragment(f, dataset, record)) parts.push_back(std::move(*s));
    std::string suffix = substitute(tmpl.suffix, params);
    if (!suffix.empty()) parts.push_back(std::move(suffix));
    return text::join(parts, " ");
}

const AnswerOption* InterviewItem::option_for_code(const std::string& code) const {
    for (auto& o : options)
        if (o.code == code) return &o;
    return nullptr;
}

const InterviewItem& InterviewScript::item(const std::string& variable) const {
    const InterviewItem* found = nullptr;
    for (auto& it : items) {
        if (it.variable != variable) continue;
        if (found) throw ConfigError("variable '" + variable + "' is bound by more than one interview item");
        found = &it;
    }
    if (!found) throw ValidationError("interview script has no item for '" + variable + "'");
    return *found;
}

InterviewScript parse_script(const std::string& json_text) {
    InterviewScript s;
    try {
        auto j = ordered_json::parse(json_text);
        s.name = j.value("name", std::string());
        s.interviewer = j.value("interviewer", s.interviewer);
        s.respondent = j.value("respondent", s.respondent);
        for (auto& ji : j.at("items")) {
            InterviewItem item;
            item.variable = ji.at("variable").get<std::string>();
            item.question = ji.at("question").get<std::string>();
            if (auto o = ji.find("options"); o != ji.end()) {
                if (o->is_object()) {
                    for (auto& [surface, code] : o->items()) item.options.push_back({surface, code_string(code)});
                } else {
                    for (auto& opt : *o)
                        item.options.push_back({opt.at("surface").get<std::string>(), code_string(opt.at("code"))});
                }
            }
            if (auto g = ji.find("conditional_on"); g != ji.end()) {
                ItemGuard guard;
                guard.variable = g->at("variable").get<std::string>();
                for (auto& l : g->at("levels")) guard.levels.insert(code_string(l));
                if (g->contains("otherwise")) guard.otherwise = code_string(g->at("otherwise"));
                item.conditional_on = std::move(guard);
            }
            std::set<std::string> seen;
            for (auto& opt : item.options)
                if (!seen.insert(text::to_lower(opt.surface)).second)
                    throw ConfigError("item '" + item.variable + "' repeats answer surface '" + opt.surface + "'");
            s.items.push_back(std::move(item));
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed interview script: ") + e.what());
    }
    std::set<std::string> vars;
    for (auto& it : s.items)
        if (!vars.insert(it.variable).second)
            throw ConfigError("variable '" + it.variable + "' is bound by more than one interview item");
    return s;
}

InterviewScript load_script(const std::filesystem::path& path) { return parse_script(read_file(path)); }

void validate_script(const InterviewScript& script, const Codebook& codebook) {
    for (auto& item : script.items) {
        auto idx = codebook.index_of(item.variable);
        if (!idx) throw ConfigError("interview item binds unknown variable '" + item.variable + "'");
        const VariableSpec& spec = codebook[*idx];
        if (item.numeric()) {
            if (spec.kind == VariableKind::categorical)
                throw ConfigError("categorical item '" + item.variable + "' declares no answer options");
            continue;
        }
        if (item.options.size() < 2) throw ConfigError("item '" + item.variable + "' needs at least two options");
        for (auto& opt : item.options)
            if (!spec.check(opt.code).empty())
                throw ConfigError("item '" + item.variable + "' option '" + opt.surface + "' maps to invalid code '" +
                                  opt.code + "'");
        if (item.conditional_on) {
            if (!codebook.index_of(item.conditional_on->variable))
                throw ConfigError("item '" + item.variable + "' is conditional on unknown variable '" +
                                  item.conditional_on->variable + "'");
            if (item.conditional_on->otherwise && !spec.check(*item.conditional_on->otherwise).empty())
                throw ConfigError("item '" + item.variable + "' has an invalid fallback code");
        }
    }
}

bool item_applies(const InterviewItem& item, const SurveyDataset& dataset, const SurveyRecord& record) {
    if (!item.conditional_on) return true;
    const auto& v = record.values[dataset.codebook().require(item.conditional_on->variable)];
    return v && item.conditional_on->levels.count(*v) > 0;
}

std::optional<std::string> render_interview(const InterviewScript& script, const SurveyDataset& dataset,
                                            const SurveyRecord& record, const std::string& target) {
    const InterviewItem& target_item = script.item(target);
    if (!item_applies(target_item, dataset, record)) return std::nullopt;
    std::vector<std::string> turns;
    for (auto& item : script.items) {
        if (&item == &target_item) continue;
        if (!item_applies(item, dataset, record)) continue;
        const auto& value = record.values[dataset.codebook().require(item.variable)];
        if (!value) continue;
        std::string answer;
        if (item.numeric()) {
            answer = *value;
        } else {
            const AnswerOption* opt = item.option_for_code(*value);
            if (!opt)
                throw ValidationError("item '" + item.variable + "' has no answer surface for code '" + *value +
                                      "' (record " + record.respondent_id + ")");
            answer = opt->surface;
        }
        turns.push_back(script.interviewer + " " + item.question);
        turns.push_back(script.respondent + " " + answer);
    }
    turns.push_back(script.interviewer + " " + target_item.question);
    turns.push_back(script.respondent);
    return text::join(turns, "\n");
}

AblationPolicy parse_ablation_policy(const std::string& json_text) {
    AblationPolicy p;
    try {
        auto j = nlohmann::json::parse(json_text);
        p.include_full = j.value("full", true);
        p.include_leave_one_out = j.value("leave_one_out", true);
        p.include_leave_two_out = j.value("leave_two_out", true);
        p.include_singletons = j.value("singletons", true);
        p.include_empty = j.value("empty", true);
        if (auto it = j.find("pairs"); it != j.end()) {
            std::vector<std::pair<std::string, std::string>> pairs;
            for (auto& pr : *it) pairs.emplace_back(pr.at(0).get<std::string>(), pr.at(1).get<std::string>());
            p.pairs = std::move(pairs);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed ablation policy: ") + e.what());
    }
    return p;
}

std::vector<AblationVariant> ablation_variants(const PersonaTemplate& tmpl, const AblationPolicy& policy) {
    const auto& frags = tmpl.fragments;
    if (frags.empty()) throw ConfigError("ablation needs at least one fragment");
    if (!policy.include_full && !policy.include_leave_one_out && !policy.include_leave_two_out &&
        !policy.include_singletons && !policy.include_empty)
        throw ConfigError("ablation policy selects no variants");

    auto keep = [&](const std::string& label, auto pred) {
        AblationVariant v{label, tmpl};
        v.tmpl.fragments.clear();
        for (std::size_t i = 0; i < frags.size(); ++i)
            if (pred(i)) v.tmpl.fragments.push_back(frags[i]);
        v.tmpl.name = tmpl.name.empty() ? label : tmpl.name + "/" + label;
        return v;
    };
    auto index_of = [&](const std::string& id) {
        for (std::size_t i = 0; i < frags.size(); ++i)
            if (frags[i].id == id) return i;
        throw ConfigError("ablation pair references unknown fragment '" + id + "'");
    };

    std::vector<AblationVariant> out;
    if (policy.include_full) out.push_back(keep("full", [](std::size_t) { return true; }));
    if (policy.include_leave_one_out)
        for (std::size_t i = 0; i < frags.size(); ++i)
            out.push_back(keep("without:" + frags[i].id, [i](std::size_t k) { return k != i; }));
    if (policy.include_leave_two_out) {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        if (policy.pairs) {
            for (auto& [a, b] : *policy.pairs) {
                std::size_t i = index_of(a), j = index_of(b);
                if (i == j) throw ConfigError("ablation pair repeats fragment '" + a + "'");
                pairs.emplace_back(std::min(i, j), std::max(i, j));
            }
        } else {
            for (std::size_t i = 0; i < frags.size(); ++i)
                for (std::size_t j = i + 1; j < frags.size(); ++j) pairs.emplace_back(i, j);
        }
        for (auto [i, j] : pairs)
            out.push_back(keep("without:" + frags[i].id + "+" + frags[j].id,
                               [i = i, j = j](std::size_t k) { return k != i && k != j; }));
    }
    if (policy.include_singletons)
        for (std::size_t i = 0; i < frags.size(); ++i)
            out.push_back(keep("only:" + frags[i].id, [i](std::size_t k) { return k == i; }));
    if (policy.include_empty) out.push_back(keep("none", [](std::size_t) { return false; }));

    std::set<std::string> labels;
    for (auto& v : out)
        if (!labels.insert(v.label).second) throw ConfigError("duplicate ablation variant '" + v.label + "'");
    return out;
}

}  // namespace silicon
