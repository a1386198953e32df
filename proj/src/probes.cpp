#include "silicon/probes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "silicon/parallel.hpp"
#include "silicon/text.hpp"

namespace silicon {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

}  // namespace

std::size_t Probe::index_of(const std::string& label) const {
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i].label == label) return i;
    throw ConfigError("probe has no candidate '" + label + "'");
}

Probe parse_probe(const std::string& json_text) {
    Probe p;
    try {
        auto j = nlohmann::ordered_json::parse(json_text);
        p.prompt_suffix = j.value("prompt_suffix", std::string());
        for (auto& c : j.at("candidates")) {
            TokenSet s;
            s.label = c.at("label").get<std::string>();
            s.surfaces = c.at("surfaces").get<std::vector<std::string>>();
            s.auto_variants = c.value("auto_variants", true);
            p.candidates.push_back(std::move(s));
        }
        p.positive = j.value("positive", p.candidates.empty() ? std::string() : p.candidates.front().label);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed probe: ") + e.what());
    }
    validate_probe(p);
    return p;
}

Probe load_probe(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_probe(ss.str());
}

std::set<std::string> expand_variants(const std::string& surface) {
    if (surface.empty()) throw ConfigError("token surface must be nonempty");
    std::set<std::string> out;
    for (const std::string& form : {text::to_lower(surface), text::to_upper(surface), text::to_title(surface)}) {
        out.insert(form);
        out.insert(" " + form);
        out.insert(form + " ");
        out.insert(" " + form + " ");
    }
    return out;
}

std::set<std::string> variant_set(const TokenSet& set) {
    std::set<std::string> out;
    for (auto& s : set.surfaces) {
        if (s.empty()) throw ConfigError("token set '" + set.label + "' contains an empty surface");
        if (set.auto_variants) {
            auto v = expand_variants(s);
            out.insert(v.begin(), v.end());
        } else {
            out.insert(s);
        }
    }
    return out;
}

void validate_probe(const Probe& probe) {
    if (probe.candidates.size() < 2) throw ConfigError("a probe needs at least two candidates");
    std::set<std::string> labels;
    std::unordered_map<std::string, std::string> owner;
    for (auto& c : probe.candidates) {
        if (!labels.insert(c.label).second) throw ConfigError("duplicate candidate label '" + c.label + "'");
        if (c.surfaces.empty()) throw ConfigError("token set '" + c.label + "' is empty");
        for (auto& v : variant_set(c)) {
            auto [it, inserted] = owner.emplace(v, c.label);
            if (!inserted)
                throw ConfigError("token '" + v + "' belongs to both '" + it->second + "' and '" + c.label + "'");
        }
    }
    if (!labels.count(probe.positive)) throw ConfigError("positive label '" + probe.positive + "' is not a candidate");
}

double Collapsed::mass(std::size_t i) const { return std::exp(log_mass[i]); }

Collapsed collapse(const NextTokenDistribution& dist, const Probe& probe) {
    if (dist.logprobs.empty()) throw ValidationError("cannot collapse an empty distribution");
    std::unordered_map<std::string, std::size_t> owner;
    for (std::size_t i = 0; i < probe.candidates.size(); ++i)
        for (auto& v : variant_set(probe.candidates[i])) owner.emplace(v, i);

    Collapsed c;
    c.log_mass.assign(probe.candidates.size(), kNegInf);
    for (auto& cand : probe.candidates) c.labels.push_back(cand.label);
    for (auto& [tok, lp] : dist.logprobs) {
        auto it = owner.find(tok);
        if (it == owner.end()) continue;
        c.log_mass[it->second] = log_add(c.log_mass[it->second], lp);
    }
    double captured = 0;
    for (double lm : c.log_mass) captured += std::exp(lm);
    c.residual = std::clamp(1.0 - captured, 0.0, 1.0);
    return c;
}

CandidateProbabilities normalize(const Collapsed& collapsed) {
    double total = kNegInf;
    for (double lm : collapsed.log_mass) total = log_add(total, lm);
    if (total == kNegInf) throw NoSignalError("no probability mass on any candidate");
    CandidateProbabilities out;
    out.labels = collapsed.labels;
    out.residual = collapsed.residual;
    for (double lm : collapsed.log_mass) out.probs.push_back(lm == kNegInf ? 0.0 : std::exp(lm - total));
    return out;
}

double CandidateProbabilities::at(const std::string& label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return probs[i];
    throw ValidationError("no candidate '" + label + "'");
}

VoteCall dichotomize(double p, double threshold, bool tie_as_positive) {
    if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("probability outside [0, 1]");
    if (p > threshold) return {1, false};
    if (p < threshold) return {0, false};
    if (tie_as_positive) return {1, true};
    return {std::nullopt, true};
}

MarginalEstimate estimate_marginal(const SurveyDataset& dataset, const PersonaTemplate& tmpl, const Probe& probe,
                                   LmClient& client, std::size_t parallelism, int top_k) {
    if (dataset.empty()) throw ValidationError("cannot estimate a marginal over an empty dataset");
    require_logprobs(client.backend());
    MarginalEstimate est;
    est.per_record.resize(dataset.size());
    parallel_for(dataset.size(), parallelism, [&](std::size_t i) {
        const auto& rec = dataset.records()[i];
        std::string prompt = compose_prompt(render_backstory(tmpl, dataset, rec), probe.prompt_suffix);
        auto dist = client.next_token_logprobs(prompt, top_k).value;
        try {
            est.per_record[i] = normalize(collapse(dist, probe));
        } catch (const NoSignalError&) {
        }
    });
    for (auto& c : probe.candidates) est.labels.push_back(c.label);
    est.means.assign(est.labels.size(), 0.0);
    for (auto& r : est.per_record) {
        if (!r) {
            ++est.no_signal;
            continue;
        }
        ++est.with_signal;
        for (std::size_t k = 0; k < r->probs.size(); ++k) est.means[k] += r->probs[k];
    }
    if (est.with_signal == 0) throw NoSignalError("every record returned no signal");
    for (double& m : est.means) m /= static_cast<double>(est.with_signal);
    return est;
}

}  // namespace silicon
