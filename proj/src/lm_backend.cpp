#include "silicon/lm_backend.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include <json.hpp>

#include "silicon/survey_data.hpp"
#include "silicon/templating.hpp"
#include "silicon/text.hpp"

namespace silicon {

using json = nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorCode::io, "SHA-256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xF];
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s, std::uint64_t h = 1469598103934665603ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Uniform in [0, 1) from a key; `stream` selects independent draws.
double unit(std::uint64_t key, std::uint64_t stream = 0) {
    return static_cast<double>(splitmix(key ^ splitmix(stream + 1)) >> 11) * 0x1.0p-53;
}

std::uint64_t sample_key(std::uint64_t seed, const CompletionRequest& r) {
    std::uint64_t h = fnv1a(r.prompt, splitmix(seed ^ r.seed));
    h = fnv1a(text::shortest(r.temperature), h);
    return h;
}

/// Index drawn from weights sharpened by temperature (w^(1/T)); T = 0 is argmax.
std::size_t draw(const std::vector<double>& weights, double temperature, double u) {
    if (weights.empty()) throw ConfigError("cannot sample from an empty set");
    if (temperature <= 0.0) return static_cast<std::size_t>(std::max_element(weights.begin(), weights.end()) - weights.begin());
    double wmax = *std::max_element(weights.begin(), weights.end());
    std::vector<double> adj(weights.size());
    double total = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        adj[i] = weights[i] > 0 ? std::exp(std::log(weights[i] / wmax) / temperature) : 0.0;
        total += adj[i];
    }
    double target = u * total, acc = 0;
    for (std::size_t i = 0; i < adj.size(); ++i) {
        acc += adj[i];
        if (target < acc) return i;
    }
    return adj.size() - 1;
}

std::string first_tokens(const std::string& s, int max_tokens) {
    int n = 0;
    std::size_t pos = 0, end = 0;
    // keep original spacing up to the end of the max_tokens-th token
    while (n < max_tokens) {
        pos = s.find_first_not_of(" \t\n\r\f\v", end);
        if (pos == std::string::npos) break;
        end = s.find_first_of(" \t\n\r\f\v", pos);
        if (end == std::string::npos) end = s.size();
        ++n;
    }
    if (n < max_tokens) return s;
    return s.substr(0, end);
}

std::string apply_stops(std::string s, const std::vector<std::string>& stops) {
    std::size_t cut = s.size();
    for (auto& st : stops) {
        if (st.empty()) continue;
        auto p = s.find(st);
        if (p != std::string::npos) cut = std::min(cut, p);
    }
    s.resize(cut);
    return s;
}

TokenLogprobs sorted_truncated(TokenLogprobs lp, int top_k) {
    std::stable_sort(lp.begin(), lp.end(), [](auto& a, auto& b) { return a.second > b.second; });
    if (top_k > 0 && lp.size() > static_cast<std::size_t>(top_k)) lp.resize(static_cast<std::size_t>(top_k));
    return lp;
}

json usage_json(const Usage& u) { return {{"prompt_tokens", u.prompt_tokens}, {"completion_tokens", u.completion_tokens}}; }

Usage usage_from(const json& j) {
    Usage u;
    if (j.is_object()) {
        u.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
        u.completion_tokens = j.value("completion_tokens", std::int64_t{0});
    }
    return u;
}

json pairs_json(const TokenLogprobs& lp) {
    json a = json::array();
    for (auto& [t, v] : lp) a.push_back(json::array({t, v}));
    return a;
}

TokenLogprobs pairs_from(const json& j) {
    TokenLogprobs lp;
    for (auto& p : j) lp.emplace_back(p.at(0).get<std::string>(), p.at(1).get<double>());
    return lp;
}

}  // namespace

void CompletionRequest::validate() const {
    if (prompt.empty()) throw ValidationError("prompt must be nonempty");
    if (max_tokens < 1) throw ValidationError("max_tokens must be at least 1");
    if (!(temperature >= 0.0)) throw ValidationError("temperature must be non-negative");
}

std::string prompt_hash(const std::string& prompt) { return sha256_hex(prompt); }

std::int64_t count_tokens(const std::string& s) { return static_cast<std::int64_t>(text::count_words(s)); }

void require_logprobs(const Backend& backend) {
    if (!backend.supports_logprobs())
        throw CapabilityError("backend '" + backend.name() + "' cannot report next-token log-probabilities");
}

// ---------------------------------------------------------------- descriptors

BackendDescriptor parse_descriptor(const std::string& json_text, const std::filesystem::path& base_dir,
                                   const std::string& fallback_name) {
    BackendDescriptor d;
    try {
        auto j = json::parse(json_text);
        d.name = j.value("name", fallback_name);
        d.kind = j.value("kind", std::string(j.contains("rules") ? "mock" : ""));
        d.endpoint = j.value("endpoint", std::string());
        if (auto r = j.find("rules"); r != j.end() && r->is_string()) {
            std::filesystem::path p = r->get<std::string>();
            d.rules = p.is_absolute() ? p : base_dir / p;
        }
        d.model = j.value("model", std::string());
        d.price_per_1k = j.value("price_per_1k", 0.06);
        d.parameters = j.value("parameters", std::string());
        d.top_k = j.value("top_k", 100);
        d.max_attempts = j.value("max_attempts", 5);
        d.backoff_ms = j.value("backoff_ms", 500);
        d.timeout_ms = j.value("timeout_ms", 60000);
        d.replay_of = j.value("replay_of", std::string());
        d.corruption = j.value("corruption", 0.0);
        d.noncompliance = j.value("noncompliance", 0.0);
        d.scale_with_temperature = j.value("scale_with_temperature", false);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed backend descriptor: ") + e.what());
    }
    static const std::set<std::string> kinds{"mock", "http", "replay", "echo"};
    if (!kinds.count(d.kind)) throw ConfigError("unknown backend kind '" + d.kind + "'");
    if (d.name.empty()) throw ConfigError("backend descriptor needs a name");
    if (d.price_per_1k < 0) throw ConfigError("price must be non-negative");
    if (d.kind == "mock" && d.rules.empty()) throw ConfigError("mock backend '" + d.name + "' needs a rule file");
    if (d.kind == "http" && d.endpoint.empty()) throw ConfigError("http backend '" + d.name + "' needs an endpoint");
    if (d.kind == "replay" && d.replay_of.empty()) d.replay_of = d.name;
    if (d.corruption < 0 || d.noncompliance < 0 || d.corruption + d.noncompliance > 1)
        throw ConfigError("echo corruption rates must lie in [0, 1]");
    return d;
}

BackendDescriptor load_descriptor(const std::filesystem::path& path) {
    std::string body = read_file(path);
    json j;
    try {
        j = json::parse(body);
    } catch (const json::exception& e) {
        throw ConfigError("backend file " + path.string() + " is not valid JSON: " + e.what());
    }
    if (j.is_object() && j.contains("rules") && j["rules"].is_array()) {
        BackendDescriptor d;
        d.name = j.value("name", path.stem().string());
        d.kind = "mock";
        d.rules = path;
        d.model = j.value("model", std::string("mock"));
        d.price_per_1k = j.value("price_per_1k", 0.06);
        d.parameters = j.value("parameters", std::string());
        return d;
    }
    return parse_descriptor(body, path.parent_path(), path.stem().string());
}

// ---------------------------------------------------------------- mock

struct MockRule {
    enum class Match { always, contains, contains_all, regex };
    enum class Output { text, texts, distribution, noisy_binary };

    Match match = Match::always;
    std::vector<std::string> needles;
    std::regex re;
    bool is_default = false;

    Output output = Output::text;
    std::string text;
    std::vector<std::string> texts;
    std::vector<double> weights;
    TokenLogprobs dist;
    std::string token_a, token_b;
    double center = 0.5, spread = 0.0;

    bool matches(const std::string& prompt) const {
        switch (match) {
            case Match::always: return true;
            case Match::contains: return prompt.find(needles[0]) != std::string::npos;
            case Match::contains_all:
                return std::all_of(needles.begin(), needles.end(),
                                   [&](const std::string& n) { return prompt.find(n) != std::string::npos; });
            case Match::regex: return std::regex_search(prompt, re);
        }
        return false;
    }
};

namespace {

MockRule parse_rule(const json& j) {
    MockRule r;
    r.is_default = j.value("default", false);
    if (auto w = j.find("when"); w != j.end()) {
        if (w->contains("contains")) {
            r.match = MockRule::Match::contains;
            r.needles = {w->at("contains").get<std::string>()};
        } else if (w->contains("contains_all")) {
            r.match = MockRule::Match::contains_all;
            r.needles = w->at("contains_all").get<std::vector<std::string>>();
        } else if (w->contains("regex")) {
            r.match = MockRule::Match::regex;
            try {
                r.re = std::regex(w->at("regex").get<std::string>(), std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw ConfigError(std::string("bad mock regex: ") + e.what());
            }
        } else {
            throw ConfigError("mock rule predicate needs contains, contains_all or regex");
        }
    } else if (!r.is_default) {
        throw ConfigError("mock rule without a predicate must be marked default");
    }
    if (j.contains("text")) {
        r.output = MockRule::Output::text;
        r.text = j.at("text").get<std::string>();
    } else if (j.contains("texts")) {
        r.output = MockRule::Output::texts;
        for (auto& t : j.at("texts")) {
            if (t.is_string()) {
                r.texts.push_back(t.get<std::string>());
                r.weights.push_back(1.0);
            } else {
                r.texts.push_back(t.at("text").get<std::string>());
                r.weights.push_back(t.value("weight", 1.0));
            }
        }
        if (r.texts.empty()) throw ConfigError("mock rule lists no texts");
    } else if (j.contains("probabilities")) {
        r.output = MockRule::Output::distribution;
        for (auto& [tok, p] : j.at("probabilities").items()) {
            double v = p.get<double>();
            if (v < 0 || v > 1) throw ConfigError("mock probability outside [0, 1]");
            if (v > 0) r.dist.emplace_back(tok, std::log(v));
        }
    } else if (j.contains("logprobs")) {
        r.output = MockRule::Output::distribution;
        for (auto& [tok, lp] : j.at("logprobs").items()) {
            double v = lp.get<double>();
            if (v > 0) throw ConfigError("mock log-probability above 0");
            r.dist.emplace_back(tok, v);
        }
    } else if (j.contains("noisy_binary")) {
        r.output = MockRule::Output::noisy_binary;
        const json& nb = j.at("noisy_binary");
        auto toks = nb.at("tokens").get<std::vector<std::string>>();
        if (toks.size() != 2) throw ConfigError("noisy_binary needs exactly two tokens");
        r.token_a = toks[0];
        r.token_b = toks[1];
        r.center = nb.value("center", 0.5);
        r.spread = nb.value("spread", 0.1);
    } else {
        throw ConfigError("mock rule needs text, texts, probabilities, logprobs or noisy_binary");
    }
    return r;
}

TokenLogprobs rule_distribution(const MockRule& r, const std::string& prompt, std::uint64_t seed) {
    switch (r.output) {
        case MockRule::Output::distribution:
            return r.dist;
        case MockRule::Output::noisy_binary: {
            double u = unit(fnv1a(prompt, splitmix(seed)), 17);
            double p = std::clamp(r.center + r.spread * (2.0 * u - 1.0), 1e-6, 1.0 - 1e-6);
            return {{r.token_a, std::log(p)}, {r.token_b, std::log1p(-p)}};
        }
        case MockRule::Output::text: {
            auto pos = r.text.find_first_not_of(" ");
            auto end = r.text.find_first_of(" \n", pos == std::string::npos ? 0 : pos);
            std::string tok = r.text.substr(0, end);
            return {{tok, 0.0}};
        }
        case MockRule::Output::texts: {
            double total = 0;
            for (double w : r.weights) total += w;
            TokenLogprobs lp;
            for (std::size_t i = 0; i < r.texts.size(); ++i)
                if (r.weights[i] > 0) lp.emplace_back(r.texts[i], std::log(r.weights[i] / total));
            return lp;
        }
    }
    return {};
}

}  // namespace

MockBackend::MockBackend(std::string name, const std::string& rules_json, std::uint64_t seed)
    : name_(std::move(name)), seed_(seed) {
    try {
        auto j = json::parse(rules_json);
        const json& rules = j.is_object() ? j.at("rules") : j;
        if (j.is_object()) {
            seed_ ^= j.value("seed", std::uint64_t{0});
            logprobs_ = j.value("logprobs", true);
        }
        for (auto& r : rules) rules_.push_back(parse_rule(r));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("malformed mock rule file: ") + e.what());
    }
    std::size_t defaults = 0;
    for (std::size_t i = 0; i < rules_.size(); ++i) {
        if (!rules_[i].is_default) continue;
        ++defaults;
        if (i + 1 != rules_.size()) throw ConfigError("the default mock rule must come last");
    }
    if (defaults != 1) throw ConfigError("mock rule file needs exactly one default rule");
}

MockBackend::~MockBackend() = default;

std::unique_ptr<MockBackend> MockBackend::from_file(std::string name, const std::filesystem::path& path) {
    return std::make_unique<MockBackend>(std::move(name), read_file(path));
}

const MockRule& MockBackend::match(const std::string& prompt) const {
    for (auto& r : rules_)
        if (r.is_default || r.matches(prompt)) return r;
    return rules_.back();
}

CompletionResponse MockBackend::complete(const CompletionRequest& request) {
    request.validate();
    ++calls_;
    const MockRule& r = match(request.prompt);
    std::uint64_t key = sample_key(seed_, request);
    std::string text;
    switch (r.output) {
        case MockRule::Output::text:
            text = r.text;
            break;
        case MockRule::Output::texts:
            text = r.texts[draw(r.weights, request.temperature, unit(key, 1))];
            break;
        case MockRule::Output::distribution:
        case MockRule::Output::noisy_binary: {
            TokenLogprobs d = rule_distribution(r, request.prompt, seed_);
            std::vector<double> w;
            for (auto& [_, lp] : d) w.push_back(std::exp(lp));
            text = " " + d[draw(w, request.temperature, unit(key, 2))].first;
            break;
        }
    }
    text = apply_stops(first_tokens(text, request.max_tokens), request.stop);
    CompletionResponse resp;
    resp.text = text;
    resp.usage = {count_tokens(request.prompt), count_tokens(text)};
    if (request.want_logprobs) {
        std::istringstream in(text);
        std::string tok;
        while (in >> tok) resp.token_logprobs.emplace_back(tok, 0.0);
    }
    return resp;
}

NextTokenDistribution MockBackend::next_token_logprobs(const std::string& prompt, int top_k) {
    if (prompt.empty()) throw ValidationError("prompt must be nonempty");
    if (!logprobs_) throw CapabilityError("backend '" + name_ + "' cannot report next-token log-probabilities");
    ++calls_;
    NextTokenDistribution d;
    d.logprobs = sorted_truncated(rule_distribution(match(prompt), prompt, seed_), top_k);
    d.prompt_hash = prompt_hash(prompt);
    d.usage = {count_tokens(prompt), 1};
    return d;
}

// ---------------------------------------------------------------- function

FunctionBackend::FunctionBackend(std::string name, CompleteFn complete, NextTokenFn next_token)
    : name_(std::move(name)), complete_(std::move(complete)), next_token_(std::move(next_token)) {}

CompletionResponse FunctionBackend::complete(const CompletionRequest& request) {
    request.validate();
    ++calls_;
    if (!complete_) throw CapabilityError("backend '" + name_ + "' cannot complete text");
    return complete_(request);
}

NextTokenDistribution FunctionBackend::next_token_logprobs(const std::string& prompt, int top_k) {
    if (prompt.empty()) throw ValidationError("prompt must be nonempty");
    require_logprobs(*this);
    ++calls_;
    NextTokenDistribution d;
    d.logprobs = sorted_truncated(next_token_(prompt), top_k);
    d.prompt_hash = prompt_hash(prompt);
    d.usage = {count_tokens(prompt), 1};
    return d;
}

// ---------------------------------------------------------------- echo

EchoBackend::EchoBackend(std::string name, const SurveyDataset& dataset, const InterviewScript& script,
                         const std::vector<std::string>& targets, double corruption, double noncompliance,
                         bool scale_with_temperature)
    : name_(std::move(name)), corruption_(corruption), noncompliance_(noncompliance), scaled_(scale_with_temperature) {
    for (auto& target : targets) {
        const InterviewItem& item = script.item(target);
        std::size_t idx = dataset.codebook().require(target);
        std::vector<std::string> options;
        if (item.numeric()) {
            std::set<std::string> seen;
            for (auto& r : dataset.records())
                if (r.values[idx] && seen.insert(*r.values[idx]).second) options.push_back(*r.values[idx]);
        } else {
            for (auto& o : item.options) options.push_back(o.surface);
        }
        for (auto& r : dataset.records()) {
            auto prompt = render_interview(script, dataset, r, target);
            if (!prompt) continue;
            std::string answer;
            if (const auto& v = r.values[idx]) {
                if (item.numeric()) {
                    answer = *v;
                } else if (const AnswerOption* o = item.option_for_code(*v)) {
                    answer = o->surface;
                }
            }
            auto [it, inserted] = answers_.emplace(*prompt, Entry{answer, options});
            if (!inserted && it->second.answer != answer)
                throw ConfigError("echo backend: respondents share an interview prompt for '" + target +
                                  "' but answered differently (record " + r.respondent_id + ")");
        }
    }
}

CompletionResponse EchoBackend::complete(const CompletionRequest& request) {
    request.validate();
    ++calls_;
    auto it = answers_.find(request.prompt);
    if (it == answers_.end()) throw RefusalError("echo backend '" + name_ + "' has no answer for this prompt");
    const Entry& e = it->second;
    double scale = scaled_ ? request.temperature : 1.0;
    double nc = std::min(1.0, noncompliance_ * scale);
    double cr = std::min(1.0 - nc, corruption_ * scale);
    std::uint64_t key = sample_key(0, request);
    double u = unit(key, 3);
    std::string answer = e.answer;
    if (u < nc) {
        answer = "I'd rather not say";
    } else if (u < nc + cr && !e.options.empty()) {
        auto k = static_cast<std::size_t>(unit(key, 4) * static_cast<double>(e.options.size()));
        answer = e.options[std::min(k, e.options.size() - 1)];
    }
    CompletionResponse resp;
    resp.text = apply_stops(first_tokens(" " + answer + "\n", request.max_tokens), request.stop);
    resp.usage = {count_tokens(request.prompt), count_tokens(resp.text)};
    return resp;
}

NextTokenDistribution EchoBackend::next_token_logprobs(const std::string&, int) {
    throw CapabilityError("echo backend '" + name_ + "' cannot report next-token log-probabilities");
}

// ---------------------------------------------------------------- replay

ReplayBackend::ReplayBackend(std::string recorded_name, std::shared_ptr<CacheStore> store)
    : name_(std::move(recorded_name)), store_(std::move(store)) {
    if (!store_) throw ConfigError("replay backend needs a cache store");
}

CompletionResponse ReplayBackend::complete(const CompletionRequest& request) {
    auto hit = store_->lookup(request_hash(request_echo(name_, request)));
    if (!hit) throw ReplayMissError("replay cache has no completion for this request");
    return completion_from_json(*hit);
}

NextTokenDistribution ReplayBackend::next_token_logprobs(const std::string& prompt, int top_k) {
    auto hit = store_->lookup(request_hash(request_echo_next_token(name_, prompt, top_k)));
    if (!hit) throw ReplayMissError("replay cache has no distribution for this prompt");
    return distribution_from_json(*hit);
}

// ---------------------------------------------------------------- ledger / cost

void CostLedger::add(const Usage& usage) {
    prompt_ += usage.prompt_tokens;
    completion_ += usage.completion_tokens;
    ++queries_;
}

LedgerSnapshot CostLedger::snapshot() const { return {prompt_.load(), completion_.load(), queries_.load(), price_}; }

std::int64_t estimate_cost_cents(std::int64_t tokens, double price_per_1k) {
    if (tokens < 0 || price_per_1k < 0) throw ValidationError("tokens and price must be non-negative");
    // price in millionths of a dollar per 1000 tokens; 1 cent = 10^4 micro-dollars, /1000 tokens
    const std::int64_t rate = std::llround(price_per_1k * 1e6);
    const std::int64_t scaled = tokens * rate;
    constexpr std::int64_t denom = 10'000'000;
    return scaled / denom + (scaled % denom != 0 ? 1 : 0);
}

std::int64_t estimate_cost_cents(const LedgerSnapshot& l) {
    return estimate_cost_cents(l.prompt_tokens + l.completion_tokens, l.price_per_1k);
}

std::string format_dollars(std::int64_t cents) {
    std::string frac = std::to_string(cents % 100);
    if (frac.size() < 2) frac.insert(frac.begin(), '0');
    return "$" + std::to_string(cents / 100) + "." + frac;
}

// ---------------------------------------------------------------- JSON codec

std::string request_echo(const std::string& backend, const CompletionRequest& r) {
    json j = {{"backend", backend},
              {"kind", "complete"},
              {"prompt", r.prompt},
              {"max_tokens", r.max_tokens},
              {"temperature", r.temperature},
              {"stop", r.stop},
              {"logprobs", r.want_logprobs ? r.top_k : 0},
              {"seed", r.seed}};
    return j.dump();
}

std::string request_echo_next_token(const std::string& backend, const std::string& prompt, int top_k) {
    json j = {{"backend", backend}, {"kind", "next_token"}, {"prompt", prompt}, {"top_k", top_k}};
    return j.dump();
}

std::string request_hash(const std::string& echo) { return sha256_hex(echo); }

std::string to_json(const CompletionResponse& r) {
    json j = {{"text", r.text}, {"token_logprobs", pairs_json(r.token_logprobs)}, {"usage", usage_json(r.usage)}};
    return j.dump();
}

std::string to_json(const NextTokenDistribution& d) {
    json j = {{"logprobs", pairs_json(d.logprobs)}, {"prompt_hash", d.prompt_hash}, {"usage", usage_json(d.usage)}};
    return j.dump();
}

CompletionResponse completion_from_json(const std::string& s) {
    auto j = json::parse(s);
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    if (j.contains("token_logprobs")) r.token_logprobs = pairs_from(j.at("token_logprobs"));
    r.usage = usage_from(j.value("usage", json::object()));
    return r;
}

NextTokenDistribution distribution_from_json(const std::string& s) {
    auto j = json::parse(s);
    NextTokenDistribution d;
    d.logprobs = pairs_from(j.at("logprobs"));
    d.prompt_hash = j.value("prompt_hash", std::string());
    d.usage = usage_from(j.value("usage", json::object()));
    return d;
}

// ---------------------------------------------------------------- cache

CacheStore::CacheStore(std::filesystem::path path) : path_(std::move(path)) {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception&) {
            throw CacheCorruptError("cache " + path_.string() + ": line " + std::to_string(lineno) + " is not JSON",
                                    lineno);
        }
        if (!j.is_object() || !j.contains("hash") || !j.contains("request") || !j.contains("response") ||
            !j["hash"].is_string())
            throw CacheCorruptError("cache " + path_.string() + ": line " + std::to_string(lineno) +
                                        " lacks hash/request/response",
                                    lineno);
        CacheEntry e{j["hash"].get<std::string>(), j["request"].dump(), j["response"].dump()};
        if (request_hash(e.request) != e.hash)
            throw CacheCorruptError("cache " + path_.string() + ": hash mismatch at line " + std::to_string(lineno),
                                    lineno);
        auto [it, inserted] = entries_.emplace(e.hash, e);
        if (!inserted && it->second.request != e.request)
            throw CacheCorruptError("cache " + path_.string() + ": hash collision at line " + std::to_string(lineno),
                                    lineno);
    }
}

std::optional<std::string> CacheStore::lookup(const std::string& hash) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(hash);
    if (it == entries_.end()) return std::nullopt;
    return it->second.response;
}

bool CacheStore::append(const std::string& hash, const std::string& request_json, const std::string& response_json) {
    std::lock_guard lock(mu_);
    if (entries_.count(hash)) return false;
    json rec = {{"hash", hash},
                {"request", json::parse(request_json)},
                {"response", json::parse(response_json)},
                {"ts", timestamp_now()}};
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot append to cache " + path_.string());
    out << rec.dump() << '\n';
    out.flush();
    if (!out) throw IoError("write to cache " + path_.string() + " failed");
    entries_.emplace(hash, CacheEntry{hash, rec["request"].dump(), rec["response"].dump()});
    return true;
}

std::size_t CacheStore::size() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

// ---------------------------------------------------------------- client

LmClient::LmClient(std::shared_ptr<Backend> backend, std::shared_ptr<CacheStore> cache, double price_per_1k)
    : backend_(std::move(backend)), cache_(std::move(cache)), ledger_(price_per_1k) {
    if (!backend_) throw ConfigError("client needs a backend");
}

Fetched<CompletionResponse> LmClient::complete(const CompletionRequest& request) {
    request.validate();
    std::string echo = request_echo(backend_->name(), request);
    std::string hash = request_hash(echo);
    if (cache_) {
        if (auto hit = cache_->lookup(hash)) {
            ++hits_;
            return {completion_from_json(*hit), true};
        }
    }
    CompletionResponse resp = backend_->complete(request);
    ++fetches_;
    ledger_.add(resp.usage);
    if (cache_) cache_->append(hash, echo, to_json(resp));
    return {std::move(resp), false};
}

Fetched<NextTokenDistribution> LmClient::next_token_logprobs(const std::string& prompt, int top_k) {
    if (prompt.empty()) throw ValidationError("prompt must be nonempty");
    std::string echo = request_echo_next_token(backend_->name(), prompt, top_k);
    std::string hash = request_hash(echo);
    if (cache_) {
        if (auto hit = cache_->lookup(hash)) {
            ++hits_;
            return {distribution_from_json(*hit), true};
        }
    }
    NextTokenDistribution d = backend_->next_token_logprobs(prompt, top_k);
    ++fetches_;
    ledger_.add(d.usage);
    if (cache_) cache_->append(hash, echo, to_json(d));
    return {std::move(d), false};
}

std::string timestamp_now() {
    std::time_t t;
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
        t = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
    } else {
        t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace silicon
