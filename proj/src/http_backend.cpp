#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "silicon/lm_backend.hpp"

namespace silicon {

using json = nlohmann::json;

namespace {

std::string key_from_env() {
    const char* k = std::getenv("SILICON_API_KEY");
    if (!k || !*k) throw ConfigError("SILICON_API_KEY is not set; the HTTP backend needs an API key");
    return k;
}

bool retryable(int status) { return status == 429 || status == 408 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(const BackendDescriptor& descriptor) : HttpBackend(descriptor, key_from_env()) {}

HttpBackend::HttpBackend(const BackendDescriptor& descriptor, std::string api_key)
    : desc_(descriptor), key_(std::move(api_key)) {
    if (key_.empty()) throw ConfigError("HTTP backend needs an API key");
    if (desc_.max_attempts < 1) throw ConfigError("max_attempts must be at least 1");
    auto scheme = desc_.endpoint.find("://");
    if (scheme == std::string::npos) throw ConfigError("endpoint '" + desc_.endpoint + "' lacks a scheme");
    auto slash = desc_.endpoint.find('/', scheme + 3);
    scheme_host_ = desc_.endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/v1/completions" : desc_.endpoint.substr(slash);
}

std::string HttpBackend::post(const std::string& body) {
    std::vector<std::string> log;
    for (int attempt = 1; attempt <= desc_.max_attempts; ++attempt) {
        if (attempt > 1) {
            auto delay = std::chrono::milliseconds(static_cast<long long>(desc_.backoff_ms) << (attempt - 2));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client cli(scheme_host_);
        cli.set_connection_timeout(std::chrono::milliseconds(desc_.timeout_ms));
        cli.set_read_timeout(std::chrono::milliseconds(desc_.timeout_ms));
        cli.set_write_timeout(std::chrono::milliseconds(desc_.timeout_ms));
        httplib::Headers headers{{"Authorization", "Bearer " + key_}};
        ++calls_;
        auto res = cli.Post(path_, headers, body, "application/json");
        if (!res) {
            log.push_back("attempt " + std::to_string(attempt) + ": " + httplib::to_string(res.error()));
            continue;
        }
        if (res->status == 200) return res->body;
        std::string msg = "attempt " + std::to_string(attempt) + ": HTTP " + std::to_string(res->status);
        if (retryable(res->status)) {
            log.push_back(msg);
            continue;
        }
        throw RefusalError("backend '" + desc_.name + "' refused the request (HTTP " + std::to_string(res->status) +
                           "): " + res->body.substr(0, 200));
    }
    std::string joined;
    for (auto& l : log) joined += (joined.empty() ? "" : "; ") + l;
    throw TransportError("backend '" + desc_.name + "' failed after " + std::to_string(desc_.max_attempts) +
                             " attempts: " + joined,
                         std::move(log));
}

CompletionResponse HttpBackend::complete(const CompletionRequest& request) {
    request.validate();
    json body = {{"model", desc_.model},
                 {"prompt", request.prompt},
                 {"max_tokens", request.max_tokens},
                 {"temperature", request.temperature}};
    if (!request.stop.empty()) body["stop"] = request.stop;
    if (request.want_logprobs) body["logprobs"] = request.top_k;
    std::string raw = post(body.dump());
    try {
        auto j = json::parse(raw);
        const json& choice = j.at("choices").at(0);
        if (choice.value("finish_reason", std::string()) == "content_filter")
            throw RefusalError("backend '" + desc_.name + "' filtered the completion");
        CompletionResponse r;
        r.text = choice.at("text").get<std::string>();
        if (auto lp = choice.find("logprobs"); lp != choice.end() && lp->is_object()) {
            const json& toks = lp->at("tokens");
            const json& vals = lp->at("token_logprobs");
            for (std::size_t i = 0; i < toks.size() && i < vals.size(); ++i)
                r.token_logprobs.emplace_back(toks[i].get<std::string>(), vals[i].is_null() ? 0.0 : vals[i].get<double>());
        }
        if (auto u = j.find("usage"); u != j.end()) {
            r.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
            r.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
        }
        return r;
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed completion response: ") + e.what(), {});
    }
}

NextTokenDistribution HttpBackend::next_token_logprobs(const std::string& prompt, int top_k) {
    if (prompt.empty()) throw ValidationError("prompt must be nonempty");
    json body = {{"model", desc_.model},
                 {"prompt", prompt},
                 {"max_tokens", 1},
                 {"temperature", 0},
                 {"logprobs", top_k > 0 ? top_k : desc_.top_k}};
    std::string raw = post(body.dump());
    try {
        auto j = json::parse(raw);
        const json& choice = j.at("choices").at(0);
        const json& top = choice.at("logprobs").at("top_logprobs").at(0);
        NextTokenDistribution d;
        for (auto& [tok, lp] : top.items()) d.logprobs.emplace_back(tok, std::min(0.0, lp.get<double>()));
        std::stable_sort(d.logprobs.begin(), d.logprobs.end(), [](auto& a, auto& b) { return a.second > b.second; });
        d.prompt_hash = prompt_hash(prompt);
        if (auto u = j.find("usage"); u != j.end()) {
            d.usage.prompt_tokens = u->value("prompt_tokens", std::int64_t{0});
            d.usage.completion_tokens = u->value("completion_tokens", std::int64_t{0});
        }
        return d;
    } catch (const json::exception& e) {
        throw TransportError(std::string("malformed log-probability response: ") + e.what(), {});
    }
}

}  // namespace silicon
