#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "silicon/errors.hpp"

namespace silicon {

class SurveyDataset;
struct InterviewScript;

struct CompletionRequest {
    std::string prompt;
    int max_tokens = 16;
    double temperature = 0.7;
    std::vector<std::string> stop;
    bool want_logprobs = false;
    int top_k = 0;
    /// Sampling seed for deterministic backends; remote APIs ignore it.
    std::uint64_t seed = 0;

    void validate() const;
};

struct Usage {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
};

using TokenLogprobs = std::vector<std::pair<std::string, double>>;

struct CompletionResponse {
    std::string text;
    TokenLogprobs token_logprobs;  // per generated token, when requested
    Usage usage;
};

struct NextTokenDistribution {
    TokenLogprobs logprobs;  // sorted by descending log-probability
    std::string prompt_hash;
    Usage usage;
};

struct BackendDescriptor {
    std::string name;
    std::string kind;  // mock | http | replay | echo
    std::string endpoint;
    std::filesystem::path rules;  // mock rule file
    std::string model;
    double price_per_1k = 0.06;
    std::string parameters;  // parameter-count label, e.g. "175B"
    int top_k = 100;
    int max_attempts = 5;
    int backoff_ms = 500;
    int timeout_ms = 60000;
    std::string replay_of;  // backend name whose cached records a replay backend serves
    double corruption = 0.0;      // echo: probability of a uniformly random answer
    double noncompliance = 0.0;   // echo: probability of an uncodable answer
    bool scale_with_temperature = false;
};

/// Parses a descriptor file. A bare mock rule file (object with "rules") is
/// accepted as a mock descriptor named after the file stem.
BackendDescriptor load_descriptor(const std::filesystem::path& path);
BackendDescriptor parse_descriptor(const std::string& json_text, const std::filesystem::path& base_dir,
                                   const std::string& fallback_name = {});

class Backend {
public:
    virtual ~Backend() = default;
    virtual const std::string& name() const = 0;
    virtual bool supports_logprobs() const { return true; }
    virtual CompletionResponse complete(const CompletionRequest& request) = 0;
    virtual NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) = 0;
    /// Number of requests that reached the underlying service (network calls for HTTP).
    virtual std::size_t calls() const { return 0; }
};

/// Throws CapabilityError when the backend cannot report log-probabilities.
void require_logprobs(const Backend& backend);

/// Lower-case hex SHA-256 of the prompt.
std::string prompt_hash(const std::string& prompt);
/// Whitespace token count used by the local backends.
std::int64_t count_tokens(const std::string& text);

struct MockRule;

/// Deterministic rule-driven backend. First matching rule wins; a default rule is required.
class MockBackend : public Backend {
public:
    MockBackend(std::string name, const std::string& rules_json, std::uint64_t seed = 0);
    static std::unique_ptr<MockBackend> from_file(std::string name, const std::filesystem::path& path);
    ~MockBackend() override;

    const std::string& name() const override { return name_; }
    CompletionResponse complete(const CompletionRequest& request) override;
    NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) override;
    std::size_t calls() const override { return calls_.load(); }

private:
    const MockRule& match(const std::string& prompt) const;

    std::string name_;
    std::vector<MockRule> rules_;
    std::uint64_t seed_;
    bool logprobs_ = true;
    mutable std::atomic<std::size_t> calls_{0};
};

/// Test double wrapping plain callables.
class FunctionBackend : public Backend {
public:
    using CompleteFn = std::function<CompletionResponse(const CompletionRequest&)>;
    using NextTokenFn = std::function<TokenLogprobs(const std::string&)>;

    FunctionBackend(std::string name, CompleteFn complete, NextTokenFn next_token = {});
    const std::string& name() const override { return name_; }
    bool supports_logprobs() const override { return static_cast<bool>(next_token_); }
    CompletionResponse complete(const CompletionRequest& request) override;
    NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) override;
    std::size_t calls() const override { return calls_.load(); }

private:
    std::string name_;
    CompleteFn complete_;
    NextTokenFn next_token_;
    std::atomic<std::size_t> calls_{0};
};

/// Answers each interview prompt with the human respondent's own answer,
/// optionally corrupted at a seeded rate.
class EchoBackend : public Backend {
public:
    EchoBackend(std::string name, const SurveyDataset& dataset, const InterviewScript& script,
                const std::vector<std::string>& targets, double corruption = 0.0, double noncompliance = 0.0,
                bool scale_with_temperature = false);
    const std::string& name() const override { return name_; }
    bool supports_logprobs() const override { return false; }
    CompletionResponse complete(const CompletionRequest& request) override;
    NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) override;
    std::size_t calls() const override { return calls_.load(); }

private:
    struct Entry {
        std::string answer;
        std::vector<std::string> options;
    };
    std::string name_;
    std::unordered_map<std::string, Entry> answers_;
    double corruption_;
    double noncompliance_;
    bool scaled_;
    std::atomic<std::size_t> calls_{0};
};

/// Legacy text-completion HTTP API ("/v1/completions" request/response schema).
class HttpBackend : public Backend {
public:
    /// Reads the key from SILICON_API_KEY; throws ConfigError when it is unset.
    explicit HttpBackend(const BackendDescriptor& descriptor);
    HttpBackend(const BackendDescriptor& descriptor, std::string api_key);
    const std::string& name() const override { return desc_.name; }
    CompletionResponse complete(const CompletionRequest& request) override;
    NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) override;
    std::size_t calls() const override { return calls_.load(); }

private:
    std::string post(const std::string& body);

    BackendDescriptor desc_;
    std::string key_;
    std::string scheme_host_;
    std::string path_;
    std::atomic<std::size_t> calls_{0};
};

class CacheStore;

/// Serves only what a cache already holds, under the recorded backend's name.
class ReplayBackend : public Backend {
public:
    ReplayBackend(std::string recorded_name, std::shared_ptr<CacheStore> store);
    const std::string& name() const override { return name_; }
    CompletionResponse complete(const CompletionRequest& request) override;
    NextTokenDistribution next_token_logprobs(const std::string& prompt, int top_k) override;

private:
    std::string name_;
    std::shared_ptr<CacheStore> store_;
};

struct LedgerSnapshot {
    std::int64_t prompt_tokens = 0;
    std::int64_t completion_tokens = 0;
    std::int64_t queries = 0;
    double price_per_1k = 0.0;
};

/// Thread-safe accumulator of billed usage.
class CostLedger {
public:
    explicit CostLedger(double price_per_1k = 0.06) : price_(price_per_1k) {}
    void add(const Usage& usage);
    LedgerSnapshot snapshot() const;

private:
    std::atomic<std::int64_t> prompt_{0};
    std::atomic<std::int64_t> completion_{0};
    std::atomic<std::int64_t> queries_{0};
    double price_;
};

/// Cost in whole cents: tokens / 1000 x rate, rounded up to the next cent.
std::int64_t estimate_cost_cents(std::int64_t tokens, double price_per_1k);
std::int64_t estimate_cost_cents(const LedgerSnapshot& ledger);
/// "$118.63"
std::string format_dollars(std::int64_t cents);

struct CacheEntry {
    std::string hash;
    std::string request;   // canonical JSON echo
    std::string response;  // JSON
};

/// Append-only JSONL store of {hash, request, response, ts}.
class CacheStore {
public:
    /// Loads and verifies existing records; throws CacheCorruptError naming the bad line.
    explicit CacheStore(std::filesystem::path path);

    std::optional<std::string> lookup(const std::string& hash) const;
    /// Appends unless the hash is already present. Returns false for duplicates.
    bool append(const std::string& hash, const std::string& request_json, const std::string& response_json);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, CacheEntry> entries_;
};

std::string request_echo(const std::string& backend, const CompletionRequest& request);
std::string request_echo_next_token(const std::string& backend, const std::string& prompt, int top_k);
std::string request_hash(const std::string& request_echo_json);

std::string to_json(const CompletionResponse& r);
std::string to_json(const NextTokenDistribution& d);
CompletionResponse completion_from_json(const std::string& json_text);
NextTokenDistribution distribution_from_json(const std::string& json_text);

template <typename T>
struct Fetched {
    T value;
    bool cached = false;
};

/// Backend + optional cache + ledger. Only real fetches reach the ledger.
class LmClient {
public:
    LmClient(std::shared_ptr<Backend> backend, std::shared_ptr<CacheStore> cache, double price_per_1k);

    Fetched<CompletionResponse> complete(const CompletionRequest& request);
    Fetched<NextTokenDistribution> next_token_logprobs(const std::string& prompt, int top_k);

    Backend& backend() noexcept { return *backend_; }
    const CostLedger& ledger() const noexcept { return ledger_; }
    std::size_t cache_hits() const noexcept { return hits_.load(); }
    std::size_t fetches() const noexcept { return fetches_.load(); }

private:
    std::shared_ptr<Backend> backend_;
    std::shared_ptr<CacheStore> cache_;
    CostLedger ledger_;
    std::atomic<std::size_t> hits_{0};
    std::atomic<std::size_t> fetches_{0};
};

/// Wall-clock time as ISO-8601 UTC, pinned by SOURCE_DATE_EPOCH when set.
std::string timestamp_now();

}  // namespace silicon
