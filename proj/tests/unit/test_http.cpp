#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>
#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "silicon/lm_backend.hpp"

using namespace silicon;
using json = nlohmann::json;

namespace {

// local completions server scripted by a list of status codes, then 200 forever
class FakeApi {
public:
    explicit FakeApi(std::vector<int> statuses) : statuses_(std::move(statuses)) {
        server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
            std::size_t n = hits_++;
            last_auth_ = req.get_header_value("Authorization");
            last_body_ = req.body;
            if (n < statuses_.size() && statuses_[n] != 200) {
                res.status = statuses_[n];
                res.set_content(R"({"error": "nope"})", "application/json");
                return;
            }
            json out = {{"choices", {{{"text", " Trump"},
                                      {"finish_reason", "length"},
                                      {"logprobs", {{"tokens", {" Trump"}},
                                                    {"token_logprobs", {-0.2}},
                                                    {"top_logprobs", {{{" Trump", -0.2}, {" Clinton", -1.8}}}}}}}}},
                        {"usage", {{"prompt_tokens", 12}, {"completion_tokens", 1}}}};
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~FakeApi() {
        server_.stop();
        thread_.join();
    }

    BackendDescriptor descriptor(int attempts = 4) const {
        BackendDescriptor d;
        d.name = "fake";
        d.kind = "http";
        d.endpoint = "http://127.0.0.1:" + std::to_string(port_) + "/v1/completions";
        d.model = "davinci";
        d.max_attempts = attempts;
        d.backoff_ms = 1;
        d.timeout_ms = 5000;
        return d;
    }
    std::size_t hits() const { return hits_.load(); }
    const std::string& auth() const { return last_auth_; }
    const std::string& body() const { return last_body_; }

private:
    httplib::Server server_;
    std::vector<int> statuses_;
    std::atomic<std::size_t> hits_{0};
    std::string last_auth_, last_body_;
    int port_ = 0;
    std::thread thread_;
};

CompletionRequest req() {
    CompletionRequest r;
    r.prompt = "In 2016, I voted for";
    r.max_tokens = 1;
    r.temperature = 0;
    return r;
}

}  // namespace

TEST_SUITE("http") {
    TEST_CASE("retries transient failures and bills one query") {
        FakeApi api({429, 500});
        auto backend = std::make_shared<HttpBackend>(api.descriptor(), "sk-test");
        LmClient client(backend, nullptr, 0.06);
        auto r = client.complete(req());
        CHECK(r.value.text == " Trump");
        CHECK(api.hits() == 3);
        CHECK(backend->calls() == 3);
        CHECK(api.auth() == "Bearer sk-test");
        auto l = client.ledger().snapshot();
        CHECK(l.queries == 1);
        CHECK(l.prompt_tokens == 12);
        CHECK(l.completion_tokens == 1);
        auto sent = json::parse(api.body());
        CHECK(sent["model"] == "davinci");
        CHECK(sent["max_tokens"] == 1);
    }

    TEST_CASE("next-token distribution comes from top_logprobs") {
        FakeApi api({});
        HttpBackend backend(api.descriptor(), "sk-test");
        auto d = backend.next_token_logprobs("In 2016, I voted for", 5);
        REQUIRE(d.logprobs.size() == 2);
        CHECK(d.logprobs[0].first == " Trump");
        CHECK(d.logprobs[1].second == doctest::Approx(-1.8));
        CHECK(json::parse(api.body())["logprobs"] == 5);
    }

    TEST_CASE("client errors are refusals and are not retried") {
        FakeApi api({400});
        HttpBackend backend(api.descriptor(), "sk-test");
        CHECK_THROWS_AS(backend.complete(req()), RefusalError);
        CHECK(api.hits() == 1);
    }

    TEST_CASE("persistent server errors exhaust the attempts") {
        FakeApi api({500, 500, 500, 500, 500});
        HttpBackend backend(api.descriptor(3), "sk-test");
        try {
            backend.complete(req());
            FAIL("expected a transport error");
        } catch (const TransportError& e) {
            CHECK(e.attempts().size() == 3);
            CHECK(e.attempts()[2].find("HTTP 500") != std::string::npos);
        }
        CHECK(api.hits() == 3);
    }

    TEST_CASE("unreachable endpoint is a transport error") {
        BackendDescriptor d;
        d.name = "dead";
        d.endpoint = "http://127.0.0.1:1/v1/completions";
        d.max_attempts = 2;
        d.backoff_ms = 1;
        d.timeout_ms = 500;
        HttpBackend backend(d, "sk-test");
        CHECK_THROWS_AS(backend.complete(req()), TransportError);
    }

    TEST_CASE("missing API key is a configuration error") {
        const char* saved = std::getenv("SILICON_API_KEY");
        std::string keep = saved ? saved : "";
        unsetenv("SILICON_API_KEY");
        BackendDescriptor d;
        d.name = "x";
        d.endpoint = "http://127.0.0.1:1";
        CHECK_THROWS_AS(HttpBackend{d}, ConfigError);
        setenv("SILICON_API_KEY", "sk-env", 1);
        CHECK_NOTHROW(HttpBackend{d});
        if (saved) setenv("SILICON_API_KEY", keep.c_str(), 1); else unsetenv("SILICON_API_KEY");
        d.endpoint = "no-scheme";
        CHECK_THROWS_AS(HttpBackend(d, "k"), ConfigError);
    }
}
