#include <cstdio>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "silicon/silicon.h"

namespace {

struct Options {
    std::string config;
    std::string backend, cache, out, record, target;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> parallelism;
    std::vector<double> temps;
};

int exit_for(silicon_status s) {
    switch (s) {
        case SILICON_OK: return 0;
        case SILICON_ERR_CONFIG:
        case SILICON_ERR_IO:
        case SILICON_ERR_VALIDATION:
        case SILICON_ERR_CAPABILITY:
        case SILICON_ERR_CACHE_CORRUPT:
        case SILICON_ERR_INFEASIBLE:
        case SILICON_ERR_INVALID_ARGUMENT: return 1;
        default: return 2;
    }
}

int fail(silicon_status s) {
    std::cerr << "error (" << silicon_status_name(s) << "): " << silicon_last_error() << "\n";
    return exit_for(s);
}

std::string overrides(const Options& o) {
    nlohmann::json j = nlohmann::json::object();
    if (!o.backend.empty()) j["backend"] = o.backend;
    if (!o.cache.empty()) j["cache"] = o.cache;
    if (!o.out.empty()) j["out"] = o.out;
    if (o.seed) j["seed"] = *o.seed;
    if (o.parallelism) j["parallelism"] = *o.parallelism;
    if (!o.temps.empty()) j["temps"] = o.temps;
    return j.dump();
}

// Owns a returned string and prints it.
struct Text {
    char* p = nullptr;
    ~Text() { silicon_string_free(p); }
};

struct Config {
    silicon_config* p = nullptr;
    ~Config() { silicon_config_free(p); }
};

int with_config(const Options& o, const std::function<silicon_status(silicon_config*, char**)>& fn,
                const std::function<void(const std::string&)>& print = {}) {
    Config cfg;
    if (auto s = silicon_config_load(o.config.c_str(), overrides(o).c_str(), &cfg.p); s != SILICON_OK) return fail(s);
    Text out;
    if (auto s = fn(cfg.p, &out.p); s != SILICON_OK) return fail(s);
    if (out.p) {
        if (print) print(out.p);
        else std::cout << out.p << "\n";
    }
    return 0;
}

// completed runs with failed records exit 2; the outputs stay on disk
int run_study(const Options& o, const char* study) {
    int failed = 0;
    int rc = with_config(o, [&](silicon_config* c, char** out) { return silicon_run(c, study, out); },
                         [&](const std::string& summary) {
                             std::cout << summary << "\n";
                             auto j = nlohmann::json::parse(summary);
                             auto counts = j.value("counts", nlohmann::json::object());
                             failed = counts.value("failures", 0);
                             if (failed > 0)
                                 std::cerr << failed << " of " << counts.value("attempts", 0)
                                           << " queries failed; partial outputs in "
                                           << j.value("output_dir", std::string()) << "\n";
                         });
    return rc != 0 ? rc : (failed > 0 ? 2 : 0);
}

void print_cost(const std::string& json) {
    auto j = nlohmann::json::parse(json);
    std::cout << "queries per target: " << j["queries"].get<long long>() << "\n"
              << "tokens per target: " << j["tokens_per_target"].get<long long>() << "\n"
              << "price per 1k tokens: $" << j["price_per_1k"].get<double>() << "\n"
              << "cost per target variable: " << j["cost_per_target"].get<std::string>() << "\n"
              << "targets: " << j["targets"].get<long long>() << "\n"
              << "total: " << j["total_cost"].get<std::string>() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Silicon-sample survey simulation toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(silicon_version()));
    Options o;

    auto add_config = [&](CLI::App* sub) { sub->add_option("--config", o.config, "experiment config (JSON)")->required(); };
    auto add_run_flags = [&](CLI::App* sub) {
        sub->add_option("--backend", o.backend, "backend descriptor replacing the config's backends");
        sub->add_option("--cache", o.cache, "response cache (JSONL)");
        sub->add_option("--seed", o.seed, "sampling seed");
        sub->add_option("--parallelism", o.parallelism, "concurrent queries")->check(CLI::PositiveNumber);
        sub->add_option("--out", o.out, "output directory");
    };

    auto* ingest = app.add_subcommand("ingest", "validate a dataset against its codebook");
    add_config(ingest);
    ingest->add_option("--out", o.out, "directory for the normalized dataset and summary");

    auto* render = app.add_subcommand("render", "print the conditioning text for one record (no backend call)");
    add_config(render);
    render->add_option("--record", o.record, "respondent id")->required();
    render->add_option("--target", o.target, "interview target item or word-list target party");

    auto* run = app.add_subcommand("run", "run the configured study");
    add_config(run);
    add_run_flags(run);

    auto* stats = app.add_subcommand("stats", "recompute statistics from existing outputs");
    add_config(stats);
    stats->add_option("--out", o.out, "output directory to scan");

    auto* ablate = app.add_subcommand("ablate", "template ablation on a vote-study config");
    add_config(ablate);
    add_run_flags(ablate);

    auto* sweep = app.add_subcommand("sweep", "temperature sweep on an interview config");
    add_config(sweep);
    add_run_flags(sweep);
    sweep->add_option("--temps", o.temps, "temperatures, comma separated")->delimiter(',');

    auto* plan = app.add_subcommand("plan-eval", "assign word lists to human raters");
    add_config(plan);
    plan->add_option("--seed", o.seed, "assignment seed");
    plan->add_option("--out", o.out, "directory for assignments.csv and coverage.csv");

    auto* cost = app.add_subcommand("cost", "estimate the cost of a planned run (no backend call)");
    add_config(cost);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    if (ingest->parsed()) {
        Config cfg;
        auto ov = nlohmann::json::object();
        if (auto s = silicon_config_load(o.config.c_str(), ov.dump().c_str(), &cfg.p); s != SILICON_OK) return fail(s);
        silicon_dataset* ds = nullptr;
        if (auto s = silicon_dataset_open(cfg.p, 0, &ds); s != SILICON_OK) return fail(s);
        Text summary;
        auto s = silicon_dataset_summary(ds, &summary.p);
        if (s == SILICON_OK && !o.out.empty()) s = silicon_dataset_save(ds, (o.out + "/dataset.csv").c_str());
        silicon_dataset_free(ds);
        if (s != SILICON_OK) return fail(s);
        std::cout << summary.p << "\n";
        return 0;
    }
    if (render->parsed()) {
        return with_config(o, [&](silicon_config* c, char** out) {
            return silicon_render(c, o.record.c_str(), o.target.empty() ? nullptr : o.target.c_str(), out);
        }, [](const std::string& t) { std::cout << t << "\n"; });
    }
    if (run->parsed()) return run_study(o, nullptr);
    if (ablate->parsed()) return run_study(o, "ablation");
    if (sweep->parsed()) return run_study(o, "temperature_sweep");
    if (stats->parsed())
        return with_config(o, [](silicon_config* c, char** out) { return silicon_stats(c, out); });
    if (cost->parsed())
        return with_config(o, [](silicon_config* c, char** out) { return silicon_cost(c, out); }, print_cost);
    if (plan->parsed()) {
        nlohmann::json j = nlohmann::json::object();
        if (o.seed) j["seed"] = *o.seed;
        if (!o.out.empty()) j["out"] = o.out;
        Text out;
        if (auto s = silicon_plan_eval(o.config.c_str(), j.dump().c_str(), &out.p); s != SILICON_OK) return fail(s);
        std::cout << out.p << "\n";
        return 0;
    }
    return 1;
}
