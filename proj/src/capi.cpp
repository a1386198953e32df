#include "silicon/silicon.h"

#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "silicon/experiments.hpp"
#include "silicon/reports.hpp"
#include "silicon/stats.hpp"
#include "silicon/survey_data.hpp"
#include "silicon/text.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

struct silicon_config {
    silicon::ExperimentConfig cfg;
};

struct silicon_dataset {
    silicon::SurveyDataset data;
    std::vector<silicon::CellError> errors;
};

namespace {

thread_local std::string g_last_error;

silicon_status status_of(silicon::ErrorCode c) {
    return static_cast<silicon_status>(static_cast<int>(c));
}

template <typename F>
silicon_status guarded(F&& f) {
    try {
        f();
        g_last_error.clear();
        return SILICON_OK;
    } catch (const silicon::ValidationError& e) {
        std::string msg = e.what();
        for (auto& c : e.cells())
            msg += "\n  row " + std::to_string(c.row) + " (" + c.respondent_id + ") " + c.variable + "='" + c.value +
                   "': " + c.reason;
        g_last_error = msg;
        return SILICON_ERR_VALIDATION;
    } catch (const silicon::TransportError& e) {
        std::string msg = e.what();
        for (auto& a : e.attempts()) msg += "\n  " + a;
        g_last_error = msg;
        return SILICON_ERR_TRANSPORT;
    } catch (const silicon::InfeasibleError& e) {
        g_last_error = e.what();
        return SILICON_ERR_INFEASIBLE;
    } catch (const silicon::Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::invalid_argument& e) {
        g_last_error = e.what();
        return SILICON_ERR_INVALID_ARGUMENT;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = std::string("malformed JSON: ") + e.what();
        return SILICON_ERR_CONFIG;
    } catch (const std::filesystem::filesystem_error& e) {
        g_last_error = e.what();
        return SILICON_ERR_IO;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return SILICON_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return SILICON_ERR_INTERNAL;
    }
}

char* dup(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size());
    out[s.size()] = '\0';
    return out;
}

void need(const void* p, const char* what) {
    if (!p) throw std::invalid_argument(std::string(what) + " must not be null");
}

silicon::Overrides parse_overrides(const char* json) {
    silicon::Overrides o;
    if (!json || !*json) return o;
    auto j = ojson::parse(json);
    if (!j.is_object()) throw silicon::ConfigError("overrides must be a JSON object");
    for (auto& [k, v] : j.items()) {
        if (k == "backend") o.backend = v.get<std::string>();
        else if (k == "cache") o.cache = v.get<std::string>();
        else if (k == "out") o.output_dir = v.get<std::string>();
        else if (k == "seed") o.seed = v.get<std::uint64_t>();
        else if (k == "parallelism") o.parallelism = v.get<std::size_t>();
        else if (k == "temps") o.temperatures = v.get<std::vector<double>>();
        else throw silicon::ConfigError("unknown override '" + k + "'");
    }
    return o;
}

ojson opt(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

ojson metric_json(const silicon::MetricResult& m) {
    ojson j{{"value", opt(m.value)}, {"degenerate", m.degenerate}};
    if (m.corrected) j["corrected"] = true;
    if (!m.diagnostics.empty()) j["diagnostics"] = m.diagnostics;
    if (!m.note.empty()) j["note"] = m.note;
    return j;
}

ojson summary_json(const silicon::DifferenceSummary& s) {
    return {{"mean", s.mean}, {"min", s.min}, {"max", s.max}, {"sd", s.sd}, {"cells", s.cells},
            {"observations", s.observations}};
}

ojson counts_json(const silicon::RunCounts& c) {
    return {{"queries", c.queries},   {"cache_hits", c.cache_hits}, {"fetches", c.fetches},
            {"attempts", c.attempts}, {"successes", c.successes},   {"failures", c.failures},
            {"no_signal", c.no_signal}, {"non_compliant", c.non_compliant}, {"ties", c.ties},
            {"skipped", c.skipped}};
}

ojson dataset_summary(const silicon::SurveyDataset& ds, const std::vector<silicon::CellError>& errors) {
    ojson j;
    j["records"] = ds.size();
    std::vector<std::string> vars, numeric;
    for (auto& v : ds.codebook().variables()) {
        vars.push_back(v.name);
        if (v.kind != silicon::VariableKind::free_text) numeric.push_back(v.name);
    }
    j["variables"] = vars;
    auto miss = ojson::array();
    if (!ds.empty())
        for (auto& m : silicon::missingness_report(ds, vars))
            miss.push_back({{"variable", m.variable}, {"missing", m.missing}, {"percent", m.percent}});
    j["missingness"] = miss;
    auto desc = ojson::array();
    if (!ds.empty())
        for (auto& d : silicon::describe(ds, numeric))
            desc.push_back({{"variable", d.variable}, {"n", d.n}, {"mean", opt(d.mean)}, {"sd", opt(d.sd)},
                            {"min", opt(d.min)}, {"p25", opt(d.p25)}, {"p75", opt(d.p75)}, {"max", opt(d.max)}});
    j["descriptives"] = desc;
    auto errs = ojson::array();
    for (auto& e : errors)
        errs.push_back({{"row", e.row}, {"respondent_id", e.respondent_id}, {"variable", e.variable},
                        {"value", e.value}, {"reason", e.reason}});
    j["errors"] = errs;
    return j;
}

std::vector<std::string> analysis_vars(const silicon::ExperimentConfig& cfg, const silicon::Codebook& cb) {
    if (!cfg.analysis_variables.empty()) return cfg.analysis_variables;
    if (!cfg.targets.empty()) return cfg.targets;
    if (!cfg.script_path.empty()) {
        std::vector<std::string> out;
        for (auto& item : silicon::load_script(cfg.script_path).items) out.push_back(item.variable);
        return out;
    }
    std::vector<std::string> out;
    for (auto& v : cb.variables())
        if (v.kind != silicon::VariableKind::free_text) out.push_back(v.name);
    return out;
}

}  // namespace

extern "C" {

const char* silicon_version(void) { return "1.0.0"; }

const char* silicon_status_name(silicon_status s) {
    switch (s) {
        case SILICON_OK: return "ok";
        case SILICON_ERR_CONFIG: return "config";
        case SILICON_ERR_IO: return "io";
        case SILICON_ERR_VALIDATION: return "validation";
        case SILICON_ERR_TRANSPORT: return "transport";
        case SILICON_ERR_REFUSAL: return "refusal";
        case SILICON_ERR_CAPABILITY: return "capability";
        case SILICON_ERR_NO_SIGNAL: return "no_signal";
        case SILICON_ERR_DEGENERATE: return "degenerate";
        case SILICON_ERR_CACHE_CORRUPT: return "cache_corrupt";
        case SILICON_ERR_REPLAY_MISS: return "replay_miss";
        case SILICON_ERR_INFEASIBLE: return "infeasible";
        case SILICON_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case SILICON_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* silicon_last_error(void) { return g_last_error.c_str(); }

void silicon_string_free(char* s) { std::free(s); }

silicon_status silicon_config_load(const char* path, const char* overrides_json, silicon_config** out) {
    return guarded([&] {
        need(path, "path");
        need(out, "out");
        *out = nullptr;
        auto cfg = silicon::load_config(path, parse_overrides(overrides_json));
        *out = new silicon_config{std::move(cfg)};
    });
}

void silicon_config_free(silicon_config* config) { delete config; }

silicon_status silicon_config_json(const silicon_config* config, char** out_json) {
    return guarded([&] {
        need(config, "config");
        need(out_json, "out_json");
        const auto& c = config->cfg;
        ojson j;
        j["study"] = silicon::to_string(c.study);
        j["dataset"] = c.dataset.generic_string();
        j["codebook"] = c.codebook.generic_string();
        j["output_dir"] = c.output_dir.generic_string();
        j["seed"] = c.seed;
        j["parallelism"] = c.parallelism;
        auto b = ojson::array();
        for (auto& d : c.backends) b.push_back({{"name", d.name}, {"kind", d.kind}, {"model", d.model}});
        j["backends"] = b;
        j["overrides"] = c.overrides;
        *out_json = dup(j.dump(2));
    });
}

silicon_status silicon_render(const silicon_config* config, const char* respondent_id, const char* target,
                              char** out_text) {
    return guarded([&] {
        need(config, "config");
        need(respondent_id, "respondent_id");
        need(out_text, "out_text");
        *out_text = dup(silicon::render_for_record(config->cfg, respondent_id, target ? target : ""));
    });
}

silicon_status silicon_run(const silicon_config* config, const char* study, char** out_summary) {
    return guarded([&] {
        need(config, "config");
        silicon::ExperimentConfig cfg = config->cfg;
        if (study && *study) {
            std::string s = study;
            if (s == "vote") cfg.study = silicon::StudyKind::vote;
            else if (s == "wordlist") cfg.study = silicon::StudyKind::wordlist;
            else if (s == "interview") cfg.study = silicon::StudyKind::interview;
            else if (s == "ablation") cfg.study = silicon::StudyKind::ablation;
            else if (s == "temperature_sweep") cfg.study = silicon::StudyKind::temperature_sweep;
            else throw silicon::ConfigError("unknown study '" + s + "'");
            if (cfg.study == silicon::StudyKind::ablation && (cfg.template_path.empty() || cfg.probe_path.empty()))
                throw silicon::ConfigError("ablation needs a vote-study config (template and probe)");
            if (cfg.study == silicon::StudyKind::temperature_sweep) {
                if (cfg.script_path.empty()) throw silicon::ConfigError("sweep needs an interview config");
                if (cfg.temperatures.empty()) throw silicon::ConfigError("sweep needs temperatures (config or --temps)");
            }
        }
        auto r = silicon::run_experiment(cfg);
        ojson j;
        j["study"] = silicon::to_string(r.study);
        j["output_dir"] = r.output_dir.generic_string();
        j["counts"] = counts_json(r.counts);
        auto backends = ojson::array();
        for (auto& b : r.backends) {
            std::int64_t cents = silicon::estimate_cost_cents(b.ledger);
            backends.push_back({{"name", b.descriptor.name},
                                {"counts", counts_json(b.counts)},
                                {"prompt_tokens", b.ledger.prompt_tokens},
                                {"completion_tokens", b.ledger.completion_tokens},
                                {"cost", silicon::format_dollars(cents)}});
        }
        j["backends"] = backends;
        if (!r.votes.empty() && r.study == silicon::StudyKind::vote) {
            auto v = ojson::array();
            for (auto& run : r.votes) {
                const auto& w = run.report.rows.front();
                v.push_back({{"backend", run.backend}, {"n", w.n}, {"tetrachoric", metric_json(w.tetrachoric)},
                             {"agreement", metric_json(w.agreement)}, {"kappa", metric_json(w.kappa)},
                             {"icc", metric_json(w.icc)}});
            }
            j["fidelity"] = v;
        }
        if (!r.interviews.empty()) {
            auto v = ojson::array();
            for (auto& run : r.interviews)
                v.push_back({{"backend", run.backend}, {"temperature", run.temperature},
                             {"summary", summary_json(run.comparison.summary)},
                             {"zero_variance", run.zero_variance}});
            j["interviews"] = v;
        }
        if (!r.ablation.empty()) {
            auto v = ojson::array();
            for (auto& a : r.ablation)
                v.push_back({{"backend", a.backend}, {"variant", a.label}, {"n", a.n}, {"agreement", opt(a.agreement)}});
            j["ablation"] = v;
        }
        if (out_summary) *out_summary = dup(j.dump(2));
    });
}

silicon_status silicon_cost(const silicon_config* config, char** out_json) {
    return guarded([&] {
        need(config, "config");
        need(out_json, "out_json");
        auto e = silicon::estimate_cost(config->cfg);
        ojson j{{"queries", e.queries},
                {"price_per_1k", e.price_per_1k},
                {"tokens_per_target", e.tokens_per_target},
                {"cost_per_target", silicon::format_dollars(e.cents_per_target)},
                {"targets", e.targets},
                {"total_tokens", e.total_tokens},
                {"total_cost", silicon::format_dollars(e.total_cents)}};
        *out_json = dup(j.dump(2));
    });
}

silicon_status silicon_stats(const silicon_config* config, char** out_json) {
    return guarded([&] {
        need(config, "config");
        need(out_json, "out_json");
        const auto& cfg = config->cfg;
        auto human = silicon::load_dataset(cfg.dataset, cfg.codebook);
        auto vars = analysis_vars(cfg, human.codebook());
        ojson j;
        j["human"] = dataset_summary(human, {});
        auto comparisons = ojson::array();
        if (!cfg.output_dir.empty() && fs::exists(cfg.output_dir)) {
            std::vector<fs::path> found;
            for (auto& e : fs::recursive_directory_iterator(cfg.output_dir))
                if (e.is_regular_file() && e.path().filename() == "silicon.csv") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            for (auto& p : found) {
                auto sil = silicon::load_dataset(p, human.codebook());
                auto [hc, sc] = silicon::complete_cases(human, sil, vars);
                ojson c{{"path", fs::relative(p, cfg.output_dir).generic_string()}, {"complete_cases", hc.size()}};
                if (hc.size() >= 2) {
                    auto hm = silicon::association_matrix(hc, hc, vars, silicon::MatrixSource::human);
                    auto sm = silicon::association_matrix(hc, sc, vars, silicon::MatrixSource::silicon_vs_human_input);
                    c["summary"] = summary_json(silicon::compare_matrices(hm, sm).summary);
                }
                comparisons.push_back(std::move(c));
            }
        }
        j["comparisons"] = comparisons;
        *out_json = dup(j.dump(2));
    });
}

silicon_status silicon_dataset_open(const silicon_config* config, int lenient, silicon_dataset** out) {
    return guarded([&] {
        need(config, "config");
        need(out, "out");
        *out = nullptr;
        auto cb = silicon::load_codebook(config->cfg.codebook);
        silicon::LoadOptions opts;
        opts.lenient = lenient != 0;
        auto r = silicon::load_dataset_report(config->cfg.dataset, cb, opts);
        *out = new silicon_dataset{std::move(r.dataset), std::move(r.errors)};
    });
}

silicon_status silicon_dataset_load(const char* table, const char* codebook, int lenient, silicon_dataset** out) {
    return guarded([&] {
        need(table, "table");
        need(codebook, "codebook");
        need(out, "out");
        *out = nullptr;
        auto cb = silicon::load_codebook(codebook);
        silicon::LoadOptions opts;
        opts.lenient = lenient != 0;
        auto r = silicon::load_dataset_report(table, cb, opts);
        *out = new silicon_dataset{std::move(r.dataset), std::move(r.errors)};
    });
}

void silicon_dataset_free(silicon_dataset* dataset) { delete dataset; }

size_t silicon_dataset_size(const silicon_dataset* dataset) { return dataset ? dataset->data.size() : 0; }

silicon_status silicon_dataset_summary(const silicon_dataset* dataset, char** out_json) {
    return guarded([&] {
        need(dataset, "dataset");
        need(out_json, "out_json");
        *out_json = dup(dataset_summary(dataset->data, dataset->errors).dump(2));
    });
}

silicon_status silicon_dataset_save(const silicon_dataset* dataset, const char* path) {
    return guarded([&] {
        need(dataset, "dataset");
        need(path, "path");
        silicon::save_dataset(dataset->data, path);
    });
}

silicon_status silicon_plan_eval(const char* path, const char* overrides_json, char** out_json) {
    return guarded([&] {
        need(path, "path");
        std::ifstream in(path);
        if (!in) throw silicon::IoError(std::string("cannot read ") + path);
        ojson j;
        try {
            j = ojson::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw silicon::ConfigError(std::string("plan config is not valid JSON: ") + e.what());
        }
        fs::path base = fs::path(path).parent_path();
        std::vector<std::string> ids;
        if (j.contains("lists_file")) {
            fs::path lf = j["lists_file"].get<std::string>();
            if (lf.is_relative()) lf = base / lf;
            std::ifstream lin(lf);
            if (!lin) throw silicon::IoError("cannot read " + lf.string());
            std::string line;
            while (std::getline(lin, line)) {
                line = silicon::text::trim(line);
                if (!line.empty()) ids.push_back(line);
            }
        } else {
            auto n = j.at("lists").get<std::size_t>();
            for (std::size_t i = 1; i <= n; ++i) ids.push_back("list-" + std::to_string(i));
        }
        std::uint64_t seed = j.value("seed", std::uint64_t{0});
        std::optional<fs::path> outdir;
        if (j.contains("output_dir")) {
            outdir = fs::path(j["output_dir"].get<std::string>());
            if (outdir->is_relative()) outdir = base / *outdir;
        }
        if (overrides_json && *overrides_json) {
            auto o = ojson::parse(overrides_json);
            for (auto& [k, v] : o.items()) {
                if (k == "seed") seed = v.get<std::uint64_t>();
                else if (k == "out") outdir = fs::path(v.get<std::string>());
                else throw silicon::ConfigError("override '" + k + "' does not apply to plan-eval");
            }
        }
        auto plan = silicon::build_evaluation_plan(ids, j.at("raters").get<std::size_t>(),
                                                   j.value("per_rater", std::size_t{8}),
                                                   j.value("per_list", std::size_t{3}), seed);
        std::size_t exact = plan.list_ids.size() - plan.below - plan.above;
        ojson s{{"lists", plan.list_ids.size()},
                {"raters", plan.raters.size()},
                {"per_rater", plan.per_rater},
                {"per_list", plan.per_list},
                {"exact", exact},
                {"below", plan.below},
                {"above", plan.above},
                {"exact_share", static_cast<double>(exact) / static_cast<double>(plan.list_ids.size())}};
        if (outdir) {
            fs::create_directories(*outdir);
            std::ofstream a(*outdir / "assignments.csv", std::ios::binary);
            silicon::text::write_row(a, {"rater", "position", "list_id"}, ',');
            for (std::size_t r = 0; r < plan.raters.size(); ++r)
                for (std::size_t k = 0; k < plan.raters[r].size(); ++k)
                    silicon::text::write_row(
                        a, {std::to_string(r + 1), std::to_string(k + 1), plan.list_ids[plan.raters[r][k]]}, ',');
            std::ofstream c(*outdir / "coverage.csv", std::ios::binary);
            silicon::text::write_row(c, {"list_id", "raters"}, ',');
            for (std::size_t i = 0; i < plan.list_ids.size(); ++i)
                silicon::text::write_row(c, {plan.list_ids[i], std::to_string(plan.coverage[i])}, ',');
            if (!a || !c) throw silicon::IoError("failed writing plan files");
            s["output_dir"] = outdir->generic_string();
        }
        if (out_json) *out_json = dup(s.dump(2));
    });
}

silicon_status silicon_table_metrics(size_t rows, size_t cols, const int64_t* cells, char** out_json) {
    return guarded([&] {
        need(cells, "cells");
        need(out_json, "out_json");
        if (rows < 2 || cols < 2) throw std::invalid_argument("table needs at least 2 rows and 2 columns");
        std::vector<std::string> rl, cl;
        for (std::size_t i = 0; i < rows; ++i) rl.push_back(std::to_string(i));
        for (std::size_t i = 0; i < cols; ++i) cl.push_back(std::to_string(i));
        silicon::ContingencyTable t(rl, cl);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < cols; ++c) {
                if (cells[r * cols + c] < 0) throw std::invalid_argument("counts must be non-negative");
                t.at(r, c) = cells[r * cols + c];
            }
        ojson j;
        auto attempt = [&](const char* key, auto fn) {
            try {
                j[key] = metric_json(fn());
            } catch (const silicon::DegenerateError& e) {
                j[key] = {{"value", nullptr}, {"degenerate", true}, {"note", e.what()}};
            }
        };
        if (t.square()) {
            attempt("proportion_agreement", [&] { return silicon::proportion_agreement(t); });
            attempt("cohens_kappa", [&] { return silicon::cohens_kappa(t); });
        }
        if (rows == 2 && cols == 2) attempt("tetrachoric", [&] { return silicon::tetrachoric(t); });
        attempt("cramers_v", [&] { return silicon::cramers_v(t); });
        *out_json = dup(j.dump(2));
    });
}

}  // extern "C"
