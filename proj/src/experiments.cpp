#include "silicon/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <sstream>

#include <json.hpp>

#include "silicon/parallel.hpp"
#include "silicon/reports.hpp"
#include "silicon/text.hpp"

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace silicon {

std::string to_string(StudyKind kind) {
    switch (kind) {
        case StudyKind::wordlist: return "wordlist";
        case StudyKind::vote: return "vote";
        case StudyKind::interview: return "interview";
        case StudyKind::ablation: return "ablation";
        case StudyKind::temperature_sweep: return "temperature_sweep";
    }
    return "?";
}

RunCounts& RunCounts::operator+=(const RunCounts& o) {
    queries += o.queries;
    cache_hits += o.cache_hits;
    fetches += o.fetches;
    attempts += o.attempts;
    successes += o.successes;
    failures += o.failures;
    no_signal += o.no_signal;
    non_compliant += o.non_compliant;
    ties += o.ties;
    skipped += o.skipped;
    return *this;
}

namespace {

std::string read_text(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const fs::path& p, const std::string& content) {
    std::error_code ec;
    if (p.has_parent_path()) fs::create_directories(p.parent_path(), ec);
    fs::path tmp = p;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + p.string());
        out << content;
        if (!out) throw IoError("write failed for " + p.string());
    }
    fs::rename(tmp, p, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

std::string csv(const std::vector<text::Row>& rows) {
    std::ostringstream out;
    for (auto& r : rows) text::write_row(out, r, ',');
    return out.str();
}

StudyKind parse_study(const std::string& s) {
    std::string k = text::to_lower(s);
    if (k == "wordlist" || k == "word_list" || k == "study1") return StudyKind::wordlist;
    if (k == "vote" || k == "study2") return StudyKind::vote;
    if (k == "interview" || k == "study3") return StudyKind::interview;
    if (k == "ablation") return StudyKind::ablation;
    if (k == "temperature_sweep" || k == "sweep") return StudyKind::temperature_sweep;
    throw ConfigError("unknown study kind '" + s + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::vector<std::string> string_list(const ojson& j, const char* key) {
    std::vector<std::string> out;
    if (!j.is_array()) throw ConfigError(std::string(key) + " must be an array");
    for (auto& v : j) {
        if (v.is_string()) out.push_back(v.get<std::string>());
        else if (v.is_number_integer()) out.push_back(std::to_string(v.get<std::int64_t>()));
        else throw ConfigError(std::string(key) + " entries must be strings");
    }
    return out;
}

std::string temp_label(double t) { return text::shortest(t); }

std::string safe_dir(const std::string& label) {
    std::string out;
    for (char c : label) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.') ? c : '_';
    return out;
}

ojson counts_json(const RunCounts& c) {
    return {{"queries", c.queries},       {"cache_hits", c.cache_hits}, {"fetches", c.fetches},
            {"attempts", c.attempts},     {"successes", c.successes},   {"failures", c.failures},
            {"no_signal", c.no_signal},   {"non_compliant", c.non_compliant},
            {"ties", c.ties},             {"skipped", c.skipped}};
}

// Everything a study needs, loaded once.
struct Inputs {
    SurveyDataset dataset;
    std::optional<PersonaTemplate> tmpl;
    std::optional<Probe> probe;
    std::optional<InterviewScript> script;
    std::vector<NamedSubgroup> subgroups;
    std::vector<std::string> targets;
    std::shared_ptr<CacheStore> cache;
};

Inputs load_inputs(const ExperimentConfig& cfg) {
    Inputs in;
    if (cfg.dataset.empty() || cfg.codebook.empty()) throw ConfigError("config needs dataset and codebook");
    in.dataset = load_dataset(cfg.dataset, cfg.codebook);
    if (in.dataset.empty()) throw ValidationError("dataset " + cfg.dataset.string() + " has no records");
    const auto& cb = in.dataset.codebook();
    if (!cfg.template_path.empty()) {
        in.tmpl = load_template(cfg.template_path);
        validate_template(*in.tmpl, cb);
    }
    if (!cfg.probe_path.empty()) in.probe = load_probe(cfg.probe_path);
    if (!cfg.script_path.empty()) {
        in.script = load_script(cfg.script_path);
        validate_script(*in.script, cb);
        in.targets = cfg.targets;
        if (in.targets.empty())
            for (auto& item : in.script->items) in.targets.push_back(item.variable);
        for (auto& t : in.targets) in.script->item(t);
    }
    if (!cfg.subgroups_path.empty()) {
        in.subgroups = load_subgroups(cfg.subgroups_path);
        for (auto& g : in.subgroups)
            for (auto& c : g.filter.clauses) cb.require(c.variable);
    } else {
        in.subgroups.push_back({"Whole sample", {}});
    }
    if (cfg.cache) in.cache = std::make_shared<CacheStore>(*cfg.cache);
    return in;
}

struct Prepared {
    BackendDescriptor desc;
    std::shared_ptr<LmClient> client;
};

std::vector<Prepared> prepare_backends(const ExperimentConfig& cfg, const Inputs& in, bool need_logprobs) {
    if (cfg.backends.empty()) throw ConfigError("config lists no backends");
    std::vector<Prepared> out;
    std::set<std::string> names;
    for (auto& d : cfg.backends) {
        if (!names.insert(d.name).second) throw ConfigError("duplicate backend name '" + d.name + "'");
        BackendContext ctx{&in.dataset, in.script ? &*in.script : nullptr, in.targets, in.cache, cfg.seed};
        auto backend = make_backend(d, ctx);
        if (need_logprobs) require_logprobs(*backend);
        out.push_back({d, std::make_shared<LmClient>(backend, in.cache, d.price_per_1k)});
    }
    return out;
}

void finish_counts(RunCounts& c, const LmClient& client, std::size_t hits0, std::size_t fetches0) {
    c.cache_hits = client.cache_hits() - hits0;
    c.fetches = client.fetches() - fetches0;
}

std::optional<int> human_vote(const SurveyDataset& ds, const SurveyRecord& r, const HumanVoteSpec& spec) {
    auto v = ds.get(r, spec.variable);
    if (!v) return std::nullopt;
    if (spec.positive.count(*v)) return 1;
    if (spec.negative.count(*v)) return 0;
    return std::nullopt;
}

// ------------------------------------------------------------ vote pipeline

VoteRun run_votes(const ExperimentConfig& cfg, const Inputs& in, const PersonaTemplate& tmpl, LmClient& client,
                  const std::string& backend_name, const fs::path& dir, std::vector<text::Row>* probs_rows) {
    const Probe& probe = *in.probe;
    const auto& ds = in.dataset;
    std::size_t n = ds.size();
    VoteRun run;
    run.backend = backend_name;
    run.p_positive.assign(n, std::nullopt);
    run.marginal.per_record.assign(n, std::nullopt);
    std::vector<std::string> status(n, "ok");
    std::vector<std::string> error(n);
    std::vector<char> cached(n, 0);
    std::size_t hits0 = client.cache_hits(), fetches0 = client.fetches();

    parallel_for(n, cfg.parallelism, [&](std::size_t i) {
        const auto& rec = ds.records()[i];
        std::string prompt = compose_prompt(render_backstory(tmpl, ds, rec), probe.prompt_suffix);
        try {
            auto got = client.next_token_logprobs(prompt, cfg.top_k);
            cached[i] = got.cached;
            try {
                auto cp = normalize(collapse(got.value, probe));
                run.p_positive[i] = cp.at(probe.positive);
                run.marginal.per_record[i] = std::move(cp);
            } catch (const NoSignalError&) {
                status[i] = "no_signal";
            }
        } catch (const TransportError& e) {
            status[i] = "failed";
            error[i] = e.what();
        } catch (const RefusalError& e) {
            status[i] = "failed";
            error[i] = e.what();
        } catch (const ReplayMissError& e) {
            status[i] = "failed";
            error[i] = e.what();
        }
    });

    auto& c = run.counts;
    c.attempts = n;
    for (std::size_t i = 0; i < n; ++i) {
        if (status[i] == "failed") ++c.failures;
        else ++c.successes;
        if (status[i] == "no_signal") ++c.no_signal;
        if (run.p_positive[i] && *run.p_positive[i] == 0.5) ++c.ties;
    }
    finish_counts(c, client, hits0, fetches0);
    c.queries = c.successes;

    for (auto& cand : probe.candidates) run.marginal.labels.push_back(cand.label);
    run.marginal.means.assign(run.marginal.labels.size(), 0.0);
    for (auto& r : run.marginal.per_record) {
        if (!r) continue;
        ++run.marginal.with_signal;
        for (std::size_t k = 0; k < r->probs.size(); ++k) run.marginal.means[k] += r->probs[k];
    }
    run.marginal.no_signal = c.no_signal;
    if (run.marginal.with_signal)
        for (double& m : run.marginal.means) m /= static_cast<double>(run.marginal.with_signal);

    run.human_votes.resize(n);
    std::size_t hv = 0, hpos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        run.human_votes[i] = human_vote(ds, ds.records()[i], cfg.human_vote);
        if (run.human_votes[i]) {
            ++hv;
            hpos += static_cast<std::size_t>(*run.human_votes[i]);
        }
    }
    run.human_share = hv ? static_cast<double>(hpos) / static_cast<double>(hv) : 0.0;
    run.report = subgroup_fidelity_report(run.human_votes, run.p_positive, in.subgroups, ds, cfg.tie_as_positive);

    // probabilities.csv
    text::Row header{"respondent_id"};
    for (auto& l : run.marginal.labels) header.push_back("p_" + l);
    for (auto s : {"residual", "human_vote", "silicon_vote", "status", "cached"}) header.push_back(s);
    std::vector<text::Row> rows{header};
    for (std::size_t i = 0; i < n; ++i) {
        text::Row row{ds.records()[i].respondent_id};
        const auto& r = run.marginal.per_record[i];
        for (std::size_t k = 0; k < run.marginal.labels.size(); ++k) row.push_back(r ? text::shortest(r->probs[k]) : "");
        row.push_back(r ? text::shortest(r->residual) : "");
        row.push_back(run.human_votes[i] ? std::to_string(*run.human_votes[i]) : "");
        std::string sv;
        if (run.p_positive[i]) {
            auto call = dichotomize(*run.p_positive[i], 0.5, cfg.tie_as_positive);
            sv = call.vote ? std::to_string(*call.vote) : "tie";
        }
        row.push_back(sv);
        row.push_back(status[i] == "failed" ? "failed: " + text::escape_line(error[i]) : status[i]);
        row.push_back(cached[i] ? "1" : "0");
        rows.push_back(row);
        if (probs_rows) probs_rows->push_back(std::move(row));
    }
    write_text(dir / "probabilities.csv", csv(rows));
    write_text(dir / "fidelity.csv", reports::fidelity_table(run.report));

    ojson fj = ojson::array();
    for (auto& row : run.report.rows) {
        ojson r{{"subgroup", row.subgroup}, {"n", row.n}, {"ties", row.ties}};
        for (auto* m : {&row.tetrachoric, &row.kappa, &row.icc, &row.agreement}) {
            ojson mj{{"value", m->value ? ojson(*m->value) : ojson(nullptr)},
                     {"degenerate", m->degenerate},
                     {"corrected", m->corrected}};
            if (m->iterations) mj["iterations"] = m->iterations;
            if (!m->diagnostics.empty()) mj["diagnostics"] = m->diagnostics;
            if (!m->note.empty()) mj["note"] = m->note;
            r[m->metric] = std::move(mj);
        }
        fj.push_back(std::move(r));
    }
    write_text(dir / "fidelity.json", fj.dump(2) + "\n");

    std::vector<text::Row> mrows{{"candidate", "silicon_mean", "human_share", "with_signal", "no_signal"}};
    for (std::size_t k = 0; k < run.marginal.labels.size(); ++k) {
        const auto& l = run.marginal.labels[k];
        double hs = l == probe.positive ? run.human_share : 1.0 - run.human_share;
        if (probe.candidates.size() != 2 && l != probe.positive) hs = std::nan("");
        mrows.push_back({l, text::fixed(run.marginal.means[k], 4), hv ? text::fixed(hs, 4) : "NA",
                         std::to_string(run.marginal.with_signal), std::to_string(run.marginal.no_signal)});
    }
    write_text(dir / "marginals.csv", csv(mrows));
    return run;
}

// ------------------------------------------------------------ interview pipeline

std::string interview_status(const std::optional<std::string>& code, bool failed) {
    if (failed) return "failed";
    return code ? "ok" : "non_compliant";
}

InterviewRun run_interview(const ExperimentConfig& cfg, const Inputs& in, LmClient& client, double temperature,
                           const std::string& backend_name, const fs::path& dir) {
    const auto& ds = in.dataset;
    const auto& cb = ds.codebook();
    const auto& script = *in.script;
    const auto& targets = in.targets;
    std::size_t n = ds.size(), T = targets.size();
    std::vector<std::size_t> target_index;
    for (auto& t : targets) target_index.push_back(cb.require(t));

    struct Slot {
        std::optional<std::string> code;
        std::string raw;
        std::string status;
        bool cached = false;
    };
    std::vector<Slot> slots(n * T);
    std::size_t hits0 = client.cache_hits(), fetches0 = client.fetches();

    parallel_for(n * T, cfg.parallelism, [&](std::size_t k) {
        std::size_t i = k / T, t = k % T;
        const auto& rec = ds.records()[i];
        const auto& item = script.item(targets[t]);
        Slot& s = slots[k];
        if (item.conditional_on && !item_applies(item, ds, rec)) {
            // An unanswered guard leaves the item unknown; a failed one takes the fallback code.
            bool guard_missing = !ds.get(rec, item.conditional_on->variable);
            if (!guard_missing && item.conditional_on->otherwise) s.code = item.conditional_on->otherwise;
            s.status = guard_missing ? "guard_missing" : "guarded";
            return;
        }
        auto prompt = render_interview(script, ds, rec, targets[t]);
        if (!prompt) {
            s.status = "guarded";
            return;
        }
        CompletionRequest req;
        req.prompt = *prompt;
        req.max_tokens = cfg.max_tokens;
        req.temperature = temperature;
        req.stop = {"\n"};
        req.seed = cfg.seed;
        try {
            auto got = client.complete(req);
            s.cached = got.cached;
            auto ans = match_closed_answer(got.value.text, item, &cb[target_index[t]]);
            s.code = ans.code;
            s.raw = got.value.text;
            s.status = interview_status(ans.code, false);
        } catch (const TransportError& e) {
            s.status = "failed";
            s.raw = e.what();
        } catch (const RefusalError& e) {
            s.status = "failed";
            s.raw = e.what();
        } catch (const ReplayMissError& e) {
            s.status = "failed";
            s.raw = e.what();
        }
    });

    InterviewRun run;
    run.backend = backend_name;
    run.temperature = temperature;
    auto& c = run.counts;
    for (auto& s : slots) {
        if (s.status == "guarded" || s.status == "guard_missing") {
            ++c.skipped;
            continue;
        }
        ++c.attempts;
        if (s.status == "failed") {
            ++c.failures;
            continue;
        }
        ++c.successes;
        if (s.status == "non_compliant") ++c.non_compliant;
    }
    finish_counts(c, client, hits0, fetches0);
    c.queries = c.successes;

    // Silicon dataset: targets filled from answers, everything else missing.
    std::vector<SurveyRecord> recs;
    recs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SurveyRecord r{ds.records()[i].respondent_id, std::vector<std::optional<std::string>>(cb.size())};
        for (std::size_t t = 0; t < T; ++t) r.values[target_index[t]] = slots[i * T + t].code;
        recs.push_back(std::move(r));
    }
    run.silicon = SurveyDataset(cb, std::move(recs), "silicon:" + backend_name);

    fs::create_directories(dir);
    save_dataset(run.silicon, dir / "silicon.csv");
    std::vector<text::Row> comp{{"respondent_id", "target", "code", "status", "cached", "completion"}};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t t = 0; t < T; ++t) {
            auto& s = slots[i * T + t];
            comp.push_back({ds.records()[i].respondent_id, targets[t], s.code.value_or(""), s.status,
                            s.cached ? "1" : "0", text::escape_line(s.raw)});
        }
    write_text(dir / "completions.csv", csv(comp));

    std::vector<std::string> vars = cfg.analysis_variables.empty() ? targets : cfg.analysis_variables;
    for (auto& v : vars)
        if (std::find(targets.begin(), targets.end(), v) == targets.end())
            throw ConfigError("analysis variable '" + v + "' is not an interview target");

    std::vector<reports::MissingnessPair> miss;
    auto hm = missingness_report(ds, vars), sm = missingness_report(run.silicon, vars);
    for (std::size_t k = 0; k < vars.size(); ++k)
        miss.push_back({cb.at(vars[k]).display(), hm[k].percent, sm[k].percent});
    write_text(dir / "missingness.csv", reports::missingness_table(miss, cfg.human_label, cfg.silicon_label));

    auto [hc, sc] = complete_cases(ds, run.silicon, vars);
    run.human_complete = hc;
    run.silicon_complete = sc;

    std::vector<reports::SourcedDescriptives> desc;
    std::vector<std::string> numeric_vars;
    for (auto& v : vars)
        if (cb.at(v).kind != VariableKind::free_text) numeric_vars.push_back(v);
    if (!hc.empty()) {
        auto hd = describe(hc, numeric_vars), sd = describe(sc, numeric_vars);
        for (std::size_t k = 0; k < numeric_vars.size(); ++k) {
            desc.push_back({cb.at(numeric_vars[k]).display(), cfg.human_label, hd[k]});
            desc.push_back({cb.at(numeric_vars[k]).display(), cfg.silicon_label, sd[k]});
        }
    }
    write_text(dir / "descriptives.csv", reports::descriptives_table(desc));

    // Variables with a single observed level cannot carry association; they are
    // reported and left out of the comparison.
    for (auto& v : vars) {
        std::set<std::string> hl, sl;
        for (auto& x : hc.column(v))
            if (x) hl.insert(*x);
        for (auto& x : sc.column(v))
            if (x) sl.insert(*x);
        if (hl.size() < 2 || sl.size() < 2) run.zero_variance.push_back(v);
    }

    if (hc.size() >= 2) {
        run.human_matrix = association_matrix(hc, hc, vars, MatrixSource::human);
        run.silicon_matrix = association_matrix(hc, sc, vars, MatrixSource::silicon_vs_human_input);
        run.synthetic_matrix = association_matrix(sc, sc, vars, MatrixSource::fully_synthetic);
        run.comparison = compare_matrices(run.human_matrix, run.silicon_matrix, run.zero_variance);
    } else {
        run.comparison.summary.observations = hc.size();
        run.comparison.excluded = run.zero_variance;
    }
    run.comparison.summary.observations = hc.size();

    if (hc.size() >= 2) {
        write_text(dir / "matrix_human.csv", reports::matrix_csv(run.human_matrix));
        write_text(dir / "matrix_human.json", reports::matrix_json(run.human_matrix));
        write_text(dir / "matrix_silicon_vs_human_input.csv", reports::matrix_csv(run.silicon_matrix));
        write_text(dir / "matrix_silicon_vs_human_input.json", reports::matrix_json(run.silicon_matrix));
        write_text(dir / "matrix_fully_synthetic.csv", reports::matrix_csv(run.synthetic_matrix));
        write_text(dir / "matrix_fully_synthetic.json", reports::matrix_json(run.synthetic_matrix));
    }
    write_text(dir / "cramers_v_comparison.csv",
               reports::cramers_v_comparison(run.comparison, cfg.human_label, cfg.silicon_label));
    std::string summary = reports::difference_summary(run.comparison.summary);
    if (!run.zero_variance.empty()) summary += "Excluded (zero variance)," + text::join(run.zero_variance, ";") + "\n";
    write_text(dir / "difference_summary.csv", summary);
    return run;
}

// ------------------------------------------------------------ manifest

ojson ledger_json(const LedgerSnapshot& l) {
    std::int64_t cents = estimate_cost_cents(l);
    return {{"prompt_tokens", l.prompt_tokens},
            {"completion_tokens", l.completion_tokens},
            {"queries", l.queries},
            {"price_per_1k", l.price_per_1k},
            {"cost_cents", cents},
            {"cost", format_dollars(cents)}};
}

void collect_files(const fs::path& root, const fs::path& dir, std::vector<std::string>& out) {
    for (auto& e : fs::directory_iterator(dir)) {
        if (e.is_directory()) collect_files(root, e.path(), out);
        else if (e.path().filename() != "manifest.json") out.push_back(fs::relative(e.path(), root).generic_string());
    }
}

void write_manifest(const ExperimentConfig& cfg, const RunResult& result, const Inputs& in, const std::string& started) {
    ojson m;
    m["study"] = to_string(cfg.study);
    m["config_path"] = cfg.path.generic_string();
    try {
        m["config"] = ojson::parse(cfg.raw_json);
    } catch (const nlohmann::json::exception&) {
        m["config"] = cfg.raw_json;
    }
    m["overrides"] = cfg.overrides;
    m["seed"] = cfg.seed;
    m["sampling"] = {{"max_tokens", cfg.max_tokens}, {"temperature", cfg.temperature}, {"top_k", cfg.top_k}};
    m["parallelism"] = cfg.parallelism;
    m["dataset"] = {{"path", cfg.dataset.generic_string()}, {"records", in.dataset.size()}};
    if (cfg.cache) m["cache"] = {{"path", cfg.cache->generic_string()}, {"entries", in.cache ? in.cache->size() : 0}};
    auto backends = ojson::array();
    for (auto& b : result.backends) {
        backends.push_back({{"name", b.descriptor.name},
                            {"kind", b.descriptor.kind},
                            {"model", b.descriptor.model},
                            {"parameters", b.descriptor.parameters},
                            {"ledger", ledger_json(b.ledger)},
                            {"counts", counts_json(b.counts)}});
    }
    m["backends"] = std::move(backends);
    m["counts"] = counts_json(result.counts);
    std::vector<std::string> files;
    collect_files(result.output_dir, result.output_dir, files);
    std::sort(files.begin(), files.end());
    m["files"] = files;
    m["started"] = started;
    m["finished"] = timestamp_now();
    write_text(result.output_dir / "manifest.json", m.dump(2) + "\n");
}

template <typename Body>
RunResult run_study(const ExperimentConfig& cfg, StudyKind kind, Body body) {
    if (cfg.output_dir.empty()) throw ConfigError("config needs an output_dir");
    std::string started = timestamp_now();
    Inputs in = load_inputs(cfg);
    RunResult result;
    result.study = kind;
    result.output_dir = cfg.output_dir;
    fs::create_directories(cfg.output_dir);
    body(in, result);
    for (auto& b : result.backends) result.counts += b.counts;
    write_manifest(cfg, result, in, started);
    return result;
}

}  // namespace

// ------------------------------------------------------------ config

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir, const Overrides& ov) {
    ojson j;
    try {
        j = ojson::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    static const std::set<std::string> known{
        "study", "dataset", "codebook", "template", "probe", "script", "subgroups", "human_lists",
        "human_vote", "backends", "backend", "sampling", "seed", "parallelism", "cache", "output_dir",
        "targets", "analysis_variables", "temperatures", "ablation", "cost", "ideology_variable",
        "target_parties", "tie_as_positive", "labels", "name", "description"};
    for (auto& [k, _] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key '" + k + "'");

    ExperimentConfig c;
    c.raw_json = json_text;
    try {
        c.study = parse_study(j.at("study").get<std::string>());
        auto path_of = [&](const char* key) -> fs::path {
            return j.contains(key) && !j[key].is_null() ? resolve(base_dir, j[key].get<std::string>()) : fs::path();
        };
        c.dataset = path_of("dataset");
        c.codebook = path_of("codebook");
        c.template_path = path_of("template");
        c.probe_path = path_of("probe");
        c.script_path = path_of("script");
        c.subgroups_path = path_of("subgroups");
        c.human_lists = path_of("human_lists");
        if (j.contains("human_vote")) {
            auto& h = j["human_vote"];
            c.human_vote.variable = h.at("variable").get<std::string>();
            for (auto& s : string_list(h.at("republican"), "human_vote.republican")) c.human_vote.positive.insert(s);
            for (auto& s : string_list(h.at("democrat"), "human_vote.democrat")) c.human_vote.negative.insert(s);
            for (auto& s : c.human_vote.positive)
                if (c.human_vote.negative.count(s)) throw ConfigError("human_vote code '" + s + "' is on both sides");
        }
        ojson backends = j.contains("backends") ? j["backends"] : ojson::array();
        if (j.contains("backend")) backends.push_back(j["backend"]);
        for (auto& b : backends) {
            if (b.is_string()) c.backends.push_back(load_descriptor(resolve(base_dir, b.get<std::string>())));
            else if (b.is_object()) c.backends.push_back(parse_descriptor(b.dump(), base_dir));
            else throw ConfigError("backend entries must be paths or objects");
        }
        if (j.contains("sampling")) {
            auto& s = j["sampling"];
            c.max_tokens = s.value("max_tokens", c.max_tokens);
            c.temperature = s.value("temperature", c.temperature);
            c.top_k = s.value("top_k", c.top_k);
        } else if (c.study == StudyKind::wordlist) {
            c.max_tokens = 128;
        } else if (c.study == StudyKind::interview || c.study == StudyKind::temperature_sweep) {
            c.max_tokens = 8;
        }
        c.seed = j.value("seed", std::uint64_t{0});
        c.parallelism = j.value("parallelism", std::size_t{1});
        if (j.contains("cache") && !j["cache"].is_null()) c.cache = resolve(base_dir, j["cache"].get<std::string>());
        if (j.contains("output_dir")) c.output_dir = resolve(base_dir, j["output_dir"].get<std::string>());
        if (j.contains("targets")) c.targets = string_list(j["targets"], "targets");
        if (j.contains("analysis_variables")) c.analysis_variables = string_list(j["analysis_variables"], "analysis_variables");
        if (j.contains("temperatures"))
            for (auto& t : j["temperatures"]) c.temperatures.push_back(t.get<double>());
        if (j.contains("ablation")) c.ablation = parse_ablation_policy(j["ablation"].dump());
        if (j.contains("cost")) {
            auto& k = j["cost"];
            CostPlan p;
            p.avg_prompt_tokens = k.at("avg_prompt_tokens").get<std::int64_t>();
            p.completion_tokens = k.value("max_completion_tokens", k.value("completion_tokens", std::int64_t{0}));
            if (k.contains("queries")) p.queries = k["queries"].get<std::int64_t>();
            p.targets = k.value("targets", std::int64_t{1});
            if (p.avg_prompt_tokens < 0 || p.completion_tokens < 0 || p.targets < 1 || (p.queries && *p.queries < 0))
                throw ConfigError("cost fields must be non-negative (targets >= 1)");
            c.cost = p;
        }
        c.ideology_variable = j.value("ideology_variable", std::string());
        if (j.contains("target_parties")) c.target_parties = string_list(j["target_parties"], "target_parties");
        c.tie_as_positive = j.value("tie_as_positive", false);
        if (j.contains("labels")) {
            c.human_label = j["labels"].value("human", c.human_label);
            c.silicon_label = j["labels"].value("silicon", c.silicon_label);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed config: ") + e.what());
    }

    if (ov.backend) {
        c.backends = {load_descriptor(*ov.backend)};
        c.overrides["backend"] = ov.backend->generic_string();
    }
    if (ov.cache) {
        c.cache = *ov.cache;
        c.overrides["cache"] = ov.cache->generic_string();
    }
    if (ov.output_dir) {
        c.output_dir = *ov.output_dir;
        c.overrides["out"] = ov.output_dir->generic_string();
    }
    if (ov.seed) {
        c.seed = *ov.seed;
        c.overrides["seed"] = std::to_string(*ov.seed);
    }
    if (ov.parallelism) {
        c.parallelism = *ov.parallelism;
        c.overrides["parallelism"] = std::to_string(*ov.parallelism);
    }
    if (ov.temperatures) {
        c.temperatures = *ov.temperatures;
        std::vector<std::string> ts;
        for (double t : c.temperatures) ts.push_back(temp_label(t));
        c.overrides["temps"] = text::join(ts, ",");
    }

    if (c.parallelism == 0) throw ConfigError("parallelism must be at least 1");
    if (c.max_tokens < 1) throw ConfigError("sampling.max_tokens must be at least 1");
    if (!(c.temperature >= 0.0 && c.temperature <= 2.0)) throw ConfigError("sampling.temperature must be in [0, 2]");
    for (double t : c.temperatures)
        if (!(t >= 0.0 && t <= 2.0)) throw ConfigError("temperatures must be in [0, 2]");
    switch (c.study) {
        case StudyKind::vote:
        case StudyKind::ablation:
            if (c.template_path.empty() || c.probe_path.empty()) throw ConfigError("vote studies need template and probe");
            if (c.human_vote.variable.empty()) throw ConfigError("vote studies need human_vote");
            break;
        case StudyKind::wordlist:
            if (c.template_path.empty()) throw ConfigError("word-list studies need a template");
            break;
        case StudyKind::interview:
            if (c.script_path.empty()) throw ConfigError("interview studies need a script");
            break;
        case StudyKind::temperature_sweep:
            if (c.script_path.empty()) throw ConfigError("temperature sweeps need a script");
            if (c.temperatures.empty()) throw ConfigError("temperature sweeps need temperatures");
            break;
    }
    return c;
}

ExperimentConfig load_config(const fs::path& path, const Overrides& overrides) {
    auto c = parse_config(read_text(path), path.parent_path(), overrides);
    c.path = path;
    return c;
}

std::shared_ptr<Backend> make_backend(const BackendDescriptor& d, const BackendContext& ctx) {
    if (d.kind == "mock") {
        if (d.rules.empty()) throw ConfigError("mock backend '" + d.name + "' has no rules file");
        return std::make_shared<MockBackend>(d.name, read_text(d.rules), ctx.seed);
    }
    if (d.kind == "http") return std::make_shared<HttpBackend>(d);
    if (d.kind == "echo") {
        if (!ctx.dataset || !ctx.script) throw ConfigError("echo backend '" + d.name + "' needs an interview study");
        return std::make_shared<EchoBackend>(d.name, *ctx.dataset, *ctx.script, ctx.targets, d.corruption,
                                             d.noncompliance, d.scale_with_temperature);
    }
    if (d.kind == "replay") {
        if (!ctx.cache) throw ConfigError("replay backend '" + d.name + "' needs a cache");
        return std::make_shared<ReplayBackend>(d.replay_of.empty() ? d.name : d.replay_of, ctx.cache);
    }
    throw ConfigError("unknown backend kind '" + d.kind + "'");
}

// ------------------------------------------------------------ studies

RunResult run_vote_study(const ExperimentConfig& cfg) {
    return run_study(cfg, StudyKind::vote, [&](Inputs& in, RunResult& result) {
        if (!in.probe || !in.tmpl) throw ConfigError("vote study needs template and probe");
        in.dataset.codebook().require(cfg.human_vote.variable);
        auto prepared = prepare_backends(cfg, in, true);
        std::vector<text::Row> comparison{
            {"backend", "model", "parameters", "n", "tetrachoric", "kappa", "icc", "agreement"}};
        for (auto& p : prepared) {
            auto run = run_votes(cfg, in, *in.tmpl, *p.client, p.desc.name, cfg.output_dir / safe_dir(p.desc.name), nullptr);
            const auto& whole = run.report.rows.front();
            auto f = [](const MetricResult& m) { return m.value ? text::fixed(*m.value, 4) : std::string("NA"); };
            comparison.push_back({p.desc.name, p.desc.model, p.desc.parameters, std::to_string(whole.n),
                                  f(whole.tetrachoric), f(whole.kappa), f(whole.icc), f(whole.agreement)});
            result.backends.push_back({p.desc, p.client->ledger().snapshot(), run.counts});
            result.votes.push_back(std::move(run));
        }
        write_text(cfg.output_dir / "model_comparison.csv", csv(comparison));
    });
}

RunResult run_wordlist_study(const ExperimentConfig& cfg) {
    return run_study(cfg, StudyKind::wordlist, [&](Inputs& in, RunResult& result) {
        const auto& ds = in.dataset;
        const auto& cb = ds.codebook();
        std::optional<std::size_t> ideo;
        if (!cfg.ideology_variable.empty()) ideo = cb.require(cfg.ideology_variable);
        auto ideology_of = [&](const SurveyRecord& r) -> std::string {
            if (!ideo || !r.values[*ideo]) return "";
            const auto& spec = cb[*ideo];
            for (auto& [code, label] : spec.levels)
                if (code == *r.values[*ideo]) return label;
            return *r.values[*ideo];
        };

        std::vector<GroupedWordList> human;
        if (!cfg.human_lists.empty()) {
            std::istringstream lists_in(read_text(cfg.human_lists));
            text::DelimitedReader reader(lists_in, ',');
            text::Row row;
            if (!reader.next(row)) throw ValidationError("human word lists file is empty");
            auto col = [&](const std::string& name) -> std::size_t {
                auto it = std::find(row.begin(), row.end(), name);
                if (it == row.end()) throw ValidationError("human word lists lack column '" + name + "'");
                return static_cast<std::size_t>(it - row.begin());
            };
            std::size_t cid = col("respondent_id"), ctarget = col("target_party");
            std::array<std::size_t, 4> ce{col("entry1"), col("entry2"), col("entry3"), col("entry4")};
            text::Row r;
            while (reader.next(r)) {
                GroupedWordList g;
                g.source = "human";
                g.target_party = r.at(ctarget);
                if (auto idx = ds.find(r.at(cid))) g.writer_ideology = ideology_of(ds.records()[*idx]);
                for (std::size_t k = 0; k < 4; ++k) {
                    g.list.entries[k] = text::trim(r.at(ce[k]));
                    if (!g.list.entries[k].empty()) ++g.list.count;
                }
                g.list.compliant = g.list.count > 0;
                human.push_back(std::move(g));
            }
        }

        auto prepared = prepare_backends(cfg, in, false);
        const auto& parties = cfg.target_parties;
        std::size_t n = ds.size(), P = parties.size();
        for (auto& p : prepared) {
            WordlistRun run;
            run.backend = p.desc.name;
            run.lists.resize(n * P);
            run.failed.assign(n * P, false);
            std::vector<char> cached(n * P, 0);
            std::vector<std::string> errors(n * P);
            std::size_t hits0 = p.client->cache_hits(), fetches0 = p.client->fetches();
            parallel_for(n * P, cfg.parallelism, [&](std::size_t k) {
                const auto& rec = ds.records()[k / P];
                CompletionRequest req;
                req.prompt = render_backstory(*in.tmpl, ds, rec, {{"target", parties[k % P]}});
                req.max_tokens = cfg.max_tokens;
                req.temperature = cfg.temperature;
                req.seed = cfg.seed;
                try {
                    auto got = p.client->complete(req);
                    cached[k] = got.cached;
                    run.lists[k] = extract_word_list(got.value.text);
                } catch (const TransportError& e) {
                    run.failed[k] = true;
                    errors[k] = e.what();
                } catch (const RefusalError& e) {
                    run.failed[k] = true;
                    errors[k] = e.what();
                } catch (const ReplayMissError& e) {
                    run.failed[k] = true;
                    errors[k] = e.what();
                }
            });
            auto& c = run.counts;
            c.attempts = n * P;
            std::vector<WordList> ok;
            std::vector<GroupedWordList> grouped = human;
            std::vector<text::Row> rows{
                {"respondent_id", "target_party", "entry1", "entry2", "entry3", "entry4", "count", "compliant", "status", "cached", "raw"}};
            for (std::size_t k = 0; k < n * P; ++k) {
                const auto& rec = ds.records()[k / P];
                const auto& wl = run.lists[k];
                run.respondent_ids.push_back(rec.respondent_id);
                run.target_parties.push_back(parties[k % P]);
                std::string status = run.failed[k] ? "failed" : (wl.compliant ? "ok" : "non_compliant");
                if (run.failed[k]) ++c.failures;
                else {
                    ++c.successes;
                    ok.push_back(wl);
                    if (!wl.compliant) ++c.non_compliant;
                    grouped.push_back({"silicon:" + p.desc.name, ideology_of(rec), parties[k % P], wl});
                }
                rows.push_back({rec.respondent_id, parties[k % P], wl.entries[0], wl.entries[1], wl.entries[2],
                                wl.entries[3], std::to_string(wl.count), wl.compliant ? "1" : "0", status,
                                cached[k] ? "1" : "0", text::escape_line(run.failed[k] ? errors[k] : wl.raw)});
            }
            finish_counts(c, *p.client, hits0, fetches0);
            c.queries = c.successes;
            run.histogram = entry_histogram(ok);
            run.frequencies = word_frequencies(grouped);

            fs::path dir = cfg.output_dir / safe_dir(p.desc.name);
            write_text(dir / "extraction.csv", csv(rows));
            std::vector<text::Row> hist{{"entries", "lists"}};
            for (std::size_t k = 0; k < 5; ++k) hist.push_back({std::to_string(k), std::to_string(run.histogram[k])});
            std::size_t compliant = 0;
            for (auto& wl : ok) compliant += wl.compliant;
            hist.push_back({"compliant", std::to_string(compliant)});
            hist.push_back({"non_compliant", std::to_string(ok.size() - compliant)});
            hist.push_back({"failed", std::to_string(c.failures)});
            write_text(dir / "compliance.csv", csv(hist));
            std::vector<text::Row> freq{{"source", "writer_ideology", "target_party", "word", "count", "relative_frequency"}};
            for (auto& f : run.frequencies)
                freq.push_back({f.source, f.writer_ideology, f.target_party, f.word, std::to_string(f.count),
                                text::fixed(f.relative, 4)});
            write_text(dir / "word_frequencies.csv", csv(freq));

            result.backends.push_back({p.desc, p.client->ledger().snapshot(), run.counts});
            result.wordlists.push_back(std::move(run));
        }
    });
}

RunResult run_interview_study(const ExperimentConfig& cfg) {
    return run_study(cfg, StudyKind::interview, [&](Inputs& in, RunResult& result) {
        auto prepared = prepare_backends(cfg, in, false);
        for (auto& p : prepared) {
            auto run = run_interview(cfg, in, *p.client, cfg.temperature, p.desc.name, cfg.output_dir / safe_dir(p.desc.name));
            result.backends.push_back({p.desc, p.client->ledger().snapshot(), run.counts});
            result.interviews.push_back(std::move(run));
        }
    });
}

RunResult run_temperature_sweep(const ExperimentConfig& cfg) {
    return run_study(cfg, StudyKind::temperature_sweep, [&](Inputs& in, RunResult& result) {
        auto prepared = prepare_backends(cfg, in, false);
        for (auto& p : prepared) {
            fs::path bdir = cfg.output_dir / safe_dir(p.desc.name);
            std::vector<std::pair<std::string, DifferenceSummary>> columns;
            RunCounts total;
            std::vector<text::Row> excluded{{"temperature", "variable"}};
            for (double t : cfg.temperatures) {
                auto run = run_interview(cfg, in, *p.client, t, p.desc.name, bdir / ("temp_" + temp_label(t)));
                total += run.counts;
                columns.emplace_back(temp_label(t), run.comparison.summary);
                for (auto& v : run.zero_variance) excluded.push_back({temp_label(t), v});
                result.interviews.push_back(std::move(run));
            }
            write_text(bdir / "temperature_summary.csv", reports::temperature_table(columns));
            write_text(bdir / "zero_variance.csv", csv(excluded));
            if (result.temperature_summary.empty()) result.temperature_summary = columns;
            result.backends.push_back({p.desc, p.client->ledger().snapshot(), total});
        }
    });
}

RunResult run_ablation(const ExperimentConfig& cfg) {
    return run_study(cfg, StudyKind::ablation, [&](Inputs& in, RunResult& result) {
        if (!in.probe || !in.tmpl) throw ConfigError("ablation needs template and probe");
        in.dataset.codebook().require(cfg.human_vote.variable);
        auto variants = ablation_variants(*in.tmpl, cfg.ablation);
        auto prepared = prepare_backends(cfg, in, true);
        std::vector<text::Row> rows{{"backend", "variant", "fragments", "n", "agreement", "tetrachoric"}};
        for (auto& p : prepared) {
            RunCounts total;
            for (auto& v : variants) {
                fs::path dir = cfg.output_dir / safe_dir(p.desc.name) / "variants" / safe_dir(v.label);
                auto run = run_votes(cfg, in, v.tmpl, *p.client, p.desc.name, dir, nullptr);
                total += run.counts;
                const auto& whole = run.report.rows.front();
                result.ablation.push_back({p.desc.name, v.label, v.tmpl.fragments.size(), whole.n, whole.agreement.value});
                rows.push_back({p.desc.name, v.label, std::to_string(v.tmpl.fragments.size()), std::to_string(whole.n),
                                whole.agreement.value ? text::fixed(*whole.agreement.value, 4) : "NA",
                                whole.tetrachoric.value ? text::fixed(*whole.tetrachoric.value, 4) : "NA"});
                result.votes.push_back(std::move(run));
            }
            result.backends.push_back({p.desc, p.client->ledger().snapshot(), total});
        }
        write_text(cfg.output_dir / "ablation.csv", csv(rows));
    });
}

RunResult run_experiment(const ExperimentConfig& cfg) {
    switch (cfg.study) {
        case StudyKind::wordlist: return run_wordlist_study(cfg);
        case StudyKind::vote: return run_vote_study(cfg);
        case StudyKind::interview: return run_interview_study(cfg);
        case StudyKind::ablation: return run_ablation(cfg);
        case StudyKind::temperature_sweep: return run_temperature_sweep(cfg);
    }
    throw ConfigError("unknown study");
}

CostEstimate estimate_cost(const ExperimentConfig& cfg) {
    if (!cfg.cost) throw ConfigError("config has no cost section");
    CostEstimate e;
    const auto& p = *cfg.cost;
    if (p.queries) {
        e.queries = *p.queries;
    } else {
        if (cfg.dataset.empty() || cfg.codebook.empty()) throw ConfigError("cost.queries missing and no dataset to count");
        e.queries = static_cast<std::int64_t>(load_dataset(cfg.dataset, cfg.codebook).size());
    }
    e.price_per_1k = cfg.backends.empty() ? 0.06 : cfg.backends.front().price_per_1k;
    e.targets = p.targets;
    e.tokens_per_target = e.queries * (p.avg_prompt_tokens + p.completion_tokens);
    e.cents_per_target = estimate_cost_cents(e.tokens_per_target, e.price_per_1k);
    e.total_tokens = e.tokens_per_target * e.targets;
    e.total_cents = estimate_cost_cents(e.total_tokens, e.price_per_1k);
    return e;
}

std::string render_for_record(const ExperimentConfig& cfg, const std::string& respondent_id, const std::string& target) {
    ExperimentConfig dry = cfg;
    dry.cache.reset();
    Inputs in = load_inputs(dry);
    const auto& rec = in.dataset.at(respondent_id);
    if (cfg.study == StudyKind::interview || cfg.study == StudyKind::temperature_sweep) {
        std::string t = target.empty() ? in.targets.front() : target;
        auto out = render_interview(*in.script, in.dataset, rec, t);
        if (!out) throw ValidationError("item '" + t + "' does not apply to respondent " + respondent_id);
        return *out;
    }
    if (cfg.study == StudyKind::wordlist) {
        std::string party = target.empty() ? cfg.target_parties.front() : target;
        return render_backstory(*in.tmpl, in.dataset, rec, {{"target", party}});
    }
    std::string backstory = render_backstory(*in.tmpl, in.dataset, rec);
    return in.probe ? compose_prompt(backstory, in.probe->prompt_suffix) : backstory;
}

}  // namespace silicon
