// One line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "silicon/experiments.hpp"
#include "silicon/probes.hpp"
#include "silicon/reports.hpp"
#include "silicon/stats.hpp"
#include "silicon/text.hpp"

using namespace silicon;
namespace fs = std::filesystem;

namespace {

struct Check {
    std::ostringstream why;
    bool ok = true;

    void expect(bool cond, const std::string& msg) {
        if (!cond && ok) why << msg;
        ok = ok && cond;
    }
    void near(double got, double want, double tol, const std::string& what) {
        if (std::fabs(got - want) > tol) {
            std::ostringstream s;
            s << std::setprecision(12) << what << ": got " << got << ", want " << want << " +- " << tol;
            expect(false, s.str());
        }
    }
};

std::string num(double v) {
    std::ostringstream s;
    s << std::setprecision(6) << v;
    return s.str();
}

ContingencyTable table2(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) { return {{a, b}, {c, d}}; }

// ---------------------------------------------------------------- 1

void latent_correlation_recovery(Check& c) {
    auto start = std::chrono::steady_clock::now();
    std::mt19937_64 rng(20220101);
    std::normal_distribution<double> z;
    const std::array<std::pair<double, double>, 2> margins{{{0.5, 0.5}, {0.7, 0.3}}};
    for (double rho : {-0.8, -0.3, 0.0, 0.3, 0.5, 0.9}) {
        for (auto [px, py] : margins) {
            double tx = oracle::quantile(1 - px), ty = oracle::quantile(1 - py);
            std::int64_t n[2][2] = {{0, 0}, {0, 0}};
            for (int i = 0; i < 200000; ++i) {
                double a = z(rng), e = z(rng);
                double b = rho * a + std::sqrt(1 - rho * rho) * e;
                ++n[a > tx][b > ty];
            }
            double est = *tetrachoric(table2(n[0][0], n[0][1], n[1][0], n[1][1])).value;
            c.near(est, rho, 0.02, "rho " + num(rho) + " margins " + num(px) + "/" + num(py));
        }
    }
    std::uniform_int_distribution<int> cell(0, 20);
    int compared = 0;
    while (compared < 100) {
        std::int64_t a = cell(rng), b = cell(rng), cc = cell(rng), d = cell(rng);
        if (a + b == 0 || cc + d == 0 || a + cc == 0 || b + d == 0) continue;
        double ours = *tetrachoric(table2(a, b, cc, d)).value;
        double ref = oracle::tetrachoric_grid({double(a), double(b), double(cc), double(d)});
        c.near(ours, ref, 1e-3,
               "table [[" + std::to_string(a) + "," + std::to_string(b) + "],[" + std::to_string(cc) + "," +
                   std::to_string(d) + "]]");
        ++compared;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.expect(secs < 30, "took " + num(secs) + " s");
}

// ---------------------------------------------------------------- 2

void orthant_identity(Check& c) {
    for (int i = -999; i <= 999; i += 3) {
        double rho = i / 1000.0;
        c.near(bvn_cdf(0, 0, rho), 0.25 + std::asin(rho) / (2 * oracle::pi), 1e-10, "rho " + num(rho));
    }
}

// ---------------------------------------------------------------- 3

void hand_tables(Check& c) {
    auto t = table2(20, 5, 10, 15);
    c.near(*cohens_kappa(t).value, 0.4, 1e-12, "kappa");
    c.near(*proportion_agreement(t).value, 0.7, 1e-12, "agreement");
    c.near(*cramers_v(table2(30, 10, 10, 30)).value, 0.5, 1e-12, "V 30/10");
    ContingencyTable diag{{10, 0, 0}, {0, 12, 0}, {0, 0, 7}};
    c.near(*cramers_v(diag).value, 1.0, 1e-12, "V diagonal");
    ContingencyTable flat{{5, 5, 5}, {5, 5, 5}};
    c.near(*cramers_v(flat).value, 0.0, 1e-12, "V uniform");
}

// ---------------------------------------------------------------- 4

void icc_fixture(Check& c) {
    // grand mean 0.6; SSR 3.8, SSC 0, SSE 1.0 over 10 pairs
    std::vector<double> x{1, 0, 1, 1, 0, 1, 0, 0, 1, 1}, y{1, 0, 1, 0, 0, 1, 1, 0, 1, 1};
    const double msr = 19.0 / 45, msc = 0, mse = 1.0 / 9, msw = 1.0 / 10, n = 10;
    double icc1 = (msr - msw) / msr, icc2 = (msr - mse) / (msr + (msc - mse) / n), icc3 = (msr - mse) / msr;
    auto r = icc_pair(x, y);
    c.near(icc1, 29.0 / 38, 1e-12, "hand ICC1k");
    c.near(icc2, 28.0 / 37, 1e-12, "hand ICC2k");
    c.near(icc3, 14.0 / 19, 1e-12, "hand ICC3k");
    c.near(*r.value, std::min({icc1, icc2, icc3}), 1e-12, "reported ICC");
    c.near(r.diagnostics.at("icc1k"), icc1, 1e-12, "ICC1k");
    c.near(r.diagnostics.at("icc2k"), icc2, 1e-12, "ICC2k");
    c.near(r.diagnostics.at("icc3k"), icc3, 1e-12, "ICC3k");

    // rater bias separates the three forms: grand mean 0.7; SSR 3.2, SSC 0.2, SSE 0.8
    std::vector<double> y2{1, 1, 1, 1, 0, 1, 1, 0, 1, 1};
    const double msr2 = 16.0 / 45, msc2 = 0.2, mse2 = 4.0 / 45, msw2 = 0.1;
    double a = (msr2 - msw2) / msr2, b = (msr2 - mse2) / (msr2 + (msc2 - mse2) / n), d = (msr2 - mse2) / msr2;
    auto r2 = icc_pair(x, y2);
    c.near(r2.diagnostics.at("icc1k"), a, 1e-12, "biased ICC1k");
    c.near(r2.diagnostics.at("icc2k"), b, 1e-12, "biased ICC2k");
    c.near(r2.diagnostics.at("icc3k"), d, 1e-12, "biased ICC3k");
    c.near(*r2.value, std::min({a, b, d}), 1e-12, "biased reported ICC");
}

// ---------------------------------------------------------------- 5

void normalization_invariance(Check& c) {
    Probe probe = parse_probe(R"({"prompt_suffix": "x", "positive": "Trump", "candidates": [
        {"label": "Trump", "surfaces": ["trump", "donald"]},
        {"label": "Clinton", "surfaces": ["clinton", "hillary"]},
        {"label": "Other", "surfaces": ["johnson"]}]})");
    std::vector<std::string> members{"Trump", " Trump", "trump", " donald", "DONALD", "Clinton", " clinton",
                                     "Hillary ", "johnson", " Johnson"};
    std::vector<std::string> noise{"the", " a", "\n", "Mr", " Gary", "vote", ",", " nobody"};
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(0.001, 1.0);
    for (int trial = 0; trial < 1000; ++trial) {
        NextTokenDistribution d;
        double total = 0;
        std::vector<double> w;
        for (auto& m : members) {
            if (u(rng) < 0.3) continue;
            w.push_back(u(rng));
            d.logprobs.push_back({m, 0});
        }
        if (d.logprobs.empty()) d.logprobs.push_back({"Trump", 0}), w.push_back(1);
        for (double v : w) total += v;
        for (std::size_t i = 0; i < w.size(); ++i) d.logprobs[i].second = std::log(w[i] / (total * 1.4));
        auto base = normalize(collapse(d, probe));
        double sum = 0;
        for (double p : base.probs) sum += p;
        c.near(sum, 1.0, 1e-12, "sum trial " + std::to_string(trial));

        NextTokenDistribution noisy = d;
        for (auto& t : noise)
            if (u(rng) < 0.6) noisy.logprobs.push_back({t, std::log(u(rng) * 0.05)});
        std::shuffle(noisy.logprobs.begin(), noisy.logprobs.end(), rng);
        auto again = normalize(collapse(noisy, probe));
        for (std::size_t i = 0; i < base.probs.size(); ++i)
            c.near(again.probs[i], base.probs[i], 1e-12, "ignored tokens changed trial " + std::to_string(trial));
    }
}

// ---------------------------------------------------------------- shared vote-study fixture

const char* kParty[] = {"a strong Democrat",
                        "a weak Democrat",
                        "an independent who leans Democratic",
                        "an independent",
                        "an independent who leans Republican",
                        "a weak Republican",
                        "a strong Republican"};

std::string study2_row(const std::string& id, int party, std::mt19937_64& rng, const std::string& vote) {
    std::uniform_int_distribution<int> race(1, 6), gender(1, 2), age(18, 90), seven(1, 7), four(1, 4), bin(0, 1);
    static const char* states[] = {"Utah", "Ohio", "Texas", "Maine", "Iowa", "Nevada"};
    std::ostringstream s;
    s << id << ',' << race(rng) << ',' << gender(rng) << ',' << age(rng) << ',' << seven(rng) << ',' << party << ','
      << four(rng) << ',' << bin(rng) << ',' << bin(rng) << ',' << seven(rng) << ',' << states[rng() % 6] << ','
      << vote << '\n';
    return s.str();
}

const char* kStudy2Header = "respondent_id,race,gender,age,ideology,party,interest,church,discuss,flag,state,vote\n";

std::string data_path(const std::string& rel) { return (oracle::source_dir() / "data" / rel).string(); }

// ---------------------------------------------------------------- 6

void mock_recovery(Check& c) {
    fs::path dir = oracle::fresh_dir("recovery");
    // party-conditional mock: strong partisans fixed, everyone else noisy
    nlohmann::json rules = {
        {"rules",
         {{{"when", {{"regex", "a strong Republican"}}},
           {"probabilities", {{"Trump", 0.95 * 0.9}, {" Clinton", 0.05 * 0.9}, {"the", 0.1}}}},
          {{"when", {{"regex", "a strong Democrat"}}},
           {"probabilities", {{"Trump", 0.05 * 0.8}, {"Clinton", 0.95 * 0.8}, {" a", 0.2}}}},
          {{"default", true}, {"noisy_binary", {{"tokens", {"Trump", "Clinton"}}, {"center", 0.5}, {"spread", 0.45}}}}}}};
    oracle::write_file(dir / "mock.json", rules.dump(2));

    nlohmann::json cfgj = {{"study", "vote"},
                           {"dataset", (dir / "people.csv").string()},
                           {"codebook", data_path("codebooks/study2_2016.json")},
                           {"template", data_path("templates/study2_2016.json")},
                           {"probe", data_path("probes/study2_2016.json")},
                           {"human_vote", {{"variable", "vote"}, {"republican", {"2"}}, {"democrat", {"1"}}}},
                           {"backends", {{{"name", "party-mock"}, {"kind", "mock"}, {"rules", (dir / "mock.json").string()}}}},
                           {"seed", 11},
                           {"parallelism", 4},
                           {"output_dir", (dir / "out").string()}};

    // first pass: people without votes, to learn the mock's exact p per record
    std::mt19937_64 rng(4242);
    const int n = 3000;
    std::vector<std::string> rows;
    std::vector<int> parties;
    for (int i = 0; i < n; ++i) {
        int party = 1 + static_cast<int>(rng() % 7);
        parties.push_back(party);
        rows.push_back(study2_row("V" + std::to_string(i), party, rng, "@"));
    }
    auto with_votes = [&](const std::vector<std::string>& votes) {
        std::string csv = kStudy2Header;
        for (int i = 0; i < n; ++i) {
            std::string r = rows[i];
            r.replace(r.find('@'), 1, votes[i]);
            csv += r;
        }
        oracle::write_file(dir / "people.csv", csv);
    };
    with_votes(std::vector<std::string>(n, "-9"));

    ExperimentConfig cfg = parse_config(cfgj.dump(), dir);
    SurveyDataset people = load_dataset(cfg.dataset, cfg.codebook);
    PersonaTemplate tmpl = load_template(cfg.template_path);
    auto backend = make_backend(cfg.backends[0], BackendContext{nullptr, nullptr, {}, nullptr, cfg.seed});
    std::vector<double> p(n);
    for (int i = 0; i < n; ++i) {
        std::string prompt = render_backstory(tmpl, people, people.records()[i]) + " In 2016, I voted for";
        auto dist = backend->next_token_logprobs(prompt, 100);
        double rep = 0, dem = 0;
        for (auto& [tok, lp] : dist.logprobs) {
            if (tok == "Trump") rep += std::exp(lp);
            if (tok == "Clinton" || tok == " Clinton") dem += std::exp(lp);
        }
        p[i] = rep / (rep + dem);
        if (parties[i] == 7) c.near(p[i], 0.95, 1e-12, "strong Republican p");
        if (parties[i] == 1) c.near(p[i], 0.05, 1e-12, "strong Democrat p");
    }

    // human votes ~ Bernoulli(p)
    std::bernoulli_distribution coin;
    std::vector<std::string> votes(n);
    oracle::Table2 expected{0, 0, 0, 0};  // rows human D/R, cols silicon D/R
    double agree = 0, counted = 0;
    for (int i = 0; i < n; ++i) {
        votes[i] = std::bernoulli_distribution(p[i])(rng) ? "2" : "1";
        if (p[i] == 0.5) continue;
        bool s = p[i] > 0.5;
        (s ? expected.n11 : expected.n01) += p[i];
        (s ? expected.n10 : expected.n00) += 1 - p[i];
        agree += s ? p[i] : 1 - p[i];
        counted += 1;
    }
    with_votes(votes);
    double want_tetra = oracle::tetrachoric_bisect(expected);
    double want_agree = agree / counted;

    setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
    RunResult first = run_vote_study(cfg);
    auto files = oracle::snapshot(cfg.output_dir);
    const FidelityRow& whole = first.votes.at(0).report.rows.at(0);
    c.near(*whole.tetrachoric.value, want_tetra, 0.05, "tetrachoric vs brute force");
    c.near(*whole.agreement.value, want_agree, 0.02, "agreement vs brute force");

    RunResult second = run_vote_study(cfg);
    auto again = oracle::snapshot(cfg.output_dir);
    c.expect(files.size() > 3, "too few output files");
    c.expect(files == again, "second run differs from the first");
    for (auto& [name, body] : files)
        if (again[name] != body) c.expect(false, name + " differs between runs");
    fs::remove_all(dir);
}

// ---------------------------------------------------------------- 7

void echo_identity(Check& c) {
    fs::path dir = oracle::fresh_dir("echo");
    auto cfgj = nlohmann::json::parse(oracle::read_file(oracle::source_dir() / "data/configs/study3.json"));
    cfgj["dataset"] = data_path("examples/study3.csv");
    cfgj["codebook"] = data_path("codebooks/study3.json");
    cfgj["script"] = data_path("scripts/study3_2016.json");
    cfgj["backends"] = {{{"name", "echo"}, {"kind", "echo"}, {"corruption", 0.0}, {"noncompliance", 0.0}}};
    cfgj["output_dir"] = (dir / "out").string();
    ExperimentConfig cfg = parse_config(cfgj.dump(), dir);
    RunResult r = run_interview_study(cfg);
    const InterviewRun& run = r.interviews.at(0);
    SurveyDataset human = load_dataset(cfg.dataset, cfg.codebook);
    std::size_t compared = 0;
    for (auto& var : run.silicon.codebook().variables()) {
        auto h = human.column(var.name), s = run.silicon.column(var.name);
        c.expect(h == s, "silicon column " + var.name + " differs from the human one");
        compared += h.size();
    }
    c.expect(compared > 0, "nothing compared");
    c.expect(run.comparison.summary.cells > 0, "no matrix cells compared");
    c.near(run.comparison.summary.mean, 0.0, 0.0, "mean difference");
    c.near(run.comparison.summary.min, 0.0, 0.0, "min difference");
    c.near(run.comparison.summary.max, 0.0, 0.0, "max difference");
    fs::remove_all(dir);
}

// ---------------------------------------------------------------- 8

void template_goldens(Check& c) {
    fs::path fixtures = oracle::source_dir() / "tests/fixtures/render";
    std::map<std::string, ExperimentConfig> configs;
    for (const char* s : {"study1", "study2", "study3"})
        configs[s] = load_config(fixtures / (std::string(s) + ".json"));
    std::size_t seen = 0;
    for (auto& e : fs::directory_iterator(oracle::source_dir() / "tests/golden/render")) {
        std::string stem = e.path().stem().string();
        auto parts = text::split(stem, '_');
        std::string study = parts.at(0), id = parts.at(1), target = parts.size() > 2 ? parts.at(2) : "";
        std::string got = render_for_record(configs.at(study), id, target);
        std::string want = oracle::strip_newline(oracle::read_file(e.path()));
        c.expect(got == want, stem + " does not match its golden file:\n" + got);
        ++seen;
    }
    c.expect(seen >= 25, "only " + std::to_string(seen) + " golden files");
}

// ---------------------------------------------------------------- 9

void ablation_sensitivity(Check& c) {
    fs::path dir = oracle::fresh_dir("ablation");
    nlohmann::json rules = {{"rules", nlohmann::json::array()}};
    const double lean[] = {0.1, 0.2, 0.3, 0.55, 0.7, 0.8, 0.9};
    for (int k = 0; k < 7; ++k) {
        double pr = lean[k];
        rules["rules"].push_back({{"when", {{"regex", std::string("Politically, I am ") + kParty[k] + "\\."}}},
                                  {"probabilities", {{"Trump", pr}, {"Clinton", 1 - pr}}}});
    }
    rules["rules"].push_back({{"default", true}, {"probabilities", {{"Trump", 0.6}, {"Clinton", 0.4}}}});
    oracle::write_file(dir / "mock.json", rules.dump(2));

    std::mt19937_64 rng(77);
    std::string csv = kStudy2Header;
    for (int i = 0; i < 700; ++i) {
        int party = 1 + static_cast<int>(rng() % 7);
        bool rep = std::bernoulli_distribution(lean[party - 1])(rng);
        csv += study2_row("A" + std::to_string(i), party, rng, rep ? "2" : "1");
    }
    oracle::write_file(dir / "people.csv", csv);
    nlohmann::json cfgj = {{"study", "ablation"},
                           {"dataset", (dir / "people.csv").string()},
                           {"codebook", data_path("codebooks/study2_2016.json")},
                           {"template", data_path("templates/study2_2016.json")},
                           {"probe", data_path("probes/study2_2016.json")},
                           {"human_vote", {{"variable", "vote"}, {"republican", {"2"}}, {"democrat", {"1"}}}},
                           {"backends", {{{"name", "party-only"}, {"kind", "mock"}, {"rules", (dir / "mock.json").string()}}}},
                           {"parallelism", 4},
                           {"output_dir", (dir / "out").string()}};
    ExperimentConfig cfg = parse_config(cfgj.dump(), dir);
    auto variants = ablation_variants(load_template(cfg.template_path), cfg.ablation);
    std::set<std::string> labels;
    for (auto& v : variants) labels.insert(v.label);
    c.expect(variants.size() == 67, "variant count " + std::to_string(variants.size()));
    c.expect(labels.size() == 67, "variant labels are not unique");

    RunResult r = run_ablation(cfg);
    std::map<std::string, double> agree;
    for (auto& row : r.ablation) agree[row.label] = row.agreement.value_or(-1);
    c.expect(agree.size() == 67, "ablation rows " + std::to_string(agree.size()));
    double full = agree["full"], none = agree["none"];
    c.expect(full > none + 0.1, "party signal missing: full " + num(full) + " none " + num(none));
    c.expect(agree["without:party"] == none, "removing party gives " + num(agree["without:party"]));
    for (auto& [label, a] : agree) {
        bool has_party = label == "full" || label == "only:party" ||
                         (label.rfind("without:", 0) == 0 && label.find("party") == std::string::npos);
        c.expect(a == (has_party ? full : none), label + " agreement " + num(a));
    }
    fs::remove_all(dir);
}

// ---------------------------------------------------------------- 10

void cost_arithmetic(Check& c) {
    ExperimentConfig cfg = load_config(oracle::source_dir() / "data/configs/study3.json");
    CostEstimate e = estimate_cost(cfg);
    // 4270 x (458 + 5) = 1,977,010 tokens; at 6 cents per 1k that is 11862.06 cents
    c.expect(e.tokens_per_target == 1977010, "tokens " + std::to_string(e.tokens_per_target));
    c.expect(format_dollars(e.cents_per_target) == "$118.63", "per target " + format_dollars(e.cents_per_target));
    c.expect(format_dollars(e.total_cents) == "$1423.45", "total " + format_dollars(e.total_cents));
    c.expect(std::fabs(e.cents_per_target / 100.0 - 119) <= 1, "per target not within $1 of $119");
    c.expect(std::fabs(e.total_cents / 100.0 - 1428) <= 12, "total not within $12 of $1428");
}

// ---------------------------------------------------------------- 11

void verify_plan(Check& c, const EvaluationPlan& plan, std::size_t lists, std::size_t raters, std::size_t per_rater,
                 std::size_t per_list, const std::string& tag) {
    std::vector<std::size_t> cover(lists, 0);
    c.expect(plan.raters.size() == raters, tag + ": rater count");
    for (auto& r : plan.raters) {
        std::set<std::size_t> u(r.begin(), r.end());
        c.expect(r.size() == per_rater && u.size() == per_rater, tag + ": rater load or repeat");
        for (auto i : r) {
            c.expect(i < lists, tag + ": bad index");
            if (i < lists) ++cover[i];
        }
    }
    for (auto k : cover) c.expect(k + 1 >= per_list && k <= per_list + 1, tag + ": coverage " + std::to_string(k));
    c.expect(cover == plan.coverage, tag + ": reported coverage differs");
}

void evaluation_plan(Check& c) {
    std::vector<std::string> ids;
    for (int i = 0; i < 7675; ++i) ids.push_back("L" + std::to_string(i));
    EvaluationPlan plan = build_evaluation_plan(ids, 2873, 8, 3, 1);
    verify_plan(c, plan, 7675, 2873, 8, 3, "7675 lists");
    std::size_t exact = std::count(plan.coverage.begin(), plan.coverage.end(), std::size_t{3});
    c.expect(exact >= 0.98 * 7675, "only " + std::to_string(exact) + " lists rated exactly 3 times");

    std::mt19937_64 rng(123);
    int built = 0;
    while (built < 100) {
        std::size_t L = 5 + rng() % 400, pl = 1 + rng() % 4, pr = 1 + rng() % std::min<std::size_t>(L, 12);
        // raters whose slot count lands within one rating of the target everywhere
        std::size_t lo = (L * (pl - 1) + pr - 1) / pr, hi = L * (pl + 1) / pr;
        lo = std::max(lo, std::size_t{1});
        if (lo > hi) continue;
        std::size_t R = lo + rng() % (hi - lo + 1);
        if ((R * pr + L - 1) / L > R) continue;
        std::vector<std::string> sub(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(L));
        try {
            auto p = build_evaluation_plan(sub, R, pr, pl, rng());
            verify_plan(c, p, L, R, pr, pl, std::to_string(L) + "/" + std::to_string(R));
        } catch (const std::exception& e) {
            c.expect(false, std::to_string(L) + "/" + std::to_string(R) + ": " + e.what());
        }
        ++built;
    }
}

// ---------------------------------------------------------------- 12

std::vector<int> expand(std::int64_t n, int v) { return std::vector<int>(static_cast<std::size_t>(n), v); }

void published_layouts(Check& c) {
    // yearly subgroup fidelity from searched 2x2 tables
    std::map<std::string, FidelityReport> years;
    std::istringstream fixture(oracle::read_file(oracle::source_dir() / "tests/fixtures/yearly_fidelity_tables.csv"));
    std::string line;
    std::getline(fixture, line);
    while (std::getline(fixture, line)) {
        auto f = text::split(line, ',');
        std::int64_t n00 = std::stoll(f[2]), n01 = std::stoll(f[3]), n10 = std::stoll(f[4]), n11 = std::stoll(f[5]);
        std::vector<int> human, silicon;
        auto add = [&](std::int64_t k, int h, int s) {
            auto a = expand(k, h), b = expand(k, s);
            human.insert(human.end(), a.begin(), a.end());
            silicon.insert(silicon.end(), b.begin(), b.end());
        };
        add(n00, 0, 0), add(n01, 0, 1), add(n10, 1, 0), add(n11, 1, 1);
        years[f[0]].rows.push_back(fidelity_row(f[1], human, silicon));
    }
    std::string yearly = reports::yearly_fidelity_table(
        {{"2012", years["2012"]}, {"2016", years["2016"]}, {"2020", years["2020"]}});
    c.expect(yearly == oracle::read_file(oracle::source_dir() / "tests/golden/tables/yearly_fidelity.csv"),
             "yearly fidelity table differs:\n" + yearly);

    // temperature summary: constructed difference cells through the matrix comparison
    std::vector<std::string> vars{"age", "church", "discuss", "race", "education", "gender",
                                  "ideology", "patriotism", "party", "interest", "vote_choice"};
    struct Target {
        std::string label;
        double mean, min, max, sd;
        std::size_t n;
        std::vector<std::string> exclude;
    };
    std::vector<Target> targets{{"0.001", 0.059, -0.123, 0.700, 0.141, 2518, {"vote_choice"}},
                                {"0.7", -0.026, -0.241, 0.168, 0.068, 1782, {}},
                                {"1.0", -0.031, -0.250, 0.119, 0.070, 1022, {}}};
    std::vector<std::pair<std::string, DifferenceSummary>> cols;
    for (auto& t : targets) {
        std::size_t k = vars.size() - t.exclude.size();
        std::size_t cells = k * (k - 1);
        double m = static_cast<double>(cells);
        double centre = (m * t.mean - t.min - t.max) / (m - 2);
        double spread2 = ((m - 1) * t.sd * t.sd - std::pow(t.min - t.mean, 2) - std::pow(t.max - t.mean, 2)) / (m - 2) -
                         std::pow(centre - t.mean, 2);
        double e = std::sqrt(spread2);
        std::vector<double> d{t.min, t.max};
        while (d.size() < cells) d.push_back(centre + e), d.push_back(centre - e);
        AssociationMatrix h, s;
        h.variables = s.variables = vars;
        h.values.assign(vars.size(), std::vector<std::optional<double>>(vars.size()));
        s.values = h.values;
        h.flags.assign(vars.size(), std::vector<std::string>(vars.size()));
        s.flags = h.flags;
        s.source = MatrixSource::silicon_vs_human_input;
        h.observations = s.observations = t.n;
        std::size_t next = 0;
        for (std::size_t i = 0; i < vars.size(); ++i)
            for (std::size_t j = 0; j < vars.size(); ++j) {
                if (i == j) continue;
                h.values[i][j] = 0.3;
                bool out = std::count(t.exclude.begin(), t.exclude.end(), vars[i]) ||
                           std::count(t.exclude.begin(), t.exclude.end(), vars[j]);
                s.values[i][j] = out ? 0.9 : 0.3 + d[next++];
            }
        auto cmp = compare_matrices(h, s, t.exclude);
        c.expect(cmp.summary.cells == cells, "cells " + std::to_string(cmp.summary.cells));
        cols.emplace_back(t.label, cmp.summary);
    }
    std::string temp = reports::temperature_table(cols);
    c.expect(temp == oracle::read_file(oracle::source_dir() / "tests/golden/tables/temperature_summary.csv"),
             "temperature table differs:\n" + temp);

    // missingness over 4270 records
    struct Miss {
        std::string var, label;
        double human, silicon;
    };
    std::vector<Miss> miss{{"age", "Age", 4.7, 2.8},
                           {"church", "Attends Church", 0, 0.4},
                           {"discuss", "Discusses Politics", 0.1, 14.6},
                           {"race", "Race", 0.1, 5.6},
                           {"education", "Education", 14.3, 1},
                           {"gender", "Gender", 0, 1.2},
                           {"ideology", "Ideology", 4.2, 22.6},
                           {"patriotism", "Patriotism", 0.7, 14.6},
                           {"party", "Party ID", 3.6, 0.5},
                           {"interest", "Political Interest", 1.1, 14.8},
                           {"vote_choice", "2016 Vote and Choice", 0.5, 23.8}};
    Codebook cb = load_codebook(oracle::source_dir() / "data/codebooks/study3.json");
    // missing cells of both sources are dealt cyclically over the first 4270 - 1782
    // records, so exactly 1782 records stay complete in both
    const std::size_t broken = 4270 - 1782;
    std::size_t cursor = 0;
    auto build = [&](bool human) {
        std::vector<SurveyRecord> recs(4270);
        for (std::size_t r = 0; r < recs.size(); ++r) {
            recs[r].respondent_id = "R" + std::to_string(r);
            recs[r].values.assign(cb.size(), std::optional<std::string>("1"));
        }
        for (auto& m : miss) {
            auto k = static_cast<std::size_t>(std::llround((human ? m.human : m.silicon) * 42.7));
            std::size_t col = cb.require(m.var);
            for (std::size_t r = 0; r < k; ++r) recs[cursor++ % broken].values[col].reset();
        }
        return SurveyDataset(cb, std::move(recs));
    };
    SurveyDataset hd = build(true), sd = build(false);
    std::vector<std::string> names;
    for (auto& m : miss) names.push_back(m.var);
    auto [hc, sc] = complete_cases(hd, sd, names);
    c.expect(hc.size() == 1782 && sc.size() == 1782, "complete cases " + std::to_string(hc.size()));
    auto hm = missingness_report(hd, names), sm = missingness_report(sd, names);
    std::vector<reports::MissingnessPair> pairs;
    for (std::size_t i = 0; i < miss.size(); ++i) pairs.push_back({miss[i].label, hm[i].percent, sm[i].percent});
    std::string table = reports::missingness_table(pairs, "ANES", "GPT-3");
    c.expect(table == oracle::read_file(oracle::source_dir() / "tests/golden/tables/missingness.csv"),
             "missingness table differs:\n" + table);
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        void (*fn)(Check&);
    };
    const Criterion all[] = {
        {1, "tetrachoric recovers latent correlation and matches likelihood grid", latent_correlation_recovery},
        {2, "bivariate normal orthant identity", orthant_identity},
        {3, "kappa, agreement and Cramer's V on hand tables", hand_tables},
        {4, "ICC against hand ANOVA mean squares", icc_fixture},
        {5, "candidate normalization sums to one and ignores stray tokens", normalization_invariance},
        {6, "mock recovery end to end and byte-identical reruns", mock_recovery},
        {7, "echo backend reproduces the human data", echo_identity},
        {8, "rendered conditioning text matches golden files", template_goldens},
        {9, "ablation variants and party-only sensitivity", ablation_sensitivity},
        {10, "cost arithmetic", cost_arithmetic},
        {11, "evaluation plan coverage", evaluation_plan},
        {12, "published table layouts reproduce byte for byte", published_layouts},
    };
    int failures = 0;
    for (auto& cr : all) {
        Check c;
        try {
            cr.fn(c);
        } catch (const std::exception& e) {
            c.expect(false, std::string("exception: ") + e.what());
        }
        std::cout << (c.ok ? "PASS" : "FAIL") << "  " << std::setw(2) << cr.id << "  " << cr.name;
        if (!c.ok) std::cout << "  (" << c.why.str() << ")";
        std::cout << std::endl;
        failures += !c.ok;
    }
    return failures;
}
