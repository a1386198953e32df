#include "silicon/stats.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <set>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/tools/roots.hpp>

namespace silicon {

namespace {

constexpr double kRhoBound = 1.0 - 1e-9;
constexpr int kPanels = 16;

bool all_integers(const std::vector<std::string>& v) {
    for (auto& s : v) {
        long long x;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
        if (ec != std::errc{} || p != s.data() + s.size()) return false;
    }
    return true;
}

std::vector<std::string> sorted_levels(std::set<std::string> seen) {
    std::vector<std::string> v(seen.begin(), seen.end());
    if (all_integers(v))
        std::sort(v.begin(), v.end(), [](const std::string& a, const std::string& b) { return std::stoll(a) < std::stoll(b); });
    return v;
}

MetricResult degenerate(const std::string& metric, const std::string& note) {
    MetricResult m;
    m.metric = metric;
    m.degenerate = true;
    m.note = note;
    return m;
}

}  // namespace

// ---------------------------------------------------------------- tables

ContingencyTable::ContingencyTable(std::vector<std::string> row_levels, std::vector<std::string> col_levels)
    : row_levels_(std::move(row_levels)), col_levels_(std::move(col_levels)), cells_(rows() * cols(), 0) {}

ContingencyTable::ContingencyTable(std::initializer_list<std::initializer_list<std::int64_t>> rows_in) {
    std::size_t c = rows_in.size() ? rows_in.begin()->size() : 0;
    for (std::size_t i = 0; i < rows_in.size(); ++i) row_levels_.push_back(std::to_string(i));
    for (std::size_t j = 0; j < c; ++j) col_levels_.push_back(std::to_string(j));
    for (auto& r : rows_in) {
        if (r.size() != c) throw ValidationError("ragged contingency table");
        for (auto v : r) {
            if (v < 0) throw ValidationError("negative count in contingency table");
            cells_.push_back(v);
        }
    }
}

std::int64_t ContingencyTable::total() const {
    std::int64_t n = 0;
    for (auto v : cells_) n += v;
    return n;
}

std::int64_t ContingencyTable::row_total(std::size_t r) const {
    std::int64_t n = 0;
    for (std::size_t c = 0; c < cols(); ++c) n += at(r, c);
    return n;
}

std::int64_t ContingencyTable::col_total(std::size_t c) const {
    std::int64_t n = 0;
    for (std::size_t r = 0; r < rows(); ++r) n += at(r, c);
    return n;
}

ContingencyTable ContingencyTable::drop_empty() const {
    std::vector<std::size_t> keep_r, keep_c;
    std::vector<std::string> rl, cl;
    for (std::size_t r = 0; r < rows(); ++r)
        if (row_total(r) > 0) {
            keep_r.push_back(r);
            rl.push_back(row_levels_[r]);
        }
    for (std::size_t c = 0; c < cols(); ++c)
        if (col_total(c) > 0) {
            keep_c.push_back(c);
            cl.push_back(col_levels_[c]);
        }
    ContingencyTable out(rl, cl);
    for (std::size_t i = 0; i < keep_r.size(); ++i)
        for (std::size_t j = 0; j < keep_c.size(); ++j) out.at(i, j) = at(keep_r[i], keep_c[j]);
    return out;
}

ContingencyTable crosstab(const CodedColumn& x, const CodedColumn& y, const std::vector<std::string>& x_levels,
                          const std::vector<std::string>& y_levels) {
    if (x.size() != y.size()) throw ValidationError("crosstab needs equal-length vectors");
    ContingencyTable t(x_levels, y_levels);
    auto find = [](const std::vector<std::string>& levels, const std::string& v) {
        auto it = std::find(levels.begin(), levels.end(), v);
        if (it == levels.end()) throw ValidationError("value '" + v + "' is not a declared level");
        return static_cast<std::size_t>(it - levels.begin());
    };
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!x[i] || !y[i]) continue;
        ++t.at(find(x_levels, *x[i]), find(y_levels, *y[i]));
        ++pairs;
    }
    if (pairs == 0) throw ValidationError("crosstab has no complete pairs");
    return t;
}

ContingencyTable crosstab(const CodedColumn& x, const CodedColumn& y) {
    std::set<std::string> xs, ys;
    for (std::size_t i = 0; i < x.size() && i < y.size(); ++i) {
        if (!x[i] || !y[i]) continue;
        xs.insert(*x[i]);
        ys.insert(*y[i]);
    }
    return crosstab(x, y, sorted_levels(xs), sorted_levels(ys));
}

std::vector<std::string> level_order(const VariableSpec& spec, const CodedColumn& values) {
    if (spec.kind == VariableKind::categorical) {
        std::vector<std::string> out;
        for (auto& [code, _] : spec.levels) out.push_back(code);
        return out;
    }
    std::set<std::string> seen;
    for (auto& v : values)
        if (v) seen.insert(*v);
    return sorted_levels(seen);
}

// ---------------------------------------------------------------- normal distributions

double normal_cdf(double x) { return 0.5 * boost::math::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw DegenerateError("normal quantile needs p in (0, 1)");
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double bvn_cdf(double h, double k, double rho) {
    if (!(rho >= -1.0 && rho <= 1.0)) throw ValidationError("correlation outside [-1, 1]");
    double base = normal_cdf(h) * normal_cdf(k);
    if (rho == 0.0) return base;
    const double upper = std::asin(rho);
    const double hk = h * k, hh_kk = h * h + k * k;
    auto integrand = [&](double theta) {
        double s = std::sin(theta), c = std::cos(theta);
        double c2 = c * c;
        if (c2 <= 0.0) return 0.0;
        return std::exp(-(hh_kk - 2.0 * hk * s) / (2.0 * c2));
    };
    double sum = 0.0;
    const double width = upper / kPanels;
    for (int p = 0; p < kPanels; ++p)
        sum += boost::math::quadrature::gauss<double, 20>::integrate(integrand, p * width, (p + 1) * width);
    return std::clamp(base + sum / (2.0 * std::numbers::pi), 0.0, 1.0);
}

// ---------------------------------------------------------------- agreement metrics

MetricResult proportion_agreement(const ContingencyTable& t) {
    if (!t.square()) throw ValidationError("proportion agreement needs a square table");
    std::int64_t n = t.total();
    if (n <= 0) throw ValidationError("proportion agreement of an empty table");
    std::int64_t diag = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) diag += t.at(i, i);
    MetricResult m;
    m.metric = "proportion_agreement";
    m.value = static_cast<double>(diag) / static_cast<double>(n);
    return m;
}

MetricResult cohens_kappa(const ContingencyTable& t) {
    if (!t.square()) throw ValidationError("Cohen's kappa needs a square table");
    const double n = static_cast<double>(t.total());
    if (n <= 0) throw ValidationError("Cohen's kappa of an empty table");
    double po = 0, pe = 0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        po += static_cast<double>(t.at(i, i)) / n;
        pe += (static_cast<double>(t.row_total(i)) / n) * (static_cast<double>(t.col_total(i)) / n);
    }
    MetricResult m;
    m.metric = "cohens_kappa";
    m.diagnostics = {{"p_observed", po}, {"p_expected", pe}};
    if (pe >= 1.0) {
        m.degenerate = true;
        m.note = "chance agreement is 1";
        return m;
    }
    m.value = (po - pe) / (1.0 - pe);
    return m;
}

MetricResult tetrachoric(const ContingencyTable& t) {
    if (t.rows() != 2 || t.cols() != 2) throw ValidationError("tetrachoric correlation needs a 2x2 table");
    double a = static_cast<double>(t.at(0, 0)), b = static_cast<double>(t.at(0, 1));
    double c = static_cast<double>(t.at(1, 0)), d = static_cast<double>(t.at(1, 1));
    MetricResult m;
    m.metric = "tetrachoric";
    if (a == 0 || b == 0 || c == 0 || d == 0) {
        a += 0.5, b += 0.5, c += 0.5, d += 0.5;
        m.corrected = true;
    }
    const double n = a + b + c + d;
    const double px = (a + b) / n, py = (a + c) / n, p00 = a / n;
    if (t.row_total(0) == 0 || t.row_total(1) == 0 || t.col_total(0) == 0 || t.col_total(1) == 0)
        throw DegenerateError("tetrachoric correlation is undefined when a margin is empty");
    const double tx = normal_quantile(px), ty = normal_quantile(py);
    auto f = [&](double rho) { return bvn_cdf(tx, ty, rho) - p00; };

    double lo = -kRhoBound, hi = kRhoBound;
    double flo = f(lo), fhi = f(hi);
    double rho;
    int iterations = 0;
    if (flo >= 0) {
        rho = lo;
    } else if (fhi <= 0) {
        rho = hi;
    } else {
        std::uintmax_t max_iter = 200;
        auto tol = [&](double x, double y) { return std::abs(y - x) < 1e-15 || std::abs(f(0.5 * (x + y))) < 1e-14; };
        auto [r0, r1] = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, max_iter);
        iterations = static_cast<int>(max_iter);
        rho = std::abs(f(r0)) <= std::abs(f(r1)) ? r0 : r1;
        double mid = 0.5 * (r0 + r1);
        if (std::abs(f(mid)) < std::abs(f(rho))) rho = mid;
    }
    m.value = std::clamp(rho, -1.0, 1.0);
    m.iterations = iterations;
    m.diagnostics = {{"tau_x", tx}, {"tau_y", ty}, {"residual", f(rho)}};
    return m;
}

MetricResult icc_pair(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw ValidationError("ICC needs paired ratings of equal length");
    const std::size_t n = x.size();
    if (n < 3) throw ValidationError("ICC needs at least three rated subjects");
    constexpr double k = 2.0;
    const double nn = static_cast<double>(n);
    double grand = 0, mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= nn;
    my /= nn;
    grand = (mx + my) / 2.0;
    double ss_rows = 0, ss_total = 0, ss_within = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double rm = (x[i] + y[i]) / 2.0;
        ss_rows += (rm - grand) * (rm - grand);
        ss_total += (x[i] - grand) * (x[i] - grand) + (y[i] - grand) * (y[i] - grand);
        ss_within += (x[i] - rm) * (x[i] - rm) + (y[i] - rm) * (y[i] - rm);
    }
    ss_rows *= k;
    const double ss_cols = nn * ((mx - grand) * (mx - grand) + (my - grand) * (my - grand));
    const double msr = ss_rows / (nn - 1);
    const double msc = ss_cols / (k - 1);
    const double msw = ss_within / (nn * (k - 1));
    const double mse = (ss_total - ss_rows - ss_cols) / ((nn - 1) * (k - 1));

    MetricResult m;
    m.metric = "icc";
    m.diagnostics = {{"ms_rows", msr}, {"ms_cols", msc}, {"ms_within", msw}, {"ms_error", mse}};
    bool const_x = std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; });
    bool const_y = std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; });
    if (const_x || const_y) {
        m.degenerate = true;
        m.note = "a rater gives a constant rating";
    }
    if (msr <= 0.0) {
        m.degenerate = true;
        m.note = "no between-subject variance";
        return m;
    }
    const double icc1 = (msr - msw) / msr;
    const double icc2 = (msr - mse) / (msr + (msc - mse) / nn);
    const double icc3 = (msr - mse) / msr;
    m.diagnostics["icc1k"] = icc1;
    m.diagnostics["icc2k"] = icc2;
    m.diagnostics["icc3k"] = icc3;
    m.value = std::min({icc1, icc2, icc3});
    return m;
}

MetricResult cramers_v(const ContingencyTable& t) {
    if (t.rows() < 2 || t.cols() < 2) throw DegenerateError("Cramer's V needs at least two levels per variable");
    const double n = static_cast<double>(t.total());
    if (n <= 0) throw DegenerateError("Cramer's V of an empty table");
    std::vector<double> rt(t.rows()), ct(t.cols());
    for (std::size_t r = 0; r < t.rows(); ++r) rt[r] = static_cast<double>(t.row_total(r));
    for (std::size_t c = 0; c < t.cols(); ++c) ct[c] = static_cast<double>(t.col_total(c));
    for (double v : rt)
        if (v == 0) throw DegenerateError("Cramer's V is undefined with an empty row");
    for (double v : ct)
        if (v == 0) throw DegenerateError("Cramer's V is undefined with an empty column");
    double chi2 = 0;
    for (std::size_t r = 0; r < t.rows(); ++r)
        for (std::size_t c = 0; c < t.cols(); ++c) {
            double e = rt[r] * ct[c] / n;
            double d = static_cast<double>(t.at(r, c)) - e;
            chi2 += d * d / e;
        }
    const double q = static_cast<double>(std::min(t.rows(), t.cols()) - 1);
    MetricResult m;
    m.metric = "cramers_v";
    m.diagnostics = {{"chi_squared", chi2}, {"n", n}};
    m.value = std::clamp(std::sqrt(chi2 / (n * q)), 0.0, 1.0);
    return m;
}

// ---------------------------------------------------------------- association matrices

std::string to_string(MatrixSource s) {
    switch (s) {
        case MatrixSource::human: return "human";
        case MatrixSource::silicon_vs_human_input: return "silicon-vs-human-input";
        case MatrixSource::fully_synthetic: return "fully-synthetic";
    }
    return "unknown";
}

std::optional<double> AssociationMatrix::at(const std::string& input, const std::string& output) const {
    auto find = [&](const std::string& v) {
        auto it = std::find(variables.begin(), variables.end(), v);
        if (it == variables.end()) throw ValidationError("matrix has no variable '" + v + "'");
        return static_cast<std::size_t>(it - variables.begin());
    };
    return values[find(input)][find(output)];
}

AssociationMatrix association_matrix(const SurveyDataset& x, const SurveyDataset& y,
                                     const std::vector<std::string>& variables, MatrixSource source) {
    if (x.size() != y.size()) throw ValidationError("association matrix needs aligned datasets");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (x.records()[i].respondent_id != y.records()[i].respondent_id)
            throw ValidationError("association matrix datasets are not aligned on respondent_id");
    const std::size_t nv = variables.size();
    AssociationMatrix m;
    m.variables = variables;
    m.source = source;
    m.observations = x.size();
    m.values.assign(nv, std::vector<std::optional<double>>(nv));
    m.flags.assign(nv, std::vector<std::string>(nv));
    std::vector<CodedColumn> xc, yc;
    std::vector<std::vector<std::string>> xl, yl;
    for (auto& v : variables) {
        xc.push_back(x.column(v));
        yc.push_back(y.column(v));
        xl.push_back(level_order(x.codebook().at(v), xc.back()));
        yl.push_back(level_order(y.codebook().at(v), yc.back()));
    }
    for (std::size_t i = 0; i < nv; ++i)
        for (std::size_t j = 0; j < nv; ++j) {
            if (i == j) continue;
            try {
                ContingencyTable t = crosstab(xc[i], yc[j], xl[i], yl[j]).drop_empty();
                m.values[i][j] = *cramers_v(t).value;
            } catch (const Error& e) {
                m.flags[i][j] = e.what();
            }
        }
    return m;
}

DifferenceSummary summarize(const std::vector<double>& d, std::size_t observations) {
    DifferenceSummary s;
    s.observations = observations;
    s.cells = d.size();
    if (d.empty()) return s;
    double sum = 0;
    for (double v : d) sum += v;
    s.mean = sum / static_cast<double>(d.size());
    s.min = *std::min_element(d.begin(), d.end());
    s.max = *std::max_element(d.begin(), d.end());
    if (d.size() > 1) {
        double ss = 0;
        for (double v : d) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / static_cast<double>(d.size() - 1));
    }
    return s;
}

MatrixComparison compare_matrices(const AssociationMatrix& human, const AssociationMatrix& silicon,
                                  const std::vector<std::string>& exclude) {
    if (human.variables != silicon.variables) throw ValidationError("matrices cover different variables");
    MatrixComparison out;
    out.excluded = exclude;
    std::vector<double> diffs;
    const auto& vars = human.variables;
    auto excluded = [&](const std::string& v) { return std::find(exclude.begin(), exclude.end(), v) != exclude.end(); };
    for (std::size_t i = 0; i < vars.size(); ++i)
        for (std::size_t j = 0; j < vars.size(); ++j) {
            if (i == j || excluded(vars[i]) || excluded(vars[j])) continue;
            const auto& h = human.values[i][j];
            const auto& s = silicon.values[i][j];
            if (!h || !s) continue;
            out.cells.push_back({vars[i], vars[j], *h, *s, *s - *h});
            diffs.push_back(*s - *h);
        }
    out.summary = summarize(diffs, silicon.observations);
    return out;
}

// ---------------------------------------------------------------- fidelity

FidelityRow fidelity_row(const std::string& name, const std::vector<int>& human, const std::vector<int>& silicon) {
    FidelityRow row;
    row.subgroup = name;
    row.n = human.size();
    row.tetrachoric.metric = "tetrachoric";
    row.kappa.metric = "cohens_kappa";
    row.icc.metric = "icc";
    row.agreement.metric = "proportion_agreement";
    if (human.empty()) return row;
    ContingencyTable t({"0", "1"}, {"0", "1"});
    for (std::size_t i = 0; i < human.size(); ++i) ++t.at(static_cast<std::size_t>(human[i]), static_cast<std::size_t>(silicon[i]));
    row.agreement = proportion_agreement(t);
    row.kappa = cohens_kappa(t);
    try {
        row.tetrachoric = tetrachoric(t);
    } catch (const DegenerateError& e) {
        row.tetrachoric = degenerate("tetrachoric", e.what());
    }
    if (human.size() >= 3) {
        std::vector<double> hx(human.begin(), human.end()), sx(silicon.begin(), silicon.end());
        row.icc = icc_pair(hx, sx);
    } else {
        row.icc = degenerate("icc", "fewer than three pairs");
    }
    return row;
}

FidelityReport subgroup_fidelity_report(const std::vector<std::optional<int>>& human_votes,
                                        const std::vector<std::optional<double>>& silicon_probs,
                                        const std::vector<NamedSubgroup>& subgroups, const SurveyDataset& dataset,
                                        bool tie_as_positive) {
    if (human_votes.size() != dataset.size() || silicon_probs.size() != dataset.size())
        throw ValidationError("vote vectors are not aligned with the dataset");
    FidelityReport report;
    for (auto& g : subgroups) {
        std::vector<int> h, s;
        std::size_t ties = 0;
        for (std::size_t i : select(dataset, g.filter)) {
            if (!human_votes[i] || !silicon_probs[i]) continue;
            double p = *silicon_probs[i];
            if (p == 0.5 && !tie_as_positive) {
                ++ties;
                continue;
            }
            h.push_back(*human_votes[i]);
            s.push_back(p > 0.5 || (p == 0.5 && tie_as_positive) ? 1 : 0);
        }
        FidelityRow row = fidelity_row(g.name, h, s);
        row.ties = ties;
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace silicon
