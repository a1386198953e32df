#pragma once

// Reference implementations used only by tests. They deliberately take a
// different numerical route than the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#ifndef SILICON_SOURCE_DIR
#define SILICON_SOURCE_DIR "."
#endif

namespace oracle {

inline constexpr double pi = 3.14159265358979323846;

inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi); }

// Acklam's rational approximation, polished with two Newton steps.
inline double quantile(double p) {
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                               1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                               6.680131188771972e+01, -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                               -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                               3.754408661907416e+00};
    double x;
    if (p < 0.02425) {
        double q = std::sqrt(-2 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else if (p > 1 - 0.02425) {
        double q = std::sqrt(-2 * std::log(1 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    } else {
        double q = p - 0.5, r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
    }
    for (int i = 0; i < 2; ++i) x -= (phi(x) - p) / density(x);
    return x;
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                               double fb, double whole, double eps, int depth) {
    double m = 0.5 * (a + b), lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6 * (fa + 4 * flm + fm), right = (b - m) / 6 * (fm + 4 * frm + fb);
    double delta = left + right - whole;
    if (depth <= 0 || std::fabs(delta) <= 15 * eps) return left + right + delta / 15;
    return adaptive_simpson(f, a, m, fa, flm, fm, left, eps / 2, depth - 1) +
           adaptive_simpson(f, m, b, fm, frm, fb, right, eps / 2, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b, double eps = 1e-14) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    return adaptive_simpson(f, a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), eps, 50);
}

// P(X <= h, Y <= k): independence term plus the integral of the bivariate
// density over the correlation parameter (d/drho of the CDF is the density).
inline double bvn(double h, double k, double rho) {
    auto dens = [&](double r) {
        double s = 1 - r * r;
        return std::exp(-(h * h - 2 * r * h * k + k * k) / (2 * s)) / (2 * pi * std::sqrt(s));
    };
    double base = phi(h) * phi(k);
    if (rho == 0) return base;
    // split so the peak near |rho| -> 1 is resolved
    double mid = rho * 0.9;
    return base + integrate(dens, 0, mid) + integrate(dens, mid, rho);
}

struct Table2 {
    double n00, n01, n10, n11;  // rows: first variable 0/1, columns: second variable 0/1
};

inline Table2 corrected(Table2 t) {
    if (t.n00 == 0 || t.n01 == 0 || t.n10 == 0 || t.n11 == 0) {
        t.n00 += 0.5;
        t.n01 += 0.5;
        t.n10 += 0.5;
        t.n11 += 0.5;
    }
    return t;
}

inline double log_likelihood(const Table2& t, double hx, double hy, double rho) {
    double p00 = bvn(hx, hy, rho);
    double p0_ = phi(hx), p_0 = phi(hy);
    double p01 = p0_ - p00, p10 = p_0 - p00, p11 = 1 - p0_ - p_0 + p00;
    auto term = [](double n, double p) { return n > 0 ? n * std::log(std::max(p, 1e-300)) : 0.0; };
    return term(t.n00, p00) + term(t.n01, p01) + term(t.n10, p10) + term(t.n11, p11);
}

// Two-step estimate: thresholds from the margins, then a grid search of the
// multinomial likelihood over rho (coarse, then 1e-5 around the best point).
inline double tetrachoric_grid(Table2 raw) {
    Table2 t = corrected(raw);
    double n = t.n00 + t.n01 + t.n10 + t.n11;
    double hx = quantile((t.n00 + t.n01) / n), hy = quantile((t.n00 + t.n10) / n);
    double best = 0, best_ll = -INFINITY;
    for (int i = -999; i <= 999; ++i) {
        double r = i / 1000.0;
        double ll = log_likelihood(t, hx, hy, r);
        if (ll > best_ll) best_ll = ll, best = r;
    }
    double lo = std::max(-0.99999, best - 0.001), hi = std::min(0.99999, best + 0.001);
    for (double r = lo; r <= hi; r += 1e-5) {
        double ll = log_likelihood(t, hx, hy, r);
        if (ll > best_ll) best_ll = ll, best = r;
    }
    return best;
}

// Same estimator for real-valued (expected) counts, solved by bisection on the
// first cell since the two-step model reproduces it exactly.
inline double tetrachoric_bisect(Table2 raw) {
    Table2 t = corrected(raw);
    double n = t.n00 + t.n01 + t.n10 + t.n11;
    double hx = quantile((t.n00 + t.n01) / n), hy = quantile((t.n00 + t.n10) / n), p00 = t.n00 / n;
    double lo = -0.999999, hi = 0.999999;
    for (int i = 0; i < 200; ++i) {
        double mid = 0.5 * (lo + hi);
        (bvn(hx, hy, mid) < p00 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

// ---------------------------------------------------------------- file helpers

inline std::filesystem::path source_dir() { return SILICON_SOURCE_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    out << content;
}

inline std::filesystem::path fresh_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = std::filesystem::temp_directory_path() / ("silicon-test-" + tag + "-" + std::to_string(rng() % 1000000000));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline std::map<std::string, std::string> snapshot(const std::filesystem::path& root) {
    std::map<std::string, std::string> out;
    for (auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
    return out;
}

inline std::string strip_newline(std::string s) {
    while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
    return s;
}

}  // namespace oracle
