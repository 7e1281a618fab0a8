#pragma once

// Measurement layer: grid norms, a lattice Hoelder seminorm, the
// nondimensional smallness numbers, exponential decay fits, and the
// logarithmic Calderon-Zygmund ratio monitor.

#include "spectral.hpp"
#include "stokes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oldrlab {

struct NormBundle {
    double l1 = 0.0;
    double l2 = 0.0;
    double linf = 0.0;
    double holder = 0.0;
    double time = 0.0;
};

/// One lattice offset (in grid steps) and its Euclidean length.
struct LatticeOffset {
    int d1 = 0;
    int d2 = 0;
    double length = 0.0;
};

/// Offsets along the axes and diagonals with steps m = round(2^{j/4}),
/// distinct, 1 <= m <= n/2.
inline std::vector<LatticeOffset> holder_offsets(const Grid& g) {
    const int half = g.n() / 2;
    std::set<int> steps;
    for (int j = 0;; ++j) {
        const int m = static_cast<int>(std::lround(std::pow(2.0, j / 4.0)));
        if (m > half) break;
        steps.insert(m);
    }
    const double h = g.spacing();
    std::vector<LatticeOffset> out;
    for (int m : steps) {
        out.push_back({m, 0, m * h});
        if (g.dim() == 2) {
            out.push_back({0, m, m * h});
            out.push_back({m, m, m * h * std::sqrt(2.0)});
            out.push_back({m, -m, m * h * std::sqrt(2.0)});
        }
    }
    return out;
}

/// max_x |f(x + h) - f(x)| over the grid for one offset.
inline double offset_increment(const SpectralField& f, const LatticeOffset& o) {
    const Grid& g = f.grid();
    const int n = g.n();
    const auto v = f.values();
    double worst = 0.0;
    if (g.dim() == 1) {
        for (int i = 0; i < n; ++i) worst = std::max(worst, std::abs(v[(i + o.d1) % n] - v[i]));
        return worst;
    }
    for (int i = 0; i < n; ++i) {
        const std::size_t row = static_cast<std::size_t>(i) * n;
        const std::size_t shifted = static_cast<std::size_t>((i + o.d1 + n) % n) * n;
        for (int j = 0; j < n; ++j) {
            const int jj = (j + o.d2 + n) % n;
            worst = std::max(worst, std::abs(v[shifted + jj] - v[row + j]));
        }
    }
    return worst;
}

/// Lower estimate of the Hoelder seminorm sup |f(x)-f(y)| / |x-y|^alpha
/// from the offset lattice of holder_offsets().
inline double holder_seminorm(const SpectralField& f, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("holder_seminorm: alpha must lie in (0, 1)");
    double best = 0.0;
    for (const auto& o : holder_offsets(f.grid()))
        best = std::max(best, offset_increment(f, o) / std::pow(o.length, alpha));
    return best;
}

inline NormBundle norm_bundle(const SpectralField& f, double alpha = 0.5, double time = 0.0) {
    return {norm_l1(f), norm_l2(f), norm_linf(f), holder_seminorm(f, alpha), time};
}

/// C D M_inf {1 + log[1 + M_inf^{-1} M_alpha^{d/(d+alpha)} M_1^{alpha/(d+alpha)}]}.
inline double smallness_B0(double m1, double malpha, double minf, double deborah, int d,
                           double alpha, double C = 1.0) {
    if (minf <= 0.0) return 0.0;
    const double mix = std::pow(malpha, d / (d + alpha)) * std::pow(m1, alpha / (d + alpha));
    return C * deborah * minf * (1.0 + std::log(1.0 + mix / minf));
}

/// Size of initial data and the smallness criterion value. C and eps1 are
/// unknown dimensional constants; they are inputs and the report never
/// decides on their behalf beyond comparing against the given eps1.
struct SmallnessReport {
    double M1 = 0.0;
    double Minf = 0.0;
    double Malpha = 0.0;
    double deborah = 0.0;
    double B0 = 0.0;
    /// B0 with C = 1: D M_inf {1 + log[...]}.
    double criterion = 0.0;
    double eps1 = 1.0;
    bool below_eps1 = false;
};

/// M1 = |rho0|_1 + |tau0|_1, M_inf likewise with sup norms, M_alpha with
/// Hoelder seminorms; tensor norms use the pointwise Frobenius magnitude and
/// the largest component seminorm.
inline SmallnessReport smallness_report(const SpectralField& rho0, const StressField2D& tau0, double deborah_number,
                                        double alpha = 0.5, double C = 1.0, double eps1 = 1.0) {
    tau0.check();
    rho0.check_same(tau0.s11, "smallness_report");
    if (!(C > 0.0)) throw ConfigError("smallness_report: C must be positive");
    std::vector<double> mag(rho0.values().size());
    const auto a = tau0.s11.values();
    const auto b = tau0.s12.values();
    const auto c = tau0.s22.values();
    for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::sqrt(a[i] * a[i] + 2.0 * b[i] * b[i] + c[i] * c[i]);
    const auto m = SpectralField::from_values(rho0.grid(), std::move(mag));
    SmallnessReport r;
    r.M1 = norm_l1(rho0) + norm_l1(m);
    r.Minf = norm_linf(rho0) + norm_linf(m);
    r.Malpha = holder_seminorm(rho0, alpha) +
               std::max({holder_seminorm(tau0.s11, alpha), holder_seminorm(tau0.s12, alpha),
                         holder_seminorm(tau0.s22, alpha)});
    r.deborah = deborah_number;
    const int d = rho0.grid().dim();
    r.criterion = smallness_B0(r.M1, r.Malpha, r.Minf, deborah_number, d, alpha, 1.0);
    r.B0 = C * r.criterion;
    r.eps1 = eps1;
    r.below_eps1 = r.criterion <= eps1;
    return r;
}

struct DeborahNumbers {
    double deborah = 0.0;
    double kappa0 = 0.0;
    bool infinite = false;
};

/// D = k R^2 / eps, kappa0 = eps / R^2; eps = 0 flags D as infinite.
inline DeborahNumbers deborah(double k, double epsilon, double R) {
    if (R <= 0.0 || epsilon < 0.0) throw ConfigError("deborah: need R > 0 and epsilon >= 0");
    const double kappa0 = epsilon / (R * R);
    if (epsilon == 0.0) return {std::numeric_limits<double>::infinity(), 0.0, true};
    return {k / kappa0, kappa0, false};
}

struct DecayFit {
    double rate = 0.0;
    double r2 = 0.0;
    double intercept = 0.0;
};

/// Least-squares fit log(value) = intercept - rate * t.
inline DecayFit fit_decay_rate(std::span<const double> t, std::span<const double> value) {
    if (t.size() != value.size()) throw ConfigError("fit_decay_rate: length mismatch");
    if (t.size() < 10) throw ConfigError("fit_decay_rate: need at least 10 samples");
    const double n = static_cast<double>(t.size());
    double st = 0.0;
    double sy = 0.0;
    std::vector<double> y(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(value[i] > 0.0)) throw ConfigError("fit_decay_rate: values must be positive");
        y[i] = std::log(value[i]);
        st += t[i];
        sy += y[i];
    }
    const double tm = st / n;
    const double ym = sy / n;
    double stt = 0.0;
    double sty = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (y[i] - ym);
        syy += (y[i] - ym) * (y[i] - ym);
    }
    if (stt == 0.0) throw ConfigError("fit_decay_rate: all sample times coincide");
    const double slope = sty / stt;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double r = y[i] - (ym + slope * (t[i] - tm));
        ss_res += r * r;
    }
    const double r2 = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    return {-slope, r2, ym - slope * tm};
}

/// ||R tau||_inf / (||tau||_inf {1 + log[1 + ||tau||_1^{a/(d+a)} [tau]_a^{d/(d+a)} / ||tau||_inf]})
/// with R tau = grad u / k and entrywise maxima over tensor components.
inline double calderon_ratio(const StressField2D& tau, double alpha, double k) {
    tau.check();
    const SpectralField* comps[3] = {&tau.s11, &tau.s12, &tau.s22};
    double sup = 0.0;
    double l1 = 0.0;
    double hol = 0.0;
    for (const auto* c : comps) {
        sup = std::max(sup, norm_linf(*c));
        l1 = std::max(l1, norm_l1(*c));
        hol = std::max(hol, holder_seminorm(*c, alpha));
    }
    if (sup == 0.0) throw ConfigError("calderon_ratio: stress is identically zero");
    const auto G = gradient_from_stress(tau, k);
    double rsup = 0.0;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) rsup = std::max(rsup, norm_linf(G(i, j)) / k);
    const double d = 2.0;
    const double mix = std::pow(l1, alpha / (d + alpha)) * std::pow(hol, d / (d + alpha));
    return rsup / (sup * (1.0 + std::log(1.0 + mix / sup)));
}

/// Pointwise Frobenius norm of tau = sigma - rho I for sigma built from (a, b, c).
inline SpectralField reduced_stress_magnitude(const SpectralField& a, const SpectralField& b,
                                              const SpectralField& c, const SpectralField& rho) {
    std::vector<double> v(a.values().size());
    const auto av = a.values();
    const auto bv = b.values();
    const auto cv = c.values();
    const auto rv = rho.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double t11 = 0.5 * cv[i] + av[i] - rv[i];
        const double t22 = 0.5 * cv[i] - av[i] - rv[i];
        v[i] = std::sqrt(t11 * t11 + t22 * t22 + 2.0 * bv[i] * bv[i]);
    }
    return SpectralField::from_values(a.grid(), std::move(v));
}

/// Per-step scalar diagnostics. Fixed columns first, then experiment extras.
struct DiagnosticsRecord {
    double t = 0.0;
    double l1_tau = 0.0;
    double linf_tau = 0.0;
    double holder_tau = 0.0;
    double l1_rho = 0.0;
    double linf_rho = 0.0;
    double grad_u_inf = 0.0;
    double energy_residual = 0.0;
    double det_min = 0.0;
    std::vector<std::pair<std::string, double>> extra;

    double get(const std::string& name) const {
        for (const auto& [k, v] : extra)
            if (k == name) return v;
        throw ConfigError("DiagnosticsRecord: no column '" + name + "'");
    }
    void set(const std::string& name, double v) {
        for (auto& [k, old] : extra)
            if (k == name) {
                old = v;
                return;
            }
        extra.emplace_back(name, v);
    }
};

inline const std::vector<std::string>& fixed_columns() {
    static const std::vector<std::string> cols{"t",        "L1_tau",     "Linf_tau",
                                               "holder_tau", "L1_rho",   "Linf_rho",
                                               "grad_u_inf", "energy_residual", "det_min"};
    return cols;
}

/// CSV with a '#' comment line naming the columns, then a header row.
inline void write_csv(std::ostream& os, std::span<const DiagnosticsRecord> records,
                      const std::string& comment) {
    std::vector<std::string> cols = fixed_columns();
    if (!records.empty())
        for (const auto& [k, v] : records.front().extra) cols.push_back(k);
    os << "# " << comment << " columns:";
    for (const auto& c : cols) os << ' ' << c;
    os << '\n';
    for (std::size_t i = 0; i < cols.size(); ++i) os << (i ? "," : "") << cols[i];
    os << '\n';
    os.precision(17);
    for (const auto& r : records) {
        os << r.t << ',' << r.l1_tau << ',' << r.linf_tau << ',' << r.holder_tau << ',' << r.l1_rho
           << ',' << r.linf_rho << ',' << r.grad_u_inf << ',' << r.energy_residual << ','
           << r.det_min;
        for (const auto& [k, v] : r.extra) os << ',' << v;
        os << '\n';
    }
}

}  // namespace oldrlab
