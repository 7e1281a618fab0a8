#pragma once

// One-dimensional blow-up model on the circle:
//   D_t sigma = 2k sigma H sigma - 2 kappa0 sigma + 2 kappa0 s(x),   u_x = k H sigma,
// with s = 1 unless a source field is given. Along characteristics the complex
// variable z = H sigma + i sigma is compared with the exact solution of
//   dz/dt = k z^2 - 2 kappa0 z + 2 i kappa0.

#include "diagnostics.hpp"
#include "evaluate.hpp"
#include "spectral.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace oldrlab {

struct OneDParams {
    double k = 1.0;
    double kappa0 = 0.0;

    void validate() const {
        if (!(k > 0.0)) throw ConfigError("1d model: k must be positive");
        if (!(kappa0 >= 0.0)) throw ConfigError("1d model: kappa0 must be >= 0");
    }
};

struct OneDState {
    SpectralField sigma;
    double time = 0.0;
    bool blowup = false;
    std::string blowup_reason;

    void check() const {
        if (sigma.grid().dim() != 1) throw GridMismatch("1d model: sigma must live on a 1D grid");
    }
};

struct OneDOptions {
    bool dealias = true;
    /// Off: D_t becomes d/dt and characteristics stay put.
    bool advection = true;
    /// Relaxation target s(x); nullptr means s = 1.
    const SpectralField* source = nullptr;
};

struct OneDTendency {
    SpectralField dsigma;
    SpectralField u;
    bool finite = true;
};

/// u = -k |D|^{-1} sigma, so u_x = k H sigma and mean u = 0.
inline SpectralField velocity_1d(const SpectralField& sigma, double k) {
    if (sigma.grid().dim() != 1) throw GridMismatch("velocity_1d: needs a 1D grid");
    auto u = apply_multiplier(sigma, symbols::inverse_zygmund());
    u *= -k;
    return u;
}

inline OneDTendency rhs_1d(const SpectralField& sigma, const OneDParams& p, const OneDOptions& opt = {}) {
    const Grid& g = sigma.grid();
    if (g.dim() != 1) throw GridMismatch("rhs_1d: needs a 1D grid");
    if (opt.source) sigma.check_same(*opt.source, "rhs_1d");
    OneDTendency out;
    out.u = velocity_1d(sigma, p.k);
    const auto hs = hilbert(sigma);
    const auto sx = derivative(sigma, 0);
    const auto sv = sigma.values();
    const auto uv = out.u.values();
    const auto hv = hs.values();
    const auto dv = sx.values();
    const auto src = opt.source ? opt.source->values() : std::span<const double>{};
    std::vector<double> t(sv.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double s = src.empty() ? 1.0 : src[i];
        t[i] = 2.0 * p.k * sv[i] * hv[i] - 2.0 * p.kappa0 * (sv[i] - s);
        if (opt.advection) t[i] -= uv[i] * dv[i];
        if (!std::isfinite(t[i])) out.finite = false;
    }
    auto raw = SpectralField::from_values(g, std::move(t));
    out.dsigma = opt.dealias ? dealias(raw) : std::move(raw);
    return out;
}

/// sup |H(sigma H sigma) - ((H sigma)^2 - sigma^2)/2| after removing the mean
/// of both sides; products are formed on a doubled grid, exact for band-limited input.
inline double cotlar_residual(const SpectralField& sigma) {
    if (sigma.grid().dim() != 1) throw GridMismatch("cotlar_residual: needs a 1D grid");
    const auto s = resample(sigma, 2 * sigma.grid().n());
    const auto hs = hilbert(s);
    const auto lhs = hilbert(product(s, hs));
    const auto sv = s.values();
    const auto hv = hs.values();
    std::vector<double> r(sv.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = 0.5 * (hv[i] * hv[i] - sv[i] * sv[i]);
    const auto rhs = SpectralField::from_values(s.grid(), std::move(r));
    return norm_linf(remove_mean(lhs) - remove_mean(rhs));
}

/// Roots r+- of k z^2 - 2 kappa0 z + 2 i kappa0 = 0.
inline std::pair<Complex, Complex> riccati_roots(double k, double kappa0) {
    const Complex disc = std::sqrt(Complex(kappa0 * kappa0, -2.0 * k * kappa0));
    return {(kappa0 + disc) / k, (kappa0 - disc) / k};
}

/// First t > 0 at which the Riccati solution from z0 is infinite; +inf if none.
inline double riccati_blowup_time(Complex z0, double k, double kappa0) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (kappa0 == 0.0) {
        if (std::abs(z0.imag()) > 1e-14 * std::abs(z0) || !(z0.real() > 0.0)) return inf;
        return 1.0 / (k * z0.real());
    }
    const auto [rp, rm] = riccati_roots(k, kappa0);
    const Complex A = z0 - rm;
    const Complex B = z0 - rp;
    if (std::abs(A) == 0.0 || std::abs(B) == 0.0) return inf;
    const Complex w = k * (rp - rm);
    const Complex L = std::log(A / B);
    // t = (L + 2 pi i m) / w must be real and positive for some integer m.
    if (w.real() == 0.0) return inf;
    const double mstar = -(L * std::conj(w)).imag() / (2.0 * std::numbers::pi * w.real());
    const double m = std::round(mstar);
    if (std::abs(m - mstar) > 1e-9 * (1.0 + std::abs(mstar))) return inf;
    const double t = ((L + Complex(0.0, 2.0 * std::numbers::pi * m)) * std::conj(w)).real() / std::norm(w);
    return t > 0.0 ? t : inf;
}

struct RiccatiValue {
    Complex z;
    bool blown_up = false;
    double blowup_time = std::numeric_limits<double>::infinity();
};

inline RiccatiValue riccati_exact(Complex z0, double k, double kappa0, double t) {
    if (!(k > 0.0) || !(kappa0 >= 0.0) || !(t >= 0.0))
        throw ConfigError("riccati_exact: need k > 0, kappa0 >= 0, t >= 0");
    RiccatiValue out;
    out.blowup_time = riccati_blowup_time(z0, k, kappa0);
    if (t >= out.blowup_time) {
        out.blown_up = true;
        out.z = Complex(std::numeric_limits<double>::infinity(), 0.0);
        return out;
    }
    if (kappa0 == 0.0) {
        out.z = z0 / (1.0 - k * t * z0);
        return out;
    }
    const auto [rp, rm] = riccati_roots(k, kappa0);
    const Complex A = z0 - rm;
    const Complex B = z0 - rp;
    // (z - r+)/(z - r-) = (B/A) e^{k (r+ - r-) t}.
    const Complex E = std::exp(k * (rp - rm) * t);
    // |E| huge: the solution has settled on r-.
    if (!std::isfinite(std::abs(E)) || std::abs(E) > 1e200) {
        out.z = std::abs(B) == 0.0 ? rp : rm;
        return out;
    }
    out.z = (rp * A - rm * B * E) / (A - B * E);
    return out;
}

struct OneDConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    bool dealias = true;
    double cfl_guard = 0.5;
    /// Stop when sup sigma exceeds this.
    double sup_cap = 1e8;
    /// Stop when the largest coefficient in the upper half of the retained
    /// band exceeds this fraction of the largest nonzero-mode coefficient.
    double tail_tol = 1e-6;
    int record_every = 1;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("1d config: dt must be positive");
        if (!(t_end >= 0.0)) throw ConfigError("1d config: t_end must be >= 0");
        if (!(cfl_guard > 0.0)) throw ConfigError("1d config: cfl_guard must be positive");
        if (!(sup_cap > 0.0)) throw ConfigError("1d config: sup_cap must be positive");
        if (!(tail_tol > 0.0)) throw ConfigError("1d config: tail_tol must be positive");
        if (record_every < 1) throw ConfigError("1d config: record_every must be >= 1");
    }
};

/// One characteristic: positions and z values at every recorded step.
struct CharacteristicSeries {
    double x0 = 0.0;
    Complex z0;
    std::vector<double> t;
    std::vector<double> x;
    std::vector<Complex> z_grid;
    std::vector<Complex> z_riccati;

    /// sup |z_grid - z_riccati| over samples with t <= t_max.
    double max_deviation(double t_max = std::numeric_limits<double>::infinity()) const {
        double worst = 0.0;
        for (std::size_t i = 0; i < t.size() && t[i] <= t_max; ++i)
            worst = std::max(worst, std::abs(z_grid[i] - z_riccati[i]));
        return worst;
    }
};

struct OneDRun {
    std::vector<DiagnosticsRecord> records;
    OneDState final_state;
    bool blowup = false;
    std::string reason;
    long steps = 0;
    std::vector<CharacteristicSeries> characteristics;
};

namespace detail {

/// max |c_k| over n/6 < k <= n/3 relative to max |c_k| over k >= 1.
inline double spectral_tail(const SpectralField& f) {
    const auto c = f.coeffs();
    const int n = f.grid().n();
    double top = 0.0;
    double all = 0.0;
    for (int k = 1; k < static_cast<int>(c.size()); ++k) {
        const double m = std::abs(c[k]);
        all = std::max(all, m);
        if (k > n / 6) top = std::max(top, m);
    }
    return all > 0.0 ? top / all : 0.0;
}

inline std::vector<double> point_values(const SpectralField& f, std::span<const double> xs, bool moving = true) {
    std::vector<double> out;
    out.reserve(xs.size());
    if (xs.empty()) return out;
    if (!moving) return std::vector<double>(xs.size(), 0.0);
    const PointEvaluator ev(f);
    for (double x : xs) out.push_back(ev.value({x, 0.0}));
    return out;
}

}  // namespace detail

/// RK4 integration of sigma, with optional characteristics advanced in the
/// same scheme (dx/dt = u(x, t) evaluated by Fourier summation).
inline OneDRun run_1d(const OneDState& state0, const OneDParams& p, const OneDConfig& cfg,
                      std::span<const double> positions = {}, const OneDOptions& opt_in = {}) {
    p.validate();
    cfg.validate();
    state0.check();
    OneDOptions opt = opt_in;
    opt.dealias = cfg.dealias;
    const Grid& g = state0.sigma.grid();
    double src_integral = g.volume();
    double src_sup = 1.0;
    double src_l1 = g.volume();
    if (opt.source) {
        state0.sigma.check_same(*opt.source, "run_1d");
        src_integral = integral(*opt.source);
        src_sup = norm_linf(*opt.source);
        src_l1 = norm_l1(*opt.source);
    }
    const SpectralField one = opt.source ? *opt.source : SpectralField::constant(g, 1.0);

    OneDRun res;
    OneDState s = state0;
    if (cfg.dealias) s.sigma = dealias(s.sigma);
    std::vector<double> xs(positions.begin(), positions.end());
    const double int0 = integral(s.sigma);

    for (double x : xs) {
        CharacteristicSeries c;
        c.x0 = x;
        res.characteristics.push_back(std::move(c));
    }

    auto record = [&](const OneDState& st, std::vector<DiagnosticsRecord>& out) {
        const auto hs = hilbert(st.sigma);
        DiagnosticsRecord r;
        r.t = st.time;
        const auto tau = st.sigma - one;
        r.l1_tau = norm_l1(tau);
        r.linf_tau = norm_linf(tau);
        r.l1_rho = src_l1;
        r.linf_rho = src_sup;
        r.grad_u_inf = p.k * norm_linf(hs);
        const double law = src_integral + (int0 - src_integral) * std::exp(-2.0 * p.kappa0 * (st.time - state0.time));
        const double ints = integral(st.sigma);
        r.energy_residual = ints - law;
        double smin = INFINITY;
        double ssup = 0.0;
        for (double v : st.sigma.values()) {
            smin = std::min(smin, v);
            ssup = std::max(ssup, std::abs(v));
        }
        r.det_min = smin;
        r.extra = {{"sup_sigma", ssup},
                   {"int_sigma", ints},
                   {"sup_hilbert", norm_linf(hs)},
                   {"tail", detail::spectral_tail(st.sigma)}};
        out.push_back(std::move(r));
        if (xs.empty()) return;
        const PointEvaluator ev(std::vector<SpectralField>{hs, st.sigma});
        for (std::size_t i = 0; i < xs.size(); ++i) {
            auto& c = res.characteristics[i];
            const auto v = ev.values({xs[i], 0.0});
            const Complex zg(v[0], v[1]);
            if (c.t.empty()) c.z0 = zg;
            c.t.push_back(st.time);
            c.x.push_back(xs[i]);
            c.z_grid.push_back(zg);
            c.z_riccati.push_back(riccati_exact(c.z0, p.k, p.kappa0, st.time - state0.time).z);
        }
    };

    std::vector<DiagnosticsRecord> all;
    record(s, all);
    const long nsteps = std::lround(cfg.t_end / cfg.dt);
    const double h = cfg.dt;
    auto stop = [&](const std::string& why) {
        res.blowup = true;
        res.reason = why;
        s.blowup = true;
        s.blowup_reason = why;
    };
    for (long step = 0; step < nsteps; ++step) {
        auto k1 = rhs_1d(s.sigma, p, opt);
        const double speed = opt.advection ? norm_linf(k1.u) : 0.0;
        const double courant = speed * h / g.spacing();
        if (!std::isfinite(courant) || !k1.finite) {
            stop("non-finite tendency");
            break;
        }
        if (courant > cfg.cfl_guard) {
            stop("CFL guard exceeded (courant " + std::to_string(courant) + ")");
            break;
        }
        const auto u1 = detail::point_values(k1.u, xs, opt.advection);
        auto shift = [&](const std::vector<double>& base, const std::vector<double>& v, double a) {
            std::vector<double> out(base);
            for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * v[i];
            return out;
        };
        auto k2 = rhs_1d(s.sigma + (0.5 * h) * k1.dsigma, p, opt);
        const auto u2 = detail::point_values(k2.u, shift(xs, u1, 0.5 * h), opt.advection);
        auto k3 = rhs_1d(s.sigma + (0.5 * h) * k2.dsigma, p, opt);
        const auto u3 = detail::point_values(k3.u, shift(xs, u2, 0.5 * h), opt.advection);
        auto k4 = rhs_1d(s.sigma + h * k3.dsigma, p, opt);
        const auto u4 = detail::point_values(k4.u, shift(xs, u3, h), opt.advection);
        if (!k2.finite || !k3.finite || !k4.finite) {
            stop("non-finite tendency");
            break;
        }
        SpectralField next = s.sigma;
        next.axpy(h / 6.0, k1.dsigma);
        next.axpy(h / 3.0, k2.dsigma);
        next.axpy(h / 3.0, k3.dsigma);
        next.axpy(h / 6.0, k4.dsigma);
        bool finite = true;
        for (double v : next.values()) finite = finite && std::isfinite(v);
        if (!finite) {
            stop("non-finite state");
            break;
        }
        for (std::size_t i = 0; i < xs.size(); ++i)
            xs[i] += h / 6.0 * (u1[i] + 2.0 * u2[i] + 2.0 * u3[i] + u4[i]);
        s.sigma = std::move(next);
        s.time = state0.time + (step + 1) * h;
        ++res.steps;
        record(s, all);
        const auto& last = all.back();
        if (last.get("sup_sigma") > cfg.sup_cap) {
            stop("sup sigma exceeded cap");
            break;
        }
        if (last.get("tail") > cfg.tail_tol) {
            stop("resolution lost (spectral tail " + std::to_string(last.get("tail")) + ")");
            break;
        }
    }
    for (std::size_t j = 0; j < all.size(); ++j)
        if (j % static_cast<std::size_t>(cfg.record_every) == 0 || j + 1 == all.size())
            res.records.push_back(std::move(all[j]));
    res.final_state = std::move(s);
    return res;
}

/// Characteristics from the given initial positions with their Riccati oracle.
inline std::vector<CharacteristicSeries> track_characteristics(const OneDState& state0,
                                                               std::span<const double> positions,
                                                               const OneDParams& p, const OneDConfig& cfg,
                                                               const OneDOptions& opt = {}) {
    return run_1d(state0, p, cfg, positions, opt).characteristics;
}

enum class EstimateStatus { ok, refused };

struct BlowupEstimate {
    EstimateStatus status = EstimateStatus::refused;
    double t_est = std::numeric_limits<double>::infinity();
    /// RMS residual of the linear fit of 1/sup relative to its mean.
    double confidence = std::numeric_limits<double>::infinity();
    std::size_t window = 0;
    std::string note;
};

/// Extrapolates 1/sup to zero over the trailing quarter of the samples (at
/// least 20). Refuses when the tail is not monotonically growing or the fit
/// does not decrease.
inline BlowupEstimate blowup_time_estimate(std::span<const double> t, std::span<const double> sup) {
    BlowupEstimate out;
    if (t.size() != sup.size()) throw ConfigError("blowup_time_estimate: length mismatch");
    const std::size_t n = t.size();
    const std::size_t w = std::max<std::size_t>(20, n / 4);
    if (n < w) {
        out.note = "too few samples";
        return out;
    }
    const std::size_t start = n - w;
    for (std::size_t i = start + 1; i < n; ++i)
        if (!(sup[i] > sup[i - 1])) {
            out.note = "tail not monotonically growing";
            return out;
        }
    double st = 0.0, sy = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        st += t[i];
        sy += 1.0 / sup[i];
    }
    const double tm = st / static_cast<double>(w);
    const double ym = sy / static_cast<double>(w);
    double stt = 0.0, sty = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        stt += (t[i] - tm) * (t[i] - tm);
        sty += (t[i] - tm) * (1.0 / sup[i] - ym);
    }
    const double slope = sty / stt;
    if (!(slope < 0.0)) {
        out.note = "1/sup not decreasing";
        return out;
    }
    double ss = 0.0;
    for (std::size_t i = start; i < n; ++i) {
        const double r = 1.0 / sup[i] - (ym + slope * (t[i] - tm));
        ss += r * r;
    }
    out.status = EstimateStatus::ok;
    out.t_est = tm - ym / slope;
    out.confidence = std::sqrt(ss / static_cast<double>(w)) / std::abs(ym);
    out.window = w;
    return out;
}

}  // namespace oldrlab
