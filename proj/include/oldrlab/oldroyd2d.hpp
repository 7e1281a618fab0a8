#pragma once

// Closed 2D Oldroyd-B system in the shear/trace variables
//   a = (s11 - s22)/2, b = s12, c = s11 + s22
// coupled to steady Stokes, integrated with fixed-step RK4.
//
//   D_t a   = -omega b + lambda c - 2 kappa0 a
//   D_t b   =  omega a + mu c     - 2 kappa0 b
//   D_t c   = 4 lambda a + 4 mu b - 2 kappa0 c + 4 kappa0 rho
//   D_t rho = 0
// with kappa0 = epsilon / R^2 and D_t = d/dt + u.grad.
//
// Relaxationless mode (epsilon = 0) evolves (a, b, d0, rho), where d0 is the
// transported determinant and c = 2 sqrt(a^2 + b^2 + d0):
//   D_t a = 2k [-b W + 2 sqrt(a^2+b^2+d0) B W]
//   D_t b = 2k [ a W - 2 sqrt(a^2+b^2+d0) A W],   W = A b - B a.
// With k = 1/2 this is the system written in time units of 1/(2k).

#include "diagnostics.hpp"
#include "spectral.hpp"
#include "stokes.hpp"

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace oldrlab {

struct ModelParams {
    double k = 1.0;
    double epsilon = 1.0;
    double R = 1.0;

    double kappa0() const { return epsilon / (R * R); }
    double deborah() const { return epsilon > 0.0 ? k * R * R / epsilon : INFINITY; }
    void validate() const {
        if (!(k >= 0.0)) throw ConfigError("ModelParams: k must be nonnegative");
        if (!(epsilon >= 0.0)) throw ConfigError("ModelParams: epsilon must be nonnegative");
        if (!(R > 0.0)) throw ConfigError("ModelParams: R must be positive");
    }
};

enum class SolverMode { relaxational, relaxationless };

struct SolverConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    bool dealias = true;
    SolverMode mode = SolverMode::relaxational;
    double cfl_guard = 0.5;
    bool advection = true;
    /// Drops lambda and mu (co-rotational model).
    bool corotational = false;
    /// Keep every n-th record in the returned trajectory.
    int record_every = 1;
    /// Hoelder seminorm of tau in the records (costly).
    bool holder = false;
    double holder_alpha = 0.5;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("SolverConfig: dt must be positive");
        if (!(t_end >= 0.0)) throw ConfigError("SolverConfig: t_end must be nonnegative");
        if (!(cfl_guard > 0.0 && cfl_guard < 1.0)) throw ConfigError("SolverConfig: cfl_guard must lie in (0, 1)");
        if (record_every < 1) throw ConfigError("SolverConfig: record_every must be >= 1");
    }
};

/// Courant number above the configured guard.
class CflViolation : public Error {
public:
    CflViolation(double courant, double guard)
        : Error("CFL violation: Courant number " + std::to_string(courant) + " exceeds guard " +
                std::to_string(guard)),
          courant_(courant) {}
    double courant() const { return courant_; }

private:
    double courant_;
};

struct OldroydState {
    SpectralField a;
    SpectralField b;
    SpectralField c;
    SpectralField rho;
    /// Transported determinant; set only in relaxationless mode.
    SpectralField d0;
    double time = 0.0;
    bool blowup = false;
    std::string blowup_reason;

    const Grid& grid() const { return a.grid(); }
    bool relaxationless() const { return !d0.empty(); }

    void check() const {
        if (a.grid().dim() != 2) throw GridMismatch("OldroydState: needs a 2D grid");
        a.check_same(b, "OldroydState");
        a.check_same(c, "OldroydState");
        a.check_same(rho, "OldroydState");
        if (!d0.empty()) a.check_same(d0, "OldroydState");
    }

    /// sigma = rho I.
    static OldroydState equilibrium(const Grid& g, double rho_bar) {
        return {SpectralField::zeros(g), SpectralField::zeros(g), SpectralField::constant(g, 2.0 * rho_bar),
                SpectralField::constant(g, rho_bar), {}, 0.0, false, {}};
    }

    /// Relaxationless state with d0 = c^2/4 - a^2 - b^2 taken from (a, b, c).
    static OldroydState relaxationless_from(const SpectralField& a, const SpectralField& b,
                                            const SpectralField& c, const SpectralField& rho);
};

/// pointwise c^2/4 - a^2 - b^2.
inline SpectralField determinant_field(const OldroydState& s) {
    std::vector<double> v(s.a.values().size());
    const auto a = s.a.values();
    const auto b = s.b.values();
    const auto c = s.c.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.25 * c[i] * c[i] - a[i] * a[i] - b[i] * b[i];
    return SpectralField::from_values(s.grid(), std::move(v));
}

/// (z1, z2) = c/2 +- sqrt(a^2 + b^2), z1 >= z2.
inline std::pair<SpectralField, SpectralField> eigenvalue_fields(const OldroydState& s) {
    std::vector<double> z1(s.a.values().size());
    std::vector<double> z2(z1.size());
    const auto a = s.a.values();
    const auto b = s.b.values();
    const auto c = s.c.values();
    for (std::size_t i = 0; i < z1.size(); ++i) {
        const double r = std::hypot(a[i], b[i]);
        z1[i] = 0.5 * c[i] + r;
        z2[i] = 0.5 * c[i] - r;
    }
    return {SpectralField::from_values(s.grid(), std::move(z1)),
            SpectralField::from_values(s.grid(), std::move(z2))};
}

namespace detail {

inline SpectralField slaved_trace(const SpectralField& a, const SpectralField& b, const SpectralField& d0) {
    std::vector<double> v(a.values().size());
    const auto av = a.values();
    const auto bv = b.values();
    const auto dv = d0.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = 2.0 * std::sqrt(std::max(0.0, av[i] * av[i] + bv[i] * bv[i] + dv[i]));
    return SpectralField::from_values(a.grid(), std::move(v));
}

}  // namespace detail

inline OldroydState OldroydState::relaxationless_from(const SpectralField& a, const SpectralField& b,
                                                      const SpectralField& c, const SpectralField& rho) {
    OldroydState s{a, b, c, rho, {}, 0.0, false, {}};
    s.d0 = determinant_field(s);
    s.c = detail::slaved_trace(a, b, s.d0);
    return s;
}

/// Tendencies of the four evolved fields: (a, b, c, rho) or (a, b, d0, rho).
struct Tendency {
    std::array<SpectralField, 4> f;
    bool finite = true;
    std::string problem;
};

struct RhsOptions {
    bool dealias = true;
    bool advection = true;
    bool corotational = false;
    /// Replaces kappa0 pointwise when set (kappa = epsilon / R(x)^2).
    const SpectralField* kappa_field = nullptr;
    /// Extra pointwise damping -2 delta sigma on (a, b, c) when set.
    const SpectralField* damping_field = nullptr;
};

/// Velocity, strain/vorticity and the transport operator for one state.
struct Kinematics {
    VelocityField2D u;
    StrainVorticity s;
    double courant_speed = 0.0;
};

inline Kinematics kinematics(const SpectralField& a, const SpectralField& b, double k) {
    Kinematics kin{velocity_from_ab(a, b, k), lambda_mu_omega(a, b, k), 0.0};
    const auto u1 = kin.u.u1.values();
    const auto u2 = kin.u.u2.values();
    double speed = 0.0;
    for (std::size_t i = 0; i < u1.size(); ++i) speed = std::max(speed, std::hypot(u1[i], u2[i]));
    kin.courant_speed = speed;
    return kin;
}

namespace detail {

/// u . grad f on the grid (values only).
inline std::vector<double> advection_values(const VelocityField2D& u, const SpectralField& f) {
    const auto fx = derivative(f, 0);
    const auto fy = derivative(f, 1);
    std::vector<double> out(f.values().size());
    const auto u1 = u.u1.values();
    const auto u2 = u.u2.values();
    const auto dx = fx.values();
    const auto dy = fy.values();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = u1[i] * dx[i] + u2[i] * dy[i];
    return out;
}

inline SpectralField finish(const Grid& g, std::vector<double> v, bool dealias_on) {
    if (!dealias_on) return SpectralField::from_values(g, std::move(v));
    auto raw = SpectralField::from_values(g, std::move(v));
    return dealias(raw);
}

inline bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

}  // namespace detail

/// Relaxational tendencies for (a, b, c, rho).
inline Tendency rhs(const OldroydState& st, const ModelParams& p, const RhsOptions& opt,
                    const Kinematics& kin) {
    const Grid& g = st.grid();
    const std::size_t N = g.size();
    const auto a = st.a.values();
    const auto b = st.b.values();
    const auto c = st.c.values();
    const auto r = st.rho.values();
    const auto lam = kin.s.lambda.values();
    const auto mu = kin.s.mu.values();
    const auto om = kin.s.omega.values();
    const double k0 = p.kappa0();
    const auto kap = opt.kappa_field ? opt.kappa_field->values() : std::span<const double>{};
    const auto damp = opt.damping_field ? opt.damping_field->values() : std::span<const double>{};

    std::vector<double> ta(N), tb(N), tc(N), tr(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) {
        const double kk = kap.empty() ? k0 : kap[i];
        const double l = opt.corotational ? 0.0 : lam[i];
        const double m = opt.corotational ? 0.0 : mu[i];
        ta[i] = -om[i] * b[i] + l * c[i] - 2.0 * kk * a[i];
        tb[i] = om[i] * a[i] + m * c[i] - 2.0 * kk * b[i];
        tc[i] = 4.0 * l * a[i] + 4.0 * m * b[i] - 2.0 * kk * c[i] + 4.0 * kk * r[i];
        if (!damp.empty()) {
            ta[i] -= 2.0 * damp[i] * a[i];
            tb[i] -= 2.0 * damp[i] * b[i];
            tc[i] -= 2.0 * damp[i] * c[i];
        }
    }
    if (opt.advection) {
        const SpectralField* fs[4] = {&st.a, &st.b, &st.c, &st.rho};
        std::vector<double>* ts[4] = {&ta, &tb, &tc, &tr};
        for (int f = 0; f < 4; ++f) {
            const auto adv = detail::advection_values(kin.u, *fs[f]);
            for (std::size_t i = 0; i < N; ++i) (*ts[f])[i] -= adv[i];
        }
    }
    Tendency out;
    std::vector<double>* ts[4] = {&ta, &tb, &tc, &tr};
    for (int f = 0; f < 4; ++f) {
        if (!detail::all_finite(*ts[f])) {
            out.finite = false;
            out.problem = "non-finite tendency";
        }
        out.f[f] = detail::finish(g, std::move(*ts[f]), opt.dealias);
    }
    return out;
}

inline Tendency rhs(const OldroydState& st, const ModelParams& p, const RhsOptions& opt = {}) {
    return rhs(st, p, opt, kinematics(st.a, st.b, p.k));
}

/// Relaxationless tendencies for (a, b, d0); the fourth slot carries rho.
inline Tendency rhs_relaxationless(const SpectralField& a, const SpectralField& b, const SpectralField& d0,
                                   const SpectralField& rho, const ModelParams& p, const RhsOptions& opt,
                                   const Kinematics& kin) {
    const Grid& g = a.grid();
    const std::size_t N = g.size();
    using detail::Term;
    std::vector<Complex> aneg(a.coeffs().begin(), a.coeffs().end());
    for (auto& v : aneg) v = -v;
    auto w_hat = detail::combine(g, {Term{&symbols::A(), b.coeffs()}, Term{&symbols::B(), aneg}});
    const auto W = SpectralField::from_coeffs(g, w_hat);
    const auto BW = SpectralField::from_coeffs(g, detail::times(g, symbols::B(), w_hat));
    const auto AW = SpectralField::from_coeffs(g, detail::times(g, symbols::A(), w_hat));

    const auto av = a.values();
    const auto bv = b.values();
    const auto dv = d0.values();
    const auto w = W.values();
    const auto bw = BW.values();
    const auto aw = AW.values();
    std::vector<double> ta(N), tb(N), td(N, 0.0), tr(N, 0.0);
    Tendency out;
    double min_rad = INFINITY;
    const double two_k = 2.0 * p.k;
    for (std::size_t i = 0; i < N; ++i) {
        const double rad = av[i] * av[i] + bv[i] * bv[i] + dv[i];
        min_rad = std::min(min_rad, rad);
        const double root = std::sqrt(std::max(0.0, rad));
        const double sb = opt.corotational ? 0.0 : 2.0 * root * bw[i];
        const double sa = opt.corotational ? 0.0 : 2.0 * root * aw[i];
        ta[i] = two_k * (-bv[i] * w[i] + sb);
        tb[i] = two_k * (av[i] * w[i] - sa);
    }
    if (!(min_rad > 0.0)) {
        out.finite = false;
        out.problem = "negative radicand (positivity loss)";
    }
    if (opt.advection) {
        const SpectralField* fs[4] = {&a, &b, &d0, &rho};
        std::vector<double>* ts[4] = {&ta, &tb, &td, &tr};
        for (int f = 0; f < 4; ++f) {
            const auto adv = detail::advection_values(kin.u, *fs[f]);
            for (std::size_t i = 0; i < N; ++i) (*ts[f])[i] -= adv[i];
        }
    }
    std::vector<double>* ts[4] = {&ta, &tb, &td, &tr};
    for (int f = 0; f < 4; ++f) {
        if (!detail::all_finite(*ts[f])) {
            out.finite = false;
            out.problem = "non-finite tendency";
        }
        out.f[f] = detail::finish(g, std::move(*ts[f]), opt.dealias);
    }
    return out;
}

inline Tendency rhs_relaxationless(const SpectralField& a, const SpectralField& b, const SpectralField& d0,
                                   const ModelParams& p, const RhsOptions& opt = {}) {
    return rhs_relaxationless(a, b, d0, SpectralField::zeros(a.grid()), p, opt, kinematics(a, b, p.k));
}

namespace detail {

using FieldSet = std::array<SpectralField, 4>;

inline FieldSet evolved(const OldroydState& s) {
    return {s.a, s.b, s.relaxationless() ? s.d0 : s.c, s.rho};
}

inline OldroydState rebuild(const OldroydState& like, FieldSet f, double time) {
    OldroydState s;
    s.a = std::move(f[0]);
    s.b = std::move(f[1]);
    s.rho = std::move(f[3]);
    s.time = time;
    if (like.relaxationless()) {
        s.d0 = std::move(f[2]);
        s.c = slaved_trace(s.a, s.b, s.d0);
    } else {
        s.c = std::move(f[2]);
    }
    return s;
}

inline FieldSet axpy(const FieldSet& y, double h, const FieldSet& k) {
    FieldSet out = y;
    for (int i = 0; i < 4; ++i) out[i].axpy(h, k[i]);
    return out;
}

}  // namespace detail

/// Tendency of a state in its own mode, given its kinematics.
inline Tendency state_rhs(const OldroydState& s, const ModelParams& p, const RhsOptions& opt,
                          const Kinematics& kin) {
    return s.relaxationless() ? rhs_relaxationless(s.a, s.b, s.d0, s.rho, p, opt, kin) : rhs(s, p, opt, kin);
}

/// Tendency of a state in its own mode.
inline Tendency state_rhs(const OldroydState& s, const ModelParams& p, const RhsOptions& opt,
                          Kinematics* kin_out = nullptr) {
    Kinematics kin = kinematics(s.a, s.b, p.k);
    Tendency t = state_rhs(s, p, opt, static_cast<const Kinematics&>(kin));
    if (kin_out) *kin_out = std::move(kin);
    return t;
}

/// Generic RK4 step over the four evolved fields. rhs_fn(state) -> Tendency.
/// Checks the Courant number of the current state first.
template <class RhsFn>
OldroydState rk4_step(const OldroydState& s, double dt, double cfl_guard, RhsFn&& rhs_fn,
                      double courant_speed) {
    const double courant = courant_speed * dt / s.grid().spacing();
    if (!std::isfinite(courant)) {
        OldroydState out = s;
        out.blowup = true;
        out.blowup_reason = "non-finite velocity";
        return out;
    }
    if (courant > cfl_guard) throw CflViolation(courant, cfl_guard);

    const auto y = detail::evolved(s);
    OldroydState out = s;
    auto fail = [&](const std::string& why) {
        out.blowup = true;
        out.blowup_reason = why;
        return out;
    };
    Tendency k1 = rhs_fn(s);
    if (!k1.finite) return fail(k1.problem);
    const auto s2 = detail::rebuild(s, detail::axpy(y, 0.5 * dt, k1.f), s.time + 0.5 * dt);
    Tendency k2 = rhs_fn(s2);
    if (!k2.finite) return fail(k2.problem);
    const auto s3 = detail::rebuild(s, detail::axpy(y, 0.5 * dt, k2.f), s.time + 0.5 * dt);
    Tendency k3 = rhs_fn(s3);
    if (!k3.finite) return fail(k3.problem);
    const auto s4 = detail::rebuild(s, detail::axpy(y, dt, k3.f), s.time + dt);
    Tendency k4 = rhs_fn(s4);
    if (!k4.finite) return fail(k4.problem);

    auto next = y;
    for (int i = 0; i < 4; ++i) {
        next[i].axpy(dt / 6.0, k1.f[i]);
        next[i].axpy(dt / 3.0, k2.f[i]);
        next[i].axpy(dt / 3.0, k3.f[i]);
        next[i].axpy(dt / 6.0, k4.f[i]);
    }
    out = detail::rebuild(s, std::move(next), s.time + dt);
    for (const auto* f : {&out.a, &out.b, &out.c, &out.rho})
        if (!detail::all_finite(f->values())) return fail("non-finite state");
    return out;
}

inline RhsOptions options_from(const SolverConfig& cfg) {
    RhsOptions o;
    o.dealias = cfg.dealias;
    o.advection = cfg.advection;
    o.corotational = cfg.corotational;
    return o;
}

inline OldroydState step(const OldroydState& s, const ModelParams& p, const SolverConfig& cfg) {
    if (s.blowup) return s;
    const RhsOptions opt = options_from(cfg);
    const Kinematics kin = kinematics(s.a, s.b, p.k);
    return rk4_step(
        s, cfg.dt, cfg.cfl_guard, [&](const OldroydState& x) { return state_rhs(x, p, opt); },
        kin.courant_speed);
}

/// Truncates every evolved field to the 2/3 band.
inline OldroydState dealiased(const OldroydState& s) {
    OldroydState out = s;
    out.a = dealias(s.a);
    out.b = dealias(s.b);
    out.rho = dealias(s.rho);
    if (s.relaxationless()) {
        out.d0 = dealias(s.d0);
        out.c = detail::slaved_trace(out.a, out.b, out.d0);
    } else {
        out.c = dealias(s.c);
    }
    return out;
}

/// Diagnostics of one state. Extras: int_c, int_rho, int_det, dissipation
/// ((2/k) int |grad u|^2), c_min, z2_min, offdiag_excess (max |b| - c/2).
inline DiagnosticsRecord make_record(const OldroydState& s, const ModelParams& p, const SolverConfig& cfg,
                                     const Kinematics& kin) {
    DiagnosticsRecord r;
    r.t = s.time;
    if (cfg.holder) {
        const StressField2D t = StressField2D::from_abc(s.a, s.b, s.c - 2.0 * s.rho);
        r.holder_tau = std::max({holder_seminorm(t.s11, cfg.holder_alpha), holder_seminorm(t.s12, cfg.holder_alpha),
                                 holder_seminorm(t.s22, cfg.holder_alpha)});
    }
    // Single pass over grid values; grid sums are exact quadrature for the band-limited parts.
    const auto av = s.a.values();
    const auto bv = s.b.values();
    const auto cv = s.c.values();
    const auto rv = s.rho.values();
    const auto lv = kin.s.lambda.values();
    const auto mv = kin.s.mu.values();
    const auto wv = kin.s.omega.values();
    const bool slaved = s.relaxationless();
    const std::span<const double> dv = slaved ? s.d0.values() : std::span<const double>{};
    double l1_tau = 0.0, linf_tau = 0.0, l1_rho = 0.0, linf_rho = 0.0, gsup = 0.0;
    double sum_c = 0.0, sum_rho = 0.0, sum_det = 0.0, sum_g2 = 0.0;
    double dmin = INFINITY, zmin = INFINITY, cmin = INFINITY, excess = -INFINITY;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double t11 = 0.5 * cv[i] + av[i] - rv[i];
        const double t22 = 0.5 * cv[i] - av[i] - rv[i];
        const double tau = std::sqrt(t11 * t11 + t22 * t22 + 2.0 * bv[i] * bv[i]);
        l1_tau += tau;
        linf_tau = std::max(linf_tau, tau);
        l1_rho += std::abs(rv[i]);
        linf_rho = std::max(linf_rho, std::abs(rv[i]));
        const double g2 = 2.0 * lv[i] * lv[i] + 2.0 * mv[i] * mv[i] + 0.5 * wv[i] * wv[i];
        gsup = std::max(gsup, g2);
        sum_g2 += g2;
        const double det = slaved ? dv[i] : 0.25 * cv[i] * cv[i] - av[i] * av[i] - bv[i] * bv[i];
        dmin = std::min(dmin, det);
        sum_det += det;
        zmin = std::min(zmin, 0.5 * cv[i] - std::hypot(av[i], bv[i]));
        cmin = std::min(cmin, cv[i]);
        excess = std::max(excess, std::abs(bv[i]) - 0.5 * cv[i]);
        sum_c += cv[i];
        sum_rho += rv[i];
    }
    const double cell = s.grid().volume() / static_cast<double>(av.size());
    r.l1_tau = l1_tau * cell;
    r.linf_tau = linf_tau;
    r.l1_rho = l1_rho * cell;
    r.linf_rho = linf_rho;
    r.grad_u_inf = std::sqrt(gsup);
    r.det_min = dmin;
    r.extra = {{"int_c", sum_c * cell},
               {"int_rho", sum_rho * cell},
               {"int_det", sum_det * cell},
               {"dissipation", p.k > 0.0 ? 2.0 / p.k * sum_g2 * cell : 0.0},
               {"c_min", cmin},
               {"z2_min", zmin},
               {"offdiag_excess", excess}};
    return r;
}

/// Cumulative integrals I_j = int_0^{t_j} g on a uniform grid, fourth order.
inline std::vector<double> cumulative_integral(std::span<const double> g, double h) {
    const std::size_t n = g.size();
    std::vector<double> out(n, 0.0);
    if (n < 2) return out;
    if (n < 4) {
        for (std::size_t j = 1; j < n; ++j) out[j] = out[j - 1] + 0.5 * h * (g[j - 1] + g[j]);
        return out;
    }
    std::vector<double> simpson(n, 0.0);  // valid at even j
    for (std::size_t j = 2; j < n; j += 2)
        simpson[j] = simpson[j - 2] + h / 3.0 * (g[j - 2] + 4.0 * g[j - 1] + g[j]);
    for (std::size_t j = 1; j < n; ++j) {
        if (j % 2 == 0) {
            out[j] = simpson[j];
        } else if (j == 1) {
            out[j] = h / 24.0 * (9.0 * g[0] + 19.0 * g[1] - 5.0 * g[2] + g[3]);
        } else {
            out[j] = simpson[j - 3] + 3.0 * h / 8.0 * (g[j - 3] + 3.0 * g[j - 2] + 3.0 * g[j - 1] + g[j]);
        }
    }
    return out;
}

/// Residual of the integrated trace balance
///   int c(t) = e^{-2 k0 t} int c0 + (1 - e^{-2 k0 t}) 2 int rho0
///              - int_0^t e^{-2 k0 (t-s)} (2/k) int |grad u|^2(s) ds
/// on a uniformly spaced trajectory carrying int_c, int_rho, dissipation.
inline std::vector<double> energy_balance_residual(std::span<const DiagnosticsRecord> traj,
                                                   const ModelParams& p) {
    std::vector<double> out(traj.size(), 0.0);
    if (traj.empty()) return out;
    const double k0 = p.kappa0();
    const double t0 = traj.front().t;
    const double h = traj.size() > 1 ? traj[1].t - traj[0].t : 0.0;
    std::vector<double> g(traj.size());
    for (std::size_t j = 0; j < traj.size(); ++j)
        g[j] = std::exp(2.0 * k0 * (traj[j].t - t0)) * traj[j].get("dissipation");
    const auto I = cumulative_integral(g, h);
    const double c0 = traj.front().get("int_c");
    const double r0 = traj.front().get("int_rho");
    for (std::size_t j = 0; j < traj.size(); ++j) {
        const double e = std::exp(-2.0 * k0 * (traj[j].t - t0));
        out[j] = traj[j].get("int_c") - (e * c0 + (1.0 - e) * 2.0 * r0 - e * I[j]);
    }
    return out;
}

struct RunResult {
    std::vector<DiagnosticsRecord> records;
    OldroydState final_state;
    bool blowup = false;
    std::string reason;
    int steps = 0;
};

/// Observer called with every accepted state (including the initial one).
using StateObserver = std::function<void(const OldroydState&, const Kinematics&)>;

inline RunResult run(const OldroydState& state0, const ModelParams& p, const SolverConfig& cfg,
                     const StateObserver& observer = {}) {
    p.validate();
    cfg.validate();
    state0.check();
    if (cfg.mode == SolverMode::relaxationless && !state0.relaxationless())
        throw ConfigError("run: relaxationless mode needs a state with d0");
    if (cfg.mode == SolverMode::relaxational && state0.relaxationless())
        throw ConfigError("run: relaxational mode given a relaxationless state");
    if (cfg.mode == SolverMode::relaxationless && p.epsilon != 0.0)
        throw ConfigError("run: relaxationless mode requires epsilon = 0");

    const RhsOptions opt = options_from(cfg);
    OldroydState s = cfg.dealias ? dealiased(state0) : state0;
    const long nsteps = std::lround(cfg.t_end / cfg.dt);
    std::vector<DiagnosticsRecord> all;
    all.reserve(static_cast<std::size_t>(nsteps) + 1);
    RunResult res;

    Kinematics kin = kinematics(s.a, s.b, p.k);
    all.push_back(make_record(s, p, cfg, kin));
    if (observer) observer(s, kin);
    for (long i = 0; i < nsteps; ++i) {
        const double t_next = state0.time + (i + 1) * cfg.dt;
        // The first stage sees s itself, whose kinematics are already known.
        OldroydState next = rk4_step(
            s, cfg.dt, cfg.cfl_guard,
            [&](const OldroydState& x) { return &x == &s ? state_rhs(x, p, opt, kin) : state_rhs(x, p, opt); },
            kin.courant_speed);
        if (next.blowup) {
            res.blowup = true;
            res.reason = next.blowup_reason;
            s.blowup = true;
            s.blowup_reason = next.blowup_reason;
            break;
        }
        next.time = t_next;
        s = std::move(next);
        kin = kinematics(s.a, s.b, p.k);
        all.push_back(make_record(s, p, cfg, kin));
        ++res.steps;
        if (observer) observer(s, kin);
    }
    const auto resid = energy_balance_residual(all, p);
    for (std::size_t j = 0; j < all.size(); ++j) all[j].energy_residual = resid[j];

    for (std::size_t j = 0; j < all.size(); ++j)
        if (j % static_cast<std::size_t>(cfg.record_every) == 0 || j + 1 == all.size())
            res.records.push_back(std::move(all[j]));
    res.final_state = std::move(s);
    return res;
}

}  // namespace oldrlab
