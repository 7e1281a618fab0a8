#pragma once

// Strain-responsive regularization. R(x, t) is transported and grows where the
// strain is large, D_t R = delta(|grad u|) R, and the stress feels the pointwise
// relaxation rate epsilon / R^2 plus the extra damping -2 delta sigma.

#include "lagrangian.hpp"
#include "oldroyd2d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace oldrlab {

/// delta(g) = 0 for g <= kappa/2, C0 sqrt(kappa^2 + g^2) for g >= kappa and a
/// quintic blend between them that matches value, slope and curvature at both
/// ends (so delta is C^2). The blend's peak slope is checked against slope_cap
/// over dense samples when the response is built.
class DeltaResponse {
public:
    static constexpr int kSlopeSamples = 10000;

    /// slope_cap <= 0 selects the default 6 C0.
    DeltaResponse(double kappa = 1.0, double C0 = 1.5, double slope_cap = 0.0)
        : kappa_(kappa), c0_(C0), cap_(slope_cap > 0.0 ? slope_cap : 6.0 * C0) {
        if (!(kappa > 0.0)) throw ConfigError("DeltaResponse: kappa must be positive");
        if (!(C0 > 0.0)) throw ConfigError("DeltaResponse: C0 must be positive");
        // Hermite data at s = 1 (g = kappa) in the variable s = (g - kappa/2) / (kappa/2).
        const double h = 0.5 * kappa;
        const double p1 = C0 * kappa * std::sqrt(2.0);
        const double d1 = C0 / std::sqrt(2.0) * h;
        const double dd1 = C0 / (2.0 * std::sqrt(2.0) * kappa) * h * h;
        // p(s) = a3 s^3 + a4 s^4 + a5 s^5 has p = p' = p'' = 0 at s = 0.
        a3_ = 10.0 * p1 - 4.0 * d1 + 0.5 * dd1;
        a4_ = -15.0 * p1 + 7.0 * d1 - dd1;
        a5_ = 6.0 * p1 - 3.0 * d1 + 0.5 * dd1;
        max_slope_ = 0.0;
        for (int i = 0; i <= kSlopeSamples; ++i) {
            const double g = 2.0 * kappa * i / kSlopeSamples;
            max_slope_ = std::max(max_slope_, std::abs(derivative(g)));
        }
        if (max_slope_ > cap_)
            throw ConfigError("DeltaResponse: blend slope " + std::to_string(max_slope_) + " exceeds cap " +
                              std::to_string(cap_));
    }

    double kappa() const { return kappa_; }
    double C0() const { return c0_; }
    double slope_cap() const { return cap_; }
    /// Largest |delta'| over the construction samples on [0, 2 kappa].
    double max_slope() const { return max_slope_; }
    /// Smallest slope cap any blend can meet: the mean slope over (kappa/2, kappa).
    double min_feasible_slope() const { return 2.0 * std::sqrt(2.0) * c0_; }

    double operator()(double g) const {
        if (!(g >= 0.0)) throw ConfigError("DeltaResponse: argument must be nonnegative");
        if (g <= 0.5 * kappa_) return 0.0;
        if (g >= kappa_) return c0_ * std::sqrt(kappa_ * kappa_ + g * g);
        const double s = (g - 0.5 * kappa_) / (0.5 * kappa_);
        return s * s * s * (a3_ + s * (a4_ + s * a5_));
    }

    double derivative(double g) const {
        if (g <= 0.5 * kappa_) return 0.0;
        if (g >= kappa_) return c0_ * g / std::sqrt(kappa_ * kappa_ + g * g);
        const double s = (g - 0.5 * kappa_) / (0.5 * kappa_);
        return s * s * (3.0 * a3_ + s * (4.0 * a4_ + s * 5.0 * a5_)) / (0.5 * kappa_);
    }

private:
    double kappa_;
    double c0_;
    double cap_;
    double a3_ = 0.0, a4_ = 0.0, a5_ = 0.0;
    double max_slope_ = 0.0;
};

struct RegularizedParams {
    double k = 1.0;
    double epsilon = 1.0;
    DeltaResponse delta{};
    /// Norm equivalence constant: max entry of grad u <= c |grad u|.
    double c = 1.0;

    void validate() const {
        if (!(k >= 0.0)) throw ConfigError("RegularizedParams: k must be nonnegative");
        if (!(epsilon >= 0.0)) throw ConfigError("RegularizedParams: epsilon must be nonnegative");
        if (!(c > 0.0)) throw ConfigError("RegularizedParams: c must be positive");
    }
};

struct RegularizedState {
    SpectralField a;
    SpectralField b;
    SpectralField c;
    SpectralField rho;
    SpectralField R;
    /// Positive floor of the initial R.
    double R_min = 1.0;
    double time = 0.0;
    bool blowup = false;
    std::string blowup_reason;

    const Grid& grid() const { return a.grid(); }
    OldroydState stress() const { return {a, b, c, rho, {}, time, blowup, blowup_reason}; }

    void check() const {
        if (a.grid().dim() != 2) throw GridMismatch("RegularizedState: needs a 2D grid");
        for (const auto* f : {&b, &c, &rho, &R}) a.check_same(*f, "RegularizedState");
        if (!(R_min > 0.0)) throw ConfigError("RegularizedState: R_min must be positive");
        for (double r : R.values())
            if (!(r >= R_min * (1.0 - 1e-12))) throw ConfigError("RegularizedState: R below R_min");
    }

    /// Stress state with R0 given; R_min is the continuum minimum of R0.
    static RegularizedState from(const OldroydState& s, const SpectralField& R0) {
        const auto rv = R0.values();
        const double floor = std::min(*std::min_element(rv.begin(), rv.end()), refined_min(R0).value);
        RegularizedState out{s.a, s.b, s.c, s.rho, R0, floor, s.time, false, {}};
        out.check();
        return out;
    }
};

struct RegularizedOptions {
    bool dealias = true;
    bool advection = true;
    /// Forces delta = 0 (plain solver with a frozen relaxation field).
    bool delta_off = false;
};

struct RegularizedTendency {
    /// (a, b, c, rho, R).
    std::array<SpectralField, 5> f;
    SpectralField delta;
    SpectralField grad_norm;
    bool finite = true;
    std::string problem;
};

/// Pointwise Euclidean |grad u| on the grid.
inline std::vector<double> grad_norm_values(const StrainVorticity& s) {
    const auto l = s.lambda.values();
    const auto m = s.mu.values();
    const auto w = s.omega.values();
    std::vector<double> g(l.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::sqrt(2.0 * l[i] * l[i] + 2.0 * m[i] * m[i] + 0.5 * w[i] * w[i]);
    return g;
}

/// kappa(x) = epsilon / R(x)^2.
inline SpectralField relaxation_field(const SpectralField& R, double epsilon) {
    return R.map([epsilon](double r) { return epsilon / (r * r); });
}

inline RegularizedTendency rhs_regularized(const RegularizedState& st, const RegularizedParams& p,
                                           const RegularizedOptions& opt, const Kinematics& kin) {
    const Grid& g = st.grid();
    const auto gn = grad_norm_values(kin.s);
    std::vector<double> dv(gn.size(), 0.0);
    if (!opt.delta_off)
        for (std::size_t i = 0; i < gn.size(); ++i) dv[i] = std::isfinite(gn[i]) ? p.delta(gn[i]) : gn[i];
    RegularizedTendency out;
    out.grad_norm = SpectralField::from_values(g, gn);
    out.delta = SpectralField::from_values(g, dv);
    const SpectralField kap = relaxation_field(st.R, p.epsilon);

    RhsOptions ro;
    ro.dealias = opt.dealias;
    ro.advection = opt.advection;
    ro.kappa_field = &kap;
    ro.damping_field = opt.delta_off ? nullptr : &out.delta;
    Tendency t = rhs(st.stress(), ModelParams{p.k, p.epsilon, 1.0}, ro, kin);
    for (int i = 0; i < 4; ++i) out.f[i] = std::move(t.f[i]);
    out.finite = t.finite;
    out.problem = t.problem;

    const auto R = st.R.values();
    std::vector<double> tR(R.size());
    for (std::size_t i = 0; i < R.size(); ++i) tR[i] = dv[i] * R[i];
    if (opt.advection) {
        const auto adv = detail::advection_values(kin.u, st.R);
        for (std::size_t i = 0; i < R.size(); ++i) tR[i] -= adv[i];
    }
    if (!detail::all_finite(tR)) {
        out.finite = false;
        out.problem = "non-finite tendency";
    }
    out.f[4] = detail::finish(g, std::move(tR), opt.dealias);
    return out;
}

inline RegularizedTendency rhs_regularized(const RegularizedState& st, const RegularizedParams& p,
                                           const RegularizedOptions& opt = {}) {
    return rhs_regularized(st, p, opt, kinematics(st.a, st.b, p.k));
}

/// N0(t) = e^{2 c kappa t} [sup Tr sigma0 + d epsilon / (c kappa R_min^2) |rho0|_inf].
inline double trace_bound_envelope(double t, double sup_trace0, double rho_inf, int d, double epsilon, double R_min,
                                   double c, double kappa) {
    if (!(c > 0.0 && kappa > 0.0 && R_min > 0.0)) throw ConfigError("trace_bound_envelope: c, kappa, R_min must be positive");
    return std::exp(2.0 * c * kappa * t) * (sup_trace0 + d * epsilon / (c * kappa * R_min * R_min) * rho_inf);
}

/// max over grid points with |grad u| >= kappa of 3 c |grad u| - 2 delta; -inf if none.
inline double damping_inequality_max(std::span<const double> grad_norm, const RegularizedParams& p) {
    double worst = -std::numeric_limits<double>::infinity();
    for (double g : grad_norm)
        if (g >= p.delta.kappa()) worst = std::max(worst, 3.0 * p.c * g - 2.0 * p.delta(g));
    return worst;
}

/// (int |grad sigma|^p)^{1/p} with |.| the Frobenius norm over entries and directions.
inline double grad_stress_lp(const RegularizedState& s, double pexp) {
    std::vector<SpectralField> d;
    for (const auto* f : {&s.a, &s.b, &s.c})
        for (int ax = 0; ax < 2; ++ax) d.push_back(derivative(*f, ax));
    const std::size_t N = s.a.values().size();
    double sum = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        double q = 0.0;
        for (int ax = 0; ax < 2; ++ax) {
            const double da = d[ax][i], db = d[2 + ax][i], dc = d[4 + ax][i];
            q += 2.0 * da * da + 2.0 * db * db + 0.5 * dc * dc;
        }
        sum += std::pow(q, 0.5 * pexp);
    }
    return std::pow(sum * s.grid().volume() / static_cast<double>(N), 1.0 / pexp);
}

struct RegularizedConfig {
    double dt = 1e-3;
    double t_end = 1.0;
    bool dealias = true;
    bool advection = true;
    bool delta_off = false;
    double cfl_guard = 0.5;
    int record_every = 1;
    /// Exponent of the recorded gradient norm of sigma (p > d).
    double grad_p = 3.0;
    /// Markers per side for R monotonicity along paths (0 disables).
    int markers_per_side = 0;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("RegularizedConfig: dt must be positive");
        if (!(t_end >= 0.0)) throw ConfigError("RegularizedConfig: t_end must be nonnegative");
        if (!(cfl_guard > 0.0 && cfl_guard < 1.0)) throw ConfigError("RegularizedConfig: cfl_guard must lie in (0, 1)");
        if (record_every < 1) throw ConfigError("RegularizedConfig: record_every must be >= 1");
        if (!(grad_p >= 1.0)) throw ConfigError("RegularizedConfig: grad_p must be >= 1");
        if (markers_per_side < 0) throw ConfigError("RegularizedConfig: markers_per_side must be >= 0");
    }
};

struct RegularizedRun {
    /// Fixed columns as for the plain solver; extras: sup_trace, trace_envelope,
    /// trace_ratio, R_min, delta_max, disi_max, grad_sigma_lp.
    std::vector<DiagnosticsRecord> records;
    RegularizedState final_state;
    bool blowup = false;
    std::string reason;
    int steps = 0;
    /// max over steps of sup Tr sigma / N0(t).
    double worst_trace_ratio = 0.0;
    /// max over steps of the damping inequality on {|grad u| >= kappa}.
    double worst_disi = -std::numeric_limits<double>::infinity();
    /// Largest decrease of the continuum min_x R between consecutive records.
    double worst_min_R_drop = 0.0;
    /// Largest shortfall of the grid values of R below the initial floor R_min.
    double worst_R_floor_deficit = 0.0;
    /// Largest per-unit-time decrease of R along a marker (0 if none tracked).
    double worst_marker_R_drop_rate = 0.0;
};

inline RegularizedRun run_regularized(const RegularizedState& state0, const RegularizedParams& p,
                                      const RegularizedConfig& cfg) {
    p.validate();
    cfg.validate();
    state0.check();
    const RegularizedOptions opt{cfg.dealias, cfg.advection, cfg.delta_off};
    RegularizedState s = state0;
    if (cfg.dealias)
        for (auto* f : {&s.a, &s.b, &s.c, &s.rho, &s.R}) *f = dealias(*f);

    // Envelope data come from the initial state.
    double sup_tr0 = -INFINITY, rho_inf = 0.0;
    for (double v : s.c.values()) sup_tr0 = std::max(sup_tr0, v);
    for (double v : s.rho.values()) rho_inf = std::max(rho_inf, std::abs(v));
    auto envelope = [&](double t) {
        return trace_bound_envelope(t - state0.time, sup_tr0, rho_inf, 2, p.epsilon, s.R_min, p.c, p.delta.kappa());
    };

    const SolverConfig scfg{cfg.dt, cfg.t_end, cfg.dealias, SolverMode::relaxational, cfg.cfl_guard, cfg.advection};
    const ModelParams mp{p.k, p.epsilon, 1.0};
    RegularizedRun res;
    double last_min_R = INFINITY;
    auto record = [&](const RegularizedState& x, const Kinematics& kin, long step) {
        const auto gn = grad_norm_values(kin.s);
        double sup_tr = -INFINITY, grid_rmin = INFINITY, dmax = 0.0;
        for (double v : x.c.values()) sup_tr = std::max(sup_tr, v);
        for (double v : x.R.values()) grid_rmin = std::min(grid_rmin, v);
        if (!cfg.delta_off)
            for (double g : gn) dmax = std::max(dmax, p.delta(g));
        const double env = envelope(x.time);
        const double disi = damping_inequality_max(gn, p);
        res.worst_trace_ratio = std::max(res.worst_trace_ratio, sup_tr / env);
        res.worst_disi = std::max(res.worst_disi, disi);
        res.worst_R_floor_deficit = std::max(res.worst_R_floor_deficit, x.R_min - grid_rmin);
        if (step % cfg.record_every != 0) return;
        const double rmin = std::min(grid_rmin, refined_min(x.R).value);
        if (std::isfinite(last_min_R)) res.worst_min_R_drop = std::max(res.worst_min_R_drop, last_min_R - rmin);
        last_min_R = rmin;
        auto r = make_record(x.stress(), mp, scfg, kin);
        r.set("sup_trace", sup_tr);
        r.set("trace_envelope", env);
        r.set("trace_ratio", sup_tr / env);
        r.set("R_min", rmin);
        r.set("delta_max", dmax);
        r.set("disi_max", std::isfinite(disi) ? disi : 0.0);
        r.set("grad_sigma_lp", grad_stress_lp(x, cfg.grad_p));
        res.records.push_back(std::move(r));
    };

    // Markers ride the velocity snapshots of every step; R is read off the
    // Eulerian field at each marker after each marker step of 2 dt.
    const bool track = cfg.markers_per_side > 0;
    ParticleSet markers;
    SnapshotSampler sampler;
    std::vector<double> marker_R;
    auto R_at_markers = [&](const SpectralField& R) {
        const PointEvaluator ev(std::vector<SpectralField>{R});
        std::vector<double> out;
        for (const auto& m : markers.particles) out.push_back(ev.values(m.X)[0]);
        return out;
    };
    if (track) {
        markers = ParticleSet::lattice(cfg.markers_per_side, 0.0);
        markers.time = s.time;
        marker_R = R_at_markers(s.R);
    }

    const long nsteps = std::lround(cfg.t_end / cfg.dt);
    Kinematics kin = kinematics(s.a, s.b, p.k);
    record(s, kin, 0);
    if (track) sampler.add(s.time, kin.u);
    const double dt = cfg.dt;
    for (long i = 0; i < nsteps; ++i) {
        const double courant = kin.courant_speed * dt / s.grid().spacing();
        if (!std::isfinite(courant)) {
            res.blowup = true;
            res.reason = "non-finite velocity";
            break;
        }
        if (courant > cfg.cfl_guard) throw CflViolation(courant, cfg.cfl_guard);

        auto fields = [](const RegularizedState& x) {
            return std::array<SpectralField, 5>{x.a, x.b, x.c, x.rho, x.R};
        };
        auto rebuild = [&](std::array<SpectralField, 5> f, double t) {
            RegularizedState x = s;
            x.a = std::move(f[0]);
            x.b = std::move(f[1]);
            x.c = std::move(f[2]);
            x.rho = std::move(f[3]);
            x.R = std::move(f[4]);
            x.time = t;
            return x;
        };
        auto axpy = [](std::array<SpectralField, 5> y, double h, const std::array<SpectralField, 5>& k) {
            for (int j = 0; j < 5; ++j) y[j].axpy(h, k[j]);
            return y;
        };
        const auto y = fields(s);
        std::string problem;
        auto stage = [&](const RegularizedState& x, const Kinematics* known) {
            auto t = known ? rhs_regularized(x, p, opt, *known) : rhs_regularized(x, p, opt);
            if (!t.finite && problem.empty()) problem = t.problem;
            return t.f;
        };
        const auto k1 = stage(s, &kin);
        const auto k2 = stage(rebuild(axpy(y, 0.5 * dt, k1), s.time + 0.5 * dt), nullptr);
        const auto k3 = stage(rebuild(axpy(y, 0.5 * dt, k2), s.time + 0.5 * dt), nullptr);
        const auto k4 = stage(rebuild(axpy(y, dt, k3), s.time + dt), nullptr);
        auto next = y;
        for (int j = 0; j < 5; ++j) {
            next[j].axpy(dt / 6.0, k1[j]);
            next[j].axpy(dt / 3.0, k2[j]);
            next[j].axpy(dt / 3.0, k3[j]);
            next[j].axpy(dt / 6.0, k4[j]);
        }
        bool finite = problem.empty();
        for (const auto& f : next) finite = finite && detail::all_finite(f.values());
        if (!finite) {
            res.blowup = true;
            res.reason = problem.empty() ? "non-finite state" : problem;
            break;
        }
        s = rebuild(std::move(next), state0.time + (i + 1) * dt);
        kin = kinematics(s.a, s.b, p.k);
        ++res.steps;
        record(s, kin, res.steps);
        if (track) {
            sampler.add(s.time, kin.u);
            if (res.steps % 2 == 0) {
                markers = advance_particles(markers, sampler, 2.0 * dt);
                sampler.prune_before(s.time - 2.0 * dt);
                const auto now = R_at_markers(s.R);
                for (std::size_t m = 0; m < now.size(); ++m)
                    res.worst_marker_R_drop_rate =
                        std::max(res.worst_marker_R_drop_rate, (marker_R[m] - now[m]) / (2.0 * dt));
                marker_R = now;
            }
        }
    }
    if (res.blowup) {
        s.blowup = true;
        s.blowup_reason = res.reason;
    }
    if (res.records.empty() || res.records.back().t != s.time) record(s, kin, 0);
    res.final_state = std::move(s);
    return res;
}

}  // namespace oldrlab
