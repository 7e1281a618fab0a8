#include "oldrlab/random.hpp"
#include "oldrlab/regularized.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace oldrlab;

namespace {

RegularizedState strained_state(const Grid& g, double amp) {
    auto b = SpectralField::sample(g, [amp](double x, double y) { return amp * std::sin(x) * std::sin(y); });
    auto a = SpectralField::sample(g, [amp](double x, double y) { return 0.3 * amp * std::cos(x + 2.0 * y); });
    auto rho = SpectralField::sample(g, [](double x, double y) { return 1.0 + 0.2 * std::cos(x - y); });
    // c = 2 rho + 2 sqrt(a^2 + b^2) + margin keeps sigma positive definite.
    std::vector<double> c(g.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = 2.0 * rho[i] + 2.0 * std::hypot(a[i], b[i]) + 0.5;
    auto R = SpectralField::sample(g, [](double x, double y) { return 1.0 + 0.3 * std::sin(x) * std::cos(y); });
    return RegularizedState::from({a, b, SpectralField::from_values(g, c), rho, {}, 0.0, false, {}}, R);
}

}  // namespace

TEST(Delta, BranchValues) {
    const DeltaResponse d(2.0, 1.5);
    EXPECT_EQ(d(0.5), 0.0);
    EXPECT_EQ(d(1.0), 0.0);
    EXPECT_NEAR(d(2.0), 1.5 * 2.0 * std::sqrt(2.0), 1e-14);
    EXPECT_NEAR(d(4.0), 1.5 * 2.0 * std::sqrt(5.0), 1e-14);
    EXPECT_THROW(d(-1.0), ConfigError);
}

TEST(Delta, BlendIsSmoothNonnegativeMonotone) {
    const DeltaResponse d(1.0, 1.5);
    // Value, slope and curvature match at both junctions.
    for (double g0 : {0.5, 1.0}) {
        const double h = 1e-6;
        EXPECT_NEAR(d(g0 - h), d(g0 + h), 1e-5);
        EXPECT_NEAR(d.derivative(g0 - h), d.derivative(g0 + h), 1e-4);
        const double curv_left = (d.derivative(g0 - h) - d.derivative(g0 - 2 * h)) / h;
        const double curv_right = (d.derivative(g0 + 2 * h) - d.derivative(g0 + h)) / h;
        // One-sided differences carry an O(h |delta'''|) error; delta''' jumps by ~900 at kappa/2.
        EXPECT_NEAR(curv_left, curv_right, 5e-3);
    }
    double prev = 0.0;
    for (int i = 0; i <= 2000; ++i) {
        const double g = 2.0 * i / 2000.0;
        EXPECT_GE(d(g), prev);
        EXPECT_GE(d.derivative(g), 0.0);
        prev = d(g);
    }
    // Finite differences agree with the analytic slope inside the blend.
    for (double g : {0.6, 0.75, 0.9}) EXPECT_NEAR((d(g + 1e-7) - d(g - 1e-7)) / 2e-7, d.derivative(g), 1e-6);
}

TEST(Delta, SlopeCapBelowMeanSlopeIsRejected) {
    // Rising from 0 at kappa/2 to C0 kappa sqrt(2) at kappa forces a slope of 2 sqrt(2) C0 somewhere.
    const DeltaResponse d(1.0, 1.5);
    EXPECT_GT(d.max_slope(), d.min_feasible_slope());
    EXPECT_LT(d.max_slope(), d.slope_cap());
    EXPECT_THROW(DeltaResponse(1.0, 1.5, 2.0 * 1.5), ConfigError);
    EXPECT_THROW(DeltaResponse(0.0, 1.5), ConfigError);
}

TEST(Delta, DampingInequalityAboveThreshold) {
    const RegularizedParams p{1.0, 1.0, DeltaResponse(1.0, 1.5), 1.0};
    std::vector<double> g;
    for (int i = 0; i <= 1000; ++i) g.push_back(10.0 * i / 1000.0);
    EXPECT_LE(damping_inequality_max(g, p), 1e-12);
    EXPECT_TRUE(std::isinf(damping_inequality_max(std::vector<double>{0.1, 0.4}, p)));
}

TEST(TraceEnvelope, Examples) {
    EXPECT_NEAR(trace_bound_envelope(0.0, 1.0, 2.0, 2, 0.5, 2.0, 1.0, 1.0), 1.0 + 2.0 * 0.5 / 4.0 * 2.0, 1e-15);
    EXPECT_NEAR(trace_bound_envelope(1.5, 3.0, 2.0, 2, 0.0, 1.0, 1.0, 0.5), std::exp(1.5) * 3.0, 1e-13);
    EXPECT_NEAR(trace_bound_envelope(1.0, 1.0, 1.0, 2, 1.0, 1.0, 1.0, 1.0), 3.0 * std::exp(2.0), 1e-13);
    EXPECT_NEAR(trace_bound_envelope(1.0, 1.0, 1.0, 2, 1.0, 1.0, 1.0, 1.0), 22.17, 5e-3);
    EXPECT_THROW(trace_bound_envelope(1.0, 1.0, 1.0, 2, 1.0, 0.0, 1.0, 1.0), ConfigError);
}

TEST(Regularized, DeltaOffMatchesPlainRhsWithRelaxationField) {
    const Grid g(2, 32);
    const auto s = strained_state(g, 2.0);
    const RegularizedParams p{1.3, 0.7, DeltaResponse(1.0, 1.5), 1.0};
    RegularizedOptions opt;
    opt.delta_off = true;
    const auto t = rhs_regularized(s, p, opt);
    const auto kap = relaxation_field(s.R, p.epsilon);
    RhsOptions ro;
    ro.kappa_field = &kap;
    const auto ref = rhs(s.stress(), ModelParams{1.3, 0.7, 1.0}, ro);
    for (int f = 0; f < 4; ++f) {
        const auto v = t.f[f].values();
        const auto w = ref.f[f].values();
        for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(v[i], w[i], 1e-14 * (1.0 + std::abs(w[i])));
    }
    // R is only transported.
    const auto kin = kinematics(s.a, s.b, p.k);
    const auto adv = detail::advection_values(kin.u, s.R);
    const auto expect = dealias(SpectralField::from_values(g, std::vector<double>(adv.begin(), adv.end())));
    EXPECT_LT(norm_linf(t.f[4] + expect), 1e-13);
}

TEST(Regularized, SubthresholdRunMatchesPlainSolver) {
    const Grid g(2, 32);
    CounterRng rng(4);
    const auto a = random_field(g, rng, 3, 0.02);
    const auto b = random_field(g, rng, 3, 0.02);
    const auto rho = SpectralField::constant(g, 1.0);
    const auto c = SpectralField::constant(g, 2.2);
    const OldroydState s0{a, b, c, rho, {}, 0.0, false, {}};
    const double R = 1.25;
    const auto st = RegularizedState::from(s0, SpectralField::constant(g, R));
    const RegularizedParams p{1.0, 0.8, DeltaResponse(5.0, 1.5), 1.0};
    RegularizedConfig cfg;
    cfg.dt = 1e-2;
    cfg.t_end = 0.5;
    const auto r = run_regularized(st, p, cfg);
    ASSERT_FALSE(r.blowup);
    for (const auto& rec : r.records) {
        EXPECT_LT(rec.grad_u_inf, 2.5);
        EXPECT_EQ(rec.get("delta_max"), 0.0);
    }
    SolverConfig scfg;
    scfg.dt = 1e-2;
    scfg.t_end = 0.5;
    const auto ref = run(s0, ModelParams{1.0, 0.8, R}, scfg);
    const auto& f = r.final_state;
    EXPECT_LT(norm_linf(f.a - ref.final_state.a), 1e-12);
    EXPECT_LT(norm_linf(f.b - ref.final_state.b), 1e-12);
    EXPECT_LT(norm_linf(f.c - ref.final_state.c), 1e-12);
    EXPECT_LT(norm_linf(f.rho - ref.final_state.rho), 1e-12);
    EXPECT_LT(norm_linf(f.R - SpectralField::constant(g, R)), 1e-14);
}

TEST(Regularized, MotionlessStateRelaxesWithLocalRate) {
    // a = b = 0 gives u = 0; then c' = -2 kappa(x) (c - 2 rho) pointwise.
    const Grid g(2, 16);
    const auto z = SpectralField::zeros(g);
    const auto rho = SpectralField::sample(g, [](double x, double y) { return 1.0 + 0.3 * std::sin(x + y); });
    const auto c = SpectralField::sample(g, [](double x, double) { return 4.0 + std::cos(x); });
    const auto R = SpectralField::sample(g, [](double, double y) { return 1.0 + 0.5 * std::cos(y); });
    const auto st = RegularizedState::from({z, z, c, rho, {}, 0.0, false, {}}, R);
    const RegularizedParams p{1.0, 0.6, DeltaResponse(1.0, 1.5), 1.0};
    RegularizedConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    cfg.dealias = false;
    cfg.record_every = 100;
    const auto r = run_regularized(st, p, cfg);
    ASSERT_FALSE(r.blowup);
    const auto& f = r.final_state;
    EXPECT_EQ(norm_linf(f.a), 0.0);
    EXPECT_EQ(norm_linf(f.b), 0.0);
    EXPECT_EQ(norm_linf(f.R - R), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double kap = 0.6 / (R[i] * R[i]);
        EXPECT_NEAR(f.c[i], 2.0 * rho[i] + (c[i] - 2.0 * rho[i]) * std::exp(-2.0 * kap), 1e-11);
    }
}

TEST(Regularized, HighStrainMonitors) {
    const Grid g(2, 32);
    const auto st = strained_state(g, 8.0);
    const RegularizedParams p{1.0, 0.5, DeltaResponse(1.0, 1.5), 1.0};
    RegularizedConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.2;
    cfg.record_every = 10;
    const auto r = run_regularized(st, p, cfg);
    ASSERT_FALSE(r.blowup) << r.reason;
    EXPECT_GT(r.records.front().grad_u_inf, p.delta.kappa());
    EXPECT_GT(r.records.front().get("delta_max"), 0.0);
    EXPECT_LE(r.worst_trace_ratio, 1.0 + 1e-6);
    EXPECT_LE(r.worst_disi, 1e-12);
    EXPECT_GT(r.final_state.R.mean(), st.R.mean());
    for (const auto& rec : r.records) EXPECT_GT(rec.get("grad_sigma_lp"), 0.0);
}

TEST(Regularized, MarkersSeeNondecreasingR) {
    const RegularizedParams p{1.0, 0.5, DeltaResponse(1.0, 1.5), 1.0};
    RegularizedConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.05;
    cfg.markers_per_side = 4;
    cfg.record_every = 10;
    const auto r = run_regularized(strained_state(Grid(2, 64), 8.0), p, cfg);
    EXPECT_LE(r.worst_marker_R_drop_rate, 1e-8);
    cfg.delta_off = true;
    cfg.t_end = 0.1;
    EXPECT_LE(run_regularized(strained_state(Grid(2, 64), 8.0), p, cfg).worst_marker_R_drop_rate, 1e-5);
}

TEST(Regularized, FloorDeficitShrinksUnderRefinement) {
    // delta(|grad u|) is only C^2 across the blend edges, so the truncated
    // product delta R undershoots near them; min R then dips below its floor
    // by an amount that falls off quickly with resolution.
    const RegularizedParams p{1.0, 0.5, DeltaResponse(1.0, 1.5), 1.0};
    RegularizedConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 0.05;
    cfg.record_every = 10;
    const auto coarse = run_regularized(strained_state(Grid(2, 64), 8.0), p, cfg);
    const auto fine = run_regularized(strained_state(Grid(2, 128), 8.0), p, cfg);
    EXPECT_LT(fine.worst_R_floor_deficit, 1e-3);
    EXPECT_LT(fine.worst_R_floor_deficit, 0.25 * coarse.worst_R_floor_deficit);
    EXPECT_LT(fine.worst_min_R_drop, 0.5 * coarse.worst_min_R_drop);
}
