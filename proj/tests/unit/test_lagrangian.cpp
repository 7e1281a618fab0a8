#include "oldrlab/lagrangian.hpp"
#include "oldrlab/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace oldrlab;

namespace {

double mat_diff(const Mat2& a, const Mat2& b) { return (a - b).max_abs(); }

/// Integrates the constant-gradient stress ODE with small RK4 steps.
Mat2 integrate_stress(const Mat2& G, double t, double k0, Mat2 s, double rho0, int steps) {
    auto f = [&](const Mat2& x) {
        return G * x + x * G.transpose() + (-2.0 * k0) * x + (2.0 * k0 * rho0) * Mat2::identity();
    };
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        const Mat2 k1 = f(s);
        const Mat2 k2 = f(s + (0.5 * h) * k1);
        const Mat2 k3 = f(s + (0.5 * h) * k2);
        const Mat2 k4 = f(s + h * k3);
        s = s + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return s;
}

}  // namespace

TEST(Particles, ZeroVelocity) {
    auto ps = ParticleSet::lattice(3, 0.4);
    const auto still = AnalyticSampler::constant_gradient(Mat2{});
    for (int i = 0; i < 50; ++i) ps = advance_particles(ps, still, 0.02);
    const double t = ps.time;
    const double j = (std::exp(2 * 0.4 * t) - 1.0) / (2 * 0.4);
    for (const auto& p : ps.particles) {
        EXPECT_NEAR((p.X - p.label).norm(), 0.0, 1e-15);
        EXPECT_LE(mat_diff(p.F, Mat2::identity()), 1e-15);
        EXPECT_LE(mat_diff(p.J, Mat2::diag(j, j)), 1e-10);
    }
    std::vector<double> rho(ps.particles.size(), 1.5);
    std::vector<Mat2> s0(ps.particles.size(), Mat2::of(2.0, 0.3, 0.3, 1.0));
    const auto s = stress_reconstruct(ps, rho, s0);
    const double e = std::exp(-2 * 0.4 * t);
    const Mat2 expect = e * s0[0] + ((1 - e) * 1.5) * Mat2::identity();
    EXPECT_LE(mat_diff(s[0], expect), 1e-10);
}

TEST(Particles, RigidRotation) {
    auto ps = ParticleSet::at_labels({{1.0, 0.5}, {-0.3, 2.0}}, 0.0);
    const auto rot = AnalyticSampler::rotation();
    for (int i = 0; i < 100; ++i) ps = advance_particles(ps, rot, 0.01);
    const double t = 1.0;
    const Mat2 R = Mat2::of(std::cos(t), -std::sin(t), std::sin(t), std::cos(t));
    for (const auto& p : ps.particles) {
        EXPECT_LE((p.X - R * p.label).norm(), 1e-9);
        EXPECT_NEAR(p.F.det(), 1.0, 1e-10);
    }
    // theta0 = sin(a1) transported: theta(x, t) = sin((R^T x)_1).
    auto grad_now = [&](Vec2 x) {
        const Vec2 a = R.transpose() * x;
        return R * Vec2{std::cos(a.x), 0.0};
    };
    auto grad0 = [](Vec2 a) { return Vec2{std::cos(a.x), 0.0}; };
    EXPECT_LE(ertel_check(ps, grad_now, grad0), 1e-8);
}

TEST(Particles, SteadyShear) {
    auto ps = ParticleSet::at_labels({{0.2, 0.7}, {1.0, 2.5}, {3.0, -1.0}}, 0.0);
    const auto sh = AnalyticSampler::shear();
    for (int i = 0; i < 100; ++i) ps = advance_particles(ps, sh, 0.01);
    for (const auto& p : ps.particles) {
        const double t = 1.0;
        EXPECT_LE((p.X - Vec2{p.label.x + t * std::sin(p.label.y), p.label.y}).norm(), 1e-12);
        EXPECT_LE(mat_diff(p.F, Mat2::of(1.0, t * std::cos(p.label.y), 0.0, 1.0)), 1e-12);
        EXPECT_NEAR(p.F.det(), 1.0, 1e-12);
    }
    // theta0 = cos(a1 + a2); theta(x) = cos(x1 - t sin x2 + x2).
    auto grad_now = [](Vec2 x) {
        const double s = -std::sin(x.x - std::sin(x.y) + x.y);
        return Vec2{s, s * (1.0 - std::cos(x.y))};
    };
    auto grad0 = [](Vec2 a) {
        const double s = -std::sin(a.x + a.y);
        return Vec2{s, s};
    };
    EXPECT_LE(ertel_check(ps, grad_now, grad0), 1e-8);
}

TEST(Particles, DensityIsCarriedByLabels) {
    const Grid g(2, 16);
    auto rho0 = SpectralField::sample(g, [](double x, double y) { return 1.0 + 0.5 * std::cos(x) * std::sin(y); });
    auto ps = ParticleSet::at_labels({{0.3, 0.9}}, 0.0);
    const auto rot = AnalyticSampler::rotation();
    for (int i = 0; i < 10; ++i) ps = advance_particles(ps, rot, 0.1);
    EXPECT_NEAR(density_at_particles(ps, rho0)[0], 1.0 + 0.5 * std::cos(0.3) * std::sin(0.9), 1e-14);
}

TEST(ConstantGradient, StretchingClosedForm) {
    const double delta = 0.81;
    const double sd = std::sqrt(delta);
    const Mat2 G = Mat2::of(0.0, sd, sd, 0.0);
    const double c = 1.7;
    const double rho0 = 0.6;
    for (double t : {0.1, 0.5, 1.3}) {
        const Mat2 F = constant_gradient_flow(G, t);
        const Mat2 e = F * (c * rho0 * Mat2::identity()) * F.transpose();
        EXPECT_NEAR(e(0, 0), c * rho0 * std::cosh(2 * t * sd), 1e-12);
        EXPECT_NEAR(e(1, 1), c * rho0 * std::cosh(2 * t * sd), 1e-12);
        EXPECT_NEAR(e(0, 1), c * rho0 * std::sinh(2 * t * sd), 1e-12);
        // With rho0 = 0 the reference is the damped stretched stress alone.
        const Mat2 only = constant_gradient_reference(G, t, 0.3, c * rho0 * Mat2::identity(), 0.0);
        EXPECT_LE(mat_diff(only, std::exp(-0.6 * t) * e), 1e-12);
    }
}

TEST(ConstantGradient, AgreesWithOdeIntegration) {
    const Mat2 s0 = Mat2::of(1.2, 0.1, 0.1, 0.8);
    const double k0 = 0.35;
    for (const Mat2& G : {Mat2::of(0.3, 0.9, 0.2, -0.3), Mat2::of(0.1, -1.0, 0.8, -0.1),
                          Mat2::of(0.0, 1.0, 0.0, 0.0), Mat2{}}) {
        const Mat2 ref = constant_gradient_reference(G, 2.0, k0, s0, 1.1);
        const Mat2 ode = integrate_stress(G, 2.0, k0, s0, 1.1, 4000);
        EXPECT_LE(mat_diff(ref, ode), 1e-10 * std::max(1.0, ref.max_abs()));
    }
}

TEST(ConstantGradient, MatchesParticleOracle) {
    const double k0 = 0.5;
    for (const Mat2& G : {Mat2::of(0.3, 0.9, 0.2, -0.3), Mat2::of(0.0, -0.7, 0.7, 0.0)}) {
        auto ps = ParticleSet::at_labels({{0.0, 0.0}, {1.0, -2.0}}, k0);
        const auto v = AnalyticSampler::constant_gradient(G);
        for (int i = 0; i < 400; ++i) ps = advance_particles(ps, v, 0.0025);
        const Mat2 s0 = Mat2::of(1.0, 0.2, 0.2, 1.5);
        const auto s = stress_reconstruct(ps, {0.9, 0.9}, {s0, s0});
        const Mat2 ref = constant_gradient_reference(G, ps.time, k0, s0, 0.9);
        EXPECT_LE(mat_diff(s[0], ref), 1e-10 * ref.max_abs());
        EXPECT_LE(mat_diff(s[1], ref), 1e-10 * ref.max_abs());
        EXPECT_GE(s[0].sym_eigenvalues()[1], -1e-10);
    }
}

TEST(ConstantGradient, Classification) {
    const double k0 = 0.5;
    const Mat2 s0 = Mat2::identity();
    const char* expected[] = {"bounded", "bounded", "growing"};
    int i = 0;
    for (double ratio : {0.25, 1.0, 4.0}) {
        const double sd = std::sqrt(ratio) * k0;
        const auto cls = classify_constant_gradient(Mat2::of(0.0, sd, sd, 0.0), k0, s0, 1.0);
        EXPECT_STREQ(cls == GrowthClass::growing ? "growing" : "bounded", expected[i++]) << ratio;
    }
    // Rotation-dominated gradients stay bounded.
    EXPECT_EQ(classify_constant_gradient(Mat2::of(0.0, -2.0, 2.0, 0.0), k0, s0, 1.0), GrowthClass::bounded);
}

TEST(SnapshotSampler, ExactAtNodesAndInterpolatesPolynomials) {
    const Grid g(2, 16);
    SnapshotSampler s;
    auto field = [&](double t) {
        auto u1 = SpectralField::sample(g, [t](double, double y) { return (1 + t + t * t) * std::sin(y); });
        return VelocityField2D{u1, SpectralField::zeros(g)};
    };
    for (int i = 0; i < 5; ++i) s.add(0.1 * i, field(0.1 * i));
    const Vec2 x{0.3, 1.1};
    EXPECT_NEAR(s.sample(x, 0.2).u.x, (1 + 0.2 + 0.04) * std::sin(1.1), 1e-14);
    EXPECT_NEAR(s.sample(x, 0.23).u.x, (1 + 0.23 + 0.23 * 0.23) * std::sin(1.1), 1e-13);
    EXPECT_NEAR(s.sample(x, 0.23).grad(0, 1), (1 + 0.23 + 0.23 * 0.23) * std::cos(1.1), 1e-13);
    EXPECT_THROW(s.sample(x, 0.5), ConfigError);
}
