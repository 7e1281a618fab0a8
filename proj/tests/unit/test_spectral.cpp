#include "oldrlab/evaluate.hpp"
#include "oldrlab/random.hpp"
#include "oldrlab/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace oldrlab;

namespace {

double max_diff(const SpectralField& a, const SpectralField& b) { return norm_linf(a - b); }

}  // namespace

TEST(Grid, RejectsBadSizes) {
    EXPECT_THROW(Grid(2, 4), ConfigError);
    EXPECT_THROW(Grid(2, 48), ConfigError);
    EXPECT_THROW(Grid(3, 16), ConfigError);
    const Grid g(2, 16);
    EXPECT_DOUBLE_EQ(g.spacing(), kTwoPi / 16);
    EXPECT_EQ(g.wavenumber(8), -8);
    EXPECT_EQ(g.wavenumber(7), 7);
}

TEST(SpectralField, MeanIsZeroCoefficient) {
    const Grid g(2, 16);
    auto f = SpectralField::sample(g, [](double x, double y) { return 3.0 + std::cos(x) * std::sin(2 * y); });
    EXPECT_NEAR(f.coeffs()[0].real(), 3.0, 1e-14);
    EXPECT_NEAR(integral(f), 3.0 * g.volume(), 1e-12);
}

TEST(SpectralField, RoundTrip) {
    for (int dim : {1, 2}) {
        const Grid g(dim, 64);
        CounterRng rng(7, static_cast<std::uint64_t>(dim));
        std::vector<double> v(g.size());
        for (auto& x : v) x = rng.next_normal();
        auto f = SpectralField::from_values(g, v);
        auto back = SpectralField::from_coeffs(g, std::vector<Complex>(f.coeffs().begin(), f.coeffs().end()));
        double err = 0.0;
        double sup = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            err = std::max(err, std::abs(back[i] - v[i]));
            sup = std::max(sup, std::abs(v[i]));
        }
        EXPECT_LE(err, 1e-13 * sup);
        EXPECT_NEAR(norm_l2(f), norm_l2_spectral(f), 1e-12 * norm_l2(f));
    }
}

TEST(SpectralField, GridMismatchThrows) {
    auto a = SpectralField::zeros(Grid(2, 16));
    auto b = SpectralField::zeros(Grid(2, 32));
    EXPECT_THROW(a + b, GridMismatch);
    EXPECT_THROW(hilbert(a), GridMismatch);
    EXPECT_THROW(op_A(SpectralField::zeros(Grid(1, 16))), GridMismatch);
}

TEST(Multiplier, AOnCosX1) {
    const Grid g(2, 32);
    auto f = SpectralField::sample(g, [](double x, double) { return std::cos(x); });
    auto expect = SpectralField::sample(g, [](double x, double) { return -0.5 * std::cos(x); });
    EXPECT_LE(max_diff(op_A(f), expect), 1e-14);
}

TEST(Multiplier, BOnProductMode) {
    const Grid g(2, 32);
    auto f = SpectralField::sample(g, [](double x, double y) { return std::cos(x) * std::cos(y); });
    auto expect = SpectralField::sample(g, [](double x, double y) { return 0.5 * std::sin(x) * std::sin(y); });
    EXPECT_LE(max_diff(op_B(f), expect), 1e-14);
}

TEST(Multiplier, ZeroModeMapsToStoredValue) {
    const Grid g(2, 16);
    auto f = SpectralField::constant(g, 2.5);
    for (const auto* m : {&symbols::A(), &symbols::B(), &symbols::riesz(0), &symbols::riesz(1)})
        EXPECT_EQ(norm_linf(apply_multiplier(f, *m)), 0.0) << m->name();
    const MultiplierSymbol two("two", [](double, double) { return Complex(2.0); }, 2.0);
    EXPECT_NEAR(norm_linf(apply_multiplier(f, two) - 5.0 * SpectralField::constant(g, 1.0)), 0.0, 1e-14);
}

TEST(Multiplier, DegreeZeroHomogeneity) {
    for (const auto* m : {&symbols::A(), &symbols::B(), &symbols::riesz(0), &symbols::riesz(1)}) {
        for (double a : {0.3, -1.0, 2.0})
            for (double b : {0.7, 0.0, -5.0}) EXPECT_NEAR(std::abs((*m)(a, b) - (*m)(2 * a, 2 * b)), 0.0, 1e-15);
    }
    EXPECT_EQ(symbols::hilbert()(3.0), Complex(0.0, -1.0));
    EXPECT_EQ(symbols::hilbert()(-3.0), Complex(0.0, 1.0));
}

TEST(Multiplier, NonHermitianSymbolIsInternalError) {
    const Grid g(1, 16);
    // Real and odd: maps real fields to imaginary ones.
    const MultiplierSymbol bad("bad", [](double a, double) { return Complex(a > 0 ? 1.0 : -1.0); });
    auto f = SpectralField::sample(g, [](double x) { return std::cos(x); });
    EXPECT_THROW(apply_multiplier(f, bad), InternalError);
}

TEST(Derivative, Examples) {
    const Grid g(2, 32);
    auto s = SpectralField::sample(g, [](double x, double) { return std::sin(x); });
    auto c = SpectralField::sample(g, [](double x, double) { return std::cos(x); });
    EXPECT_LE(max_diff(derivative(s, 0), c), 1e-14);
    EXPECT_EQ(norm_linf(derivative(SpectralField::constant(g, 4.0), 1)), 0.0);
    auto c2 = SpectralField::sample(g, [](double, double y) { return std::cos(2 * y); });
    auto e2 = SpectralField::sample(g, [](double, double y) { return -2 * std::sin(2 * y); });
    EXPECT_LE(max_diff(derivative(c2, 1), e2), 1e-13);
    EXPECT_THROW(derivative(SpectralField::zeros(Grid(1, 16)), 1), GridMismatch);
}

TEST(InverseLaplacian, Examples) {
    const Grid g(2, 32);
    auto c1 = SpectralField::sample(g, [](double x, double) { return std::cos(x); });
    EXPECT_LE(max_diff(inverse_laplacian(c1), c1), 1e-14);
    auto c2 = SpectralField::sample(g, [](double x, double) { return std::cos(2 * x); });
    EXPECT_LE(max_diff(inverse_laplacian(c2), 0.25 * c2), 1e-14);
    EXPECT_EQ(norm_linf(inverse_laplacian(SpectralField::constant(g, 1.0))), 0.0);
}

TEST(Hilbert, Examples) {
    const Grid g(1, 64);
    auto c = SpectralField::sample(g, [](double x) { return std::cos(x); });
    auto s = SpectralField::sample(g, [](double x) { return std::sin(x); });
    EXPECT_LE(max_diff(hilbert(c), s), 1e-14);
    EXPECT_LE(max_diff(hilbert(s), -c), 1e-14);
    EXPECT_EQ(norm_linf(hilbert(SpectralField::constant(g, 3.0))), 0.0);
}

TEST(Dealias, Examples) {
    const Grid g(2, 64);
    auto low = SpectralField::sample(g, [](double x, double y) { return std::cos(x) + std::sin(y) + std::cos(x + y); });
    EXPECT_LE(max_diff(dealias(low), low), 1e-14);
    auto high = SpectralField::sample(g, [](double x, double) { return std::cos((64 / 2 - 1) * x); });
    EXPECT_LE(norm_linf(dealias(high)), 1e-13);
    const int m = 64 / 3 + 1;
    auto mix = SpectralField::sample(g, [m](double x, double) { return std::cos(x) + std::cos(m * x); });
    auto c1 = SpectralField::sample(g, [](double x, double) { return std::cos(x); });
    EXPECT_LE(max_diff(dealias(mix), c1), 1e-13);
}

TEST(Nyquist, OddSymbolsVanishEvenSymbolsKept) {
    const Grid g(1, 16);
    auto f = SpectralField::sample(g, [](double x) { return std::cos(8 * x); });
    EXPECT_LE(norm_linf(derivative(f, 0)), 1e-14);
    EXPECT_LE(norm_linf(hilbert(f)), 1e-14);
    EXPECT_LE(max_diff(inverse_laplacian(f), f * (1.0 / 64.0)), 1e-14);
}

class OperatorIdentities : public ::testing::Test {
protected:
    Grid g{2, 64};
    CounterRng rng{2024};
    SpectralField next() { return random_field(g, rng, 20, 1.0, 0.5); }
};

TEST_F(OperatorIdentities, FourASquaredPlusBSquaredIsIdentity) {
    for (int i = 0; i < 20; ++i) {
        auto f = next();
        auto id = 4.0 * (op_A(op_A(f)) + op_B(op_B(f)));
        EXPECT_LE(max_diff(id, f), 1e-12 * norm_linf(f));
    }
}

TEST_F(OperatorIdentities, ACommutesWithB) {
    for (int i = 0; i < 20; ++i) {
        auto f = next();
        EXPECT_LE(max_diff(op_A(op_B(f)), op_B(op_A(f))), 1e-12 * norm_linf(f));
    }
}

TEST_F(OperatorIdentities, SelfAdjoint) {
    for (int i = 0; i < 20; ++i) {
        auto f = next();
        auto h = next();
        const double scale = norm_l2(f) * norm_l2(h);
        EXPECT_LE(std::abs(inner(op_A(f), h) - inner(f, op_A(h))), 1e-12 * scale);
        EXPECT_LE(std::abs(inner(op_B(f), h) - inner(f, op_B(h))), 1e-12 * scale);
    }
}

TEST_F(OperatorIdentities, RieszSquaresSumToMinusIdentity) {
    auto f = next();
    auto s = riesz(riesz(f, 0), 0) + riesz(riesz(f, 1), 1);
    EXPECT_LE(max_diff(s, -f), 1e-12 * norm_linf(f));
}

TEST(HilbertIdentity, SquareIsMinusIdentity) {
    const Grid g(1, 128);
    CounterRng rng(99);
    for (int i = 0; i < 20; ++i) {
        auto f = random_field(g, rng, 40);
        EXPECT_LE(max_diff(hilbert(hilbert(f)), -f), 1e-12 * norm_linf(f));
    }
}

TEST(PointEvaluator, MatchesGridAndDerivatives) {
    const Grid g(2, 32);
    auto f = SpectralField::sample(g, [](double x, double y) { return std::sin(2 * x) * std::cos(y) + 0.5; });
    PointEvaluator ev(f);
    EXPECT_NEAR(ev.value({g.coord(3), g.coord(5)}), f.at(3, 5), 1e-14);
    const Vec2 p{0.37, 1.91};
    auto j = ev.jets(p)[0];
    EXPECT_NEAR(j.f, std::sin(2 * p.x) * std::cos(p.y) + 0.5, 1e-14);
    EXPECT_NEAR(j.fx, 2 * std::cos(2 * p.x) * std::cos(p.y), 1e-13);
    EXPECT_NEAR(j.fy, -std::sin(2 * p.x) * std::sin(p.y), 1e-13);
    EXPECT_NEAR(j.fxy, -2 * std::cos(2 * p.x) * std::sin(p.y), 1e-13);
}

TEST(RefinedExtrema, FindsContinuumMaximum) {
    const Grid g(2, 32);
    // Maximum 1.3 at (0.1, 0.2), off the grid.
    auto f = SpectralField::sample(g, [](double x, double y) { return 0.3 + std::cos(x - 0.1) * std::cos(y - 0.2); });
    auto mx = refined_max(f);
    EXPECT_NEAR(mx.value, 1.3, 1e-13);
    EXPECT_NEAR(refined_min(f).value, -0.7, 1e-13);
    EXPECT_NEAR(refined_sup_abs(f), 1.3, 1e-13);
}
