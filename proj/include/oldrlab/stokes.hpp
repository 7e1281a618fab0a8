#pragma once

// Steady Stokes inversion on the 2D torus: velocity, velocity gradient and the
// (lambda, mu, omega) strain/vorticity split produced by an added stress.
//
//   -Delta u + grad p = k div tau,   div u = 0
//   u^i = k Lambda^{-1} (R_l tau^{il} + R_i R_m R_n tau^{mn})
//   grad u = [[lambda, mu - omega/2], [mu + omega/2, -lambda]]
//   omega = 2k (A b - B a), lambda = B omega, mu = -A omega
// with a = (tau11 - tau22)/2 and b = tau12. The isotropic part of tau only
// feeds the pressure.

#include "spectral.hpp"

#include <array>
#include <initializer_list>
#include <utility>
#include <vector>

namespace oldrlab {

/// Symmetric 2D stress (tau21 is tau12).
struct StressField2D {
    SpectralField s11;
    SpectralField s12;
    SpectralField s22;

    static StressField2D from_abc(const SpectralField& a, const SpectralField& b,
                                  const SpectralField& c) {
        return {0.5 * c + a, b, 0.5 * c - a};
    }
    const Grid& grid() const { return s11.grid(); }
    SpectralField a() const { return 0.5 * (s11 - s22); }
    SpectralField b() const { return s12; }
    SpectralField c() const { return s11 + s22; }

    void check() const {
        s11.check_same(s12, "StressField2D");
        s11.check_same(s22, "StressField2D");
        if (s11.grid().dim() != 2) throw GridMismatch("StressField2D: needs a 2D grid");
    }
};

struct VelocityField2D {
    SpectralField u1;
    SpectralField u2;
};

/// grad[i][j] = d u^i / d x_j.
struct VelocityGradient {
    std::array<std::array<SpectralField, 2>, 2> grad;

    const SpectralField& operator()(int i, int j) const { return grad[i][j]; }
    SpectralField divergence() const { return grad[0][0] + grad[1][1]; }
};

struct StrainVorticity {
    SpectralField lambda;
    SpectralField mu;
    SpectralField omega;
};

namespace detail {

using Term = std::pair<const MultiplierSymbol*, std::span<const Complex>>;

/// Sum of symbol * coefficients over the terms, in coefficient space.
inline std::vector<Complex> combine(const Grid& g, std::initializer_list<Term> terms,
                                    double scale = 1.0) {
    std::vector<Complex> out(g.spec_size());
    for (const auto& [sym, c] : terms) {
        const auto table = symbol_table(*sym, g);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*table)[i] * c[i];
    }
    if (scale != 1.0)
        for (auto& v : out) v *= scale;
    return out;
}

inline std::vector<Complex> times(const Grid& g, const MultiplierSymbol& m,
                                  std::span<const Complex> c, double scale = 1.0) {
    return combine(g, {Term{&m, c}}, scale);
}

inline double norm2(double a, double b) { return a * a + b * b; }

/// Stokes velocity symbols: u^i = k sum_{mn} V[i][mn] tau^{mn}, mn in {11,12,22}.
inline const MultiplierSymbol& velocity_symbol(int i, int mn) {
    static const auto make = [](int ii, int which) {
        return MultiplierSymbol("V" + std::to_string(ii) + std::to_string(which),
                                [ii, which](double x1, double x2) {
                                    const double q = norm2(x1, x2);
                                    const double xi = ii == 0 ? x1 : x2;
                                    // R_l tau^{il} part
                                    double direct = 0.0;
                                    if (which == 0) direct = ii == 0 ? x1 : 0.0;
                                    if (which == 1) direct = ii == 0 ? x2 : x1;
                                    if (which == 2) direct = ii == 0 ? 0.0 : x2;
                                    // R_i R_m R_n tau^{mn} part
                                    const double quad = which == 0   ? x1 * x1
                                                        : which == 1 ? 2.0 * x1 * x2
                                                                     : x2 * x2;
                                    return Complex(0.0, direct / q - xi * quad / (q * q));
                                },
                                0.0, 2);
    };
    static const std::array<std::array<MultiplierSymbol, 3>, 2> table{
        {{make(0, 0), make(0, 1), make(0, 2)}, {make(1, 0), make(1, 1), make(1, 2)}}};
    return table[i][mn];
}

/// Velocity symbols in terms of (a, b): u^i = k (Va[i] a + Vb[i] b).
inline const MultiplierSymbol& velocity_ab_symbol(int i, bool of_b) {
    static const MultiplierSymbol a0(
        "Va1",
        [](double x1, double x2) {
            const double q = norm2(x1, x2);
            return Complex(0.0, 2.0 * x1 * x2 * x2 / (q * q));
        },
        0.0, 2);
    static const MultiplierSymbol b0(
        "Vb1",
        [](double x1, double x2) {
            const double q = norm2(x1, x2);
            return Complex(0.0, x2 * (x2 * x2 - x1 * x1) / (q * q));
        },
        0.0, 2);
    static const MultiplierSymbol a1(
        "Va2",
        [](double x1, double x2) {
            const double q = norm2(x1, x2);
            return Complex(0.0, -2.0 * x1 * x1 * x2 / (q * q));
        },
        0.0, 2);
    static const MultiplierSymbol b1(
        "Vb2",
        [](double x1, double x2) {
            const double q = norm2(x1, x2);
            return Complex(0.0, x1 * (x1 * x1 - x2 * x2) / (q * q));
        },
        0.0, 2);
    if (i == 0) return of_b ? b0 : a0;
    return of_b ? b1 : a1;
}

inline const MultiplierSymbol& laplacian_symbol() {
    static const MultiplierSymbol s("neg_lap", [](double a, double b) { return Complex(a * a + b * b); });
    return s;
}

/// xi_m xi_n / |xi|^2 for mn in {11, 12, 22} (0, 1, 2).
inline const MultiplierSymbol& pressure_symbol(int mn) {
    static const MultiplierSymbol p0(
        "P11", [](double a, double b) { return Complex(a * a / norm2(a, b)); }, 0.0, 2);
    static const MultiplierSymbol p1(
        "P12", [](double a, double b) { return Complex(2.0 * a * b / norm2(a, b)); }, 0.0, 2);
    static const MultiplierSymbol p2(
        "P22", [](double a, double b) { return Complex(b * b / norm2(a, b)); }, 0.0, 2);
    return mn == 0 ? p0 : (mn == 1 ? p1 : p2);
}

}  // namespace detail

/// Velocity coefficients (u1, u2) produced by a stress with shear parts (a, b).
inline std::array<std::vector<Complex>, 2> velocity_coeffs_ab(const SpectralField& a,
                                                             const SpectralField& b, double k) {
    a.check_same(b, "velocity_coeffs_ab");
    const Grid& g = a.grid();
    if (g.dim() != 2) throw GridMismatch("velocity: needs a 2D grid");
    using detail::Term;
    using detail::velocity_ab_symbol;
    return {detail::combine(g,
                            {Term{&velocity_ab_symbol(0, false), a.coeffs()},
                             Term{&velocity_ab_symbol(0, true), b.coeffs()}},
                            k),
            detail::combine(g,
                            {Term{&velocity_ab_symbol(1, false), a.coeffs()},
                             Term{&velocity_ab_symbol(1, true), b.coeffs()}},
                            k)};
}

inline VelocityField2D velocity_from_stress(const StressField2D& tau, double k) {
    tau.check();
    const Grid& g = tau.grid();
    using detail::Term;
    using detail::velocity_symbol;
    std::array<std::vector<Complex>, 2> u;
    for (int i = 0; i < 2; ++i)
        u[i] = detail::combine(g,
                               {Term{&velocity_symbol(i, 0), tau.s11.coeffs()},
                                Term{&velocity_symbol(i, 1), tau.s12.coeffs()},
                                Term{&velocity_symbol(i, 2), tau.s22.coeffs()}},
                               k);
    return {SpectralField::from_coeffs(g, std::move(u[0])),
            SpectralField::from_coeffs(g, std::move(u[1]))};
}

/// Velocity from the shear parts only; equal to velocity_from_stress.
inline VelocityField2D velocity_from_ab(const SpectralField& a, const SpectralField& b, double k) {
    auto u = velocity_coeffs_ab(a, b, k);
    return {SpectralField::from_coeffs(a.grid(), std::move(u[0])),
            SpectralField::from_coeffs(a.grid(), std::move(u[1]))};
}

/// Spectral derivatives of a velocity.
inline VelocityGradient velocity_gradient(const VelocityField2D& u) {
    u.u1.check_same(u.u2, "velocity_gradient");
    VelocityGradient out;
    const SpectralField* comp[2] = {&u.u1, &u.u2};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out.grad[i][j] = derivative(*comp[i], j);
    return out;
}

inline VelocityGradient gradient_from_stress(const StressField2D& tau, double k) {
    return velocity_gradient(velocity_from_stress(tau, k));
}

inline StrainVorticity lambda_mu_omega(const SpectralField& a, const SpectralField& b, double k) {
    a.check_same(b, "lambda_mu_omega");
    const Grid& g = a.grid();
    if (g.dim() != 2) throw GridMismatch("lambda_mu_omega: needs a 2D grid");
    using detail::Term;
    // omega = 2k (A b - B a)
    std::vector<Complex> aneg(a.coeffs().begin(), a.coeffs().end());
    for (auto& v : aneg) v = -v;
    auto w = detail::combine(g, {Term{&symbols::A(), b.coeffs()}, Term{&symbols::B(), aneg}},
                             2.0 * k);
    auto lam = detail::times(g, symbols::B(), w);
    auto mu = detail::times(g, symbols::A(), w, -1.0);
    return {SpectralField::from_coeffs(g, std::move(lam)),
            SpectralField::from_coeffs(g, std::move(mu)),
            SpectralField::from_coeffs(g, std::move(w))};
}

/// Assembles grad u from (lambda, mu, omega).
inline VelocityGradient gradient_from_lmw(const StrainVorticity& s) {
    VelocityGradient out;
    out.grad[0][0] = s.lambda;
    out.grad[0][1] = s.mu - 0.5 * s.omega;
    out.grad[1][0] = s.mu + 0.5 * s.omega;
    out.grad[1][1] = -s.lambda;
    return out;
}

/// Sup norm of -Delta u + grad p - k div tau with p = -k R_m R_n tau^{mn}.
inline double stokes_residual(const StressField2D& tau, const VelocityField2D& u, double k) {
    tau.check();
    tau.s11.check_same(u.u1, "stokes_residual");
    tau.s11.check_same(u.u2, "stokes_residual");
    const Grid& g = tau.grid();
    using detail::Term;
    // p-hat = k (xi_m xi_n / |xi|^2) tau-hat^{mn}
    auto p = detail::combine(g,
                             {Term{&detail::pressure_symbol(0), tau.s11.coeffs()},
                              Term{&detail::pressure_symbol(1), tau.s12.coeffs()},
                              Term{&detail::pressure_symbol(2), tau.s22.coeffs()}},
                             k);
    const SpectralField* ui[2] = {&u.u1, &u.u2};
    const SpectralField* row[2][2] = {{&tau.s11, &tau.s12}, {&tau.s12, &tau.s22}};
    double worst = 0.0;
    for (int i = 0; i < 2; ++i) {
        auto r = detail::combine(g, {Term{&detail::laplacian_symbol(), ui[i]->coeffs()},
                                     Term{&symbols::derivative(i), p}});
        auto div = detail::combine(g, {Term{&symbols::derivative(0), row[i][0]->coeffs()},
                                       Term{&symbols::derivative(1), row[i][1]->coeffs()}},
                                   k);
        for (std::size_t s = 0; s < r.size(); ++s) r[s] -= div[s];
        worst = std::max(worst, norm_linf(SpectralField::from_coeffs(g, std::move(r))));
    }
    return worst;
}

/// Pointwise |grad u|^2 = 2 lambda^2 + 2 mu^2 + omega^2 / 2.
inline SpectralField grad_norm_squared(const StrainVorticity& s) {
    std::vector<double> v(s.lambda.values().size());
    const auto l = s.lambda.values();
    const auto m = s.mu.values();
    const auto w = s.omega.values();
    for (std::size_t i = 0; i < v.size(); ++i)
        v[i] = 2.0 * l[i] * l[i] + 2.0 * m[i] * m[i] + 0.5 * w[i] * w[i];
    return SpectralField::from_values(s.lambda.grid(), std::move(v));
}

}  // namespace oldrlab
