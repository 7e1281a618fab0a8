#pragma once

// Lagrangian solution oracle. Particles carry position X, deformation gradient
// F = grad_a X and the memory integral
//   J(t) = int_0^t e^{2 kappa0 s} (F(s)^T F(s))^{-1} ds,
// from which the stress along the path is
//   sigma = F [2 kappa0 rho0 e^{-2 kappa0 t} J + e^{-2 kappa0 t} sigma0] F^T.
// This solves D_t sigma = G sigma + sigma G^T - 2 kappa0 sigma + 2 kappa0 rho I
// with G = grad u, independently of any Eulerian discretization.

#include "evaluate.hpp"
#include "spectral.hpp"
#include "stokes.hpp"

#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

namespace oldrlab {

struct VelocitySample {
    Vec2 u;
    /// G(i, j) = d u^i / d x_j.
    Mat2 grad;
};

class VelocitySampler {
public:
    virtual ~VelocitySampler() = default;
    virtual VelocitySample sample(Vec2 x, double t) const = 0;
};

/// Velocity given by a closed-form function of (x, t).
class AnalyticSampler : public VelocitySampler {
public:
    explicit AnalyticSampler(std::function<VelocitySample(Vec2, double)> fn) : fn_(std::move(fn)) {}
    VelocitySample sample(Vec2 x, double t) const override { return fn_(x, t); }

    /// u = G x with a constant traceless G.
    static AnalyticSampler constant_gradient(const Mat2& G) {
        return AnalyticSampler([G](Vec2 x, double) { return VelocitySample{G * x, G}; });
    }
    /// Rigid rotation u = (-x2, x1).
    static AnalyticSampler rotation() {
        return constant_gradient(Mat2::of(0.0, -1.0, 1.0, 0.0));
    }
    /// Steady shear u = (sin x2, 0).
    static AnalyticSampler shear() {
        return AnalyticSampler([](Vec2 x, double) {
            return VelocitySample{{std::sin(x.y), 0.0}, Mat2::of(0.0, std::cos(x.y), 0.0, 0.0)};
        });
    }

private:
    std::function<VelocitySample(Vec2, double)> fn_;
};

/// Spectral velocity snapshots evaluated by direct Fourier summation and
/// interpolated in time with 4-point Lagrange polynomials (exact at nodes).
class SnapshotSampler : public VelocitySampler {
public:
    explicit SnapshotSampler(double prune_rel = 1e-16) : prune_(prune_rel) {}

    void add(double t, const VelocityField2D& u) {
        if (!times_.empty() && t <= times_.back()) throw ConfigError("SnapshotSampler: times must increase");
        times_.push_back(t);
        evals_.push_back(std::make_shared<PointEvaluator>(std::vector<SpectralField>{u.u1, u.u2}, prune_));
    }
    /// Drops snapshots older than t_keep (keeps at least the last four).
    void prune_before(double t_keep) {
        std::size_t drop = 0;
        while (drop + 4 < times_.size() && times_[drop + 1] < t_keep) ++drop;
        times_.erase(times_.begin(), times_.begin() + static_cast<std::ptrdiff_t>(drop));
        evals_.erase(evals_.begin(), evals_.begin() + static_cast<std::ptrdiff_t>(drop));
    }
    std::size_t size() const { return times_.size(); }

    VelocitySample sample(Vec2 x, double t) const override {
        if (times_.empty()) throw ConfigError("SnapshotSampler: no snapshots");
        const double tol = 1e-12 * std::max(1.0, std::abs(t));
        for (std::size_t i = 0; i < times_.size(); ++i)
            if (std::abs(times_[i] - t) <= tol) return at(i, x);
        if (t < times_.front() - tol || t > times_.back() + tol)
            throw ConfigError("SnapshotSampler: time outside the stored window");
        // Four nodes around t.
        std::size_t hi = 0;
        while (hi < times_.size() && times_[hi] < t) ++hi;
        const std::size_t count = std::min<std::size_t>(4, times_.size());
        std::size_t lo = hi >= 2 ? hi - 2 : 0;
        if (lo + count > times_.size()) lo = times_.size() - count;
        VelocitySample out{{0.0, 0.0}, Mat2{}};
        for (std::size_t i = lo; i < lo + count; ++i) {
            double w = 1.0;
            for (std::size_t j = lo; j < lo + count; ++j)
                if (j != i) w *= (t - times_[j]) / (times_[i] - times_[j]);
            const auto s = at(i, x);
            out.u = out.u + w * s.u;
            out.grad = out.grad + w * s.grad;
        }
        return out;
    }

private:
    VelocitySample at(std::size_t i, Vec2 x) const {
        const auto j = evals_[i]->jets(x);
        return {{j[0].f, j[1].f}, Mat2::of(j[0].fx, j[0].fy, j[1].fx, j[1].fy)};
    }

    double prune_;
    std::vector<double> times_;
    std::vector<std::shared_ptr<PointEvaluator>> evals_;
};

struct Particle {
    Vec2 label;
    Vec2 X;
    Mat2 F = Mat2::identity();
    Mat2 J{};
    bool degenerate = false;
};

struct ParticleSet {
    std::vector<Particle> particles;
    double time = 0.0;
    double kappa0 = 0.0;

    static ParticleSet at_labels(const std::vector<Vec2>& labels, double kappa0, double t0 = 0.0) {
        ParticleSet p;
        p.time = t0;
        p.kappa0 = kappa0;
        for (const auto& a : labels) p.particles.push_back({a, a, Mat2::identity(), Mat2{}, false});
        return p;
    }
    /// m x m uniform lattice of labels offset by half a cell.
    static ParticleSet lattice(int m, double kappa0) {
        std::vector<Vec2> labels;
        const double h = kTwoPi / m;
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) labels.push_back({(i + 0.5) * h, (j + 0.5) * h});
        return at_labels(labels, kappa0);
    }
    bool any_degenerate() const {
        for (const auto& p : particles)
            if (p.degenerate) return true;
        return false;
    }
};

/// One RK4 step of (X, F, J) under the sampler.
inline ParticleSet advance_particles(const ParticleSet& ps, const VelocitySampler& v, double dt) {
    ParticleSet out = ps;
    const double t = ps.time;
    const double k0 = ps.kappa0;
    struct D {
        Vec2 x;
        Mat2 f;
        Mat2 j;
    };
    auto deriv = [&](Vec2 X, const Mat2& F, double s) {
        const auto vs = v.sample(X, s);
        const Mat2 C = F.transpose() * F;
        return D{vs.u, vs.grad * F, std::exp(2.0 * k0 * s) * C.inverse()};
    };
    for (auto& p : out.particles) {
        const D k1 = deriv(p.X, p.F, t);
        const D k2 = deriv(p.X + 0.5 * dt * k1.x, p.F + 0.5 * dt * k1.f, t + 0.5 * dt);
        const D k3 = deriv(p.X + 0.5 * dt * k2.x, p.F + 0.5 * dt * k2.f, t + 0.5 * dt);
        const D k4 = deriv(p.X + dt * k3.x, p.F + dt * k3.f, t + dt);
        p.X = p.X + (dt / 6.0) * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        p.F = p.F + (dt / 6.0) * (k1.f + 2.0 * k2.f + 2.0 * k3.f + k4.f);
        p.J = p.J + (dt / 6.0) * (k1.j + 2.0 * k2.j + 2.0 * k3.j + k4.j);
        if (!(p.F.condition() <= 1e12)) p.degenerate = true;
    }
    out.time = t + dt;
    return out;
}

/// sigma at every particle from rho0 and sigma0 given per particle (label order).
inline std::vector<Mat2> stress_reconstruct(const ParticleSet& ps, const std::vector<double>& rho0,
                                            const std::vector<Mat2>& sigma0) {
    if (rho0.size() != ps.particles.size() || sigma0.size() != ps.particles.size())
        throw ConfigError("stress_reconstruct: per-particle data size mismatch");
    if (ps.any_degenerate()) throw Error("stress_reconstruct: degenerate deformation gradient");
    const double e = std::exp(-2.0 * ps.kappa0 * ps.time);
    std::vector<Mat2> out;
    out.reserve(ps.particles.size());
    for (std::size_t i = 0; i < ps.particles.size(); ++i) {
        const auto& p = ps.particles[i];
        const Mat2 M = (2.0 * ps.kappa0 * rho0[i] * e) * p.J + e * sigma0[i];
        Mat2 s = p.F * M * p.F.transpose();
        const double off = 0.5 * (s(0, 1) + s(1, 0));
        s(0, 1) = off;
        s(1, 0) = off;
        out.push_back(s);
    }
    return out;
}

/// rho0 evaluated at the labels (rho is constant along paths).
inline std::vector<double> density_at_particles(const ParticleSet& ps, const SpectralField& rho0) {
    PointEvaluator ev(rho0);
    std::vector<double> out;
    out.reserve(ps.particles.size());
    for (const auto& p : ps.particles) out.push_back(ev.value(p.label));
    return out;
}

/// Initial stress matrices at the labels from (a, b, c) fields.
inline std::vector<Mat2> stress_at_labels(const ParticleSet& ps, const SpectralField& a, const SpectralField& b,
                                          const SpectralField& c) {
    PointEvaluator ev(std::vector<SpectralField>{a, b, c});
    std::vector<Mat2> out;
    out.reserve(ps.particles.size());
    for (const auto& p : ps.particles) {
        const auto v = ev.values(p.label);
        out.push_back(Mat2::of(0.5 * v[2] + v[0], v[1], v[1], 0.5 * v[2] - v[0]));
    }
    return out;
}

/// max_p |F^T grad_x theta(X) - grad_a theta0(a)|.
inline double ertel_check(const ParticleSet& ps, const std::function<Vec2(Vec2)>& grad_theta_now,
                          const std::function<Vec2(Vec2)>& grad_theta0) {
    double worst = 0.0;
    for (const auto& p : ps.particles) {
        const Vec2 lhs = p.F.transpose() * grad_theta_now(p.X);
        worst = std::max(worst, (lhs - grad_theta0(p.label)).norm());
    }
    return worst;
}

namespace detail {

/// (e^{beta t} - 1) / beta, t at beta = 0.
inline double phi(double beta, double t) {
    if (beta == 0.0) return t;
    return std::expm1(beta * t) / beta;
}

/// (e^{(x + i y) t} - 1) / (x + i y) without cancellation.
inline Complex phi(Complex z, double t) {
    if (z == Complex{}) return t;
    const double x = z.real() * t;
    const double y = z.imag() * t;
    const double s = std::sin(0.5 * y);
    const Complex num(std::expm1(x) * std::cos(y) - 2.0 * s * s, std::exp(x) * std::sin(y));
    return num / z;
}

/// int_0^t r^p e^{-beta r} dr for p = 1, 2.
inline double moment(int p, double beta, double t) {
    const double bt = beta * t;
    if (std::abs(bt) < 0.5) {
        double sum = 0.0;
        double term = 1.0;  // (-beta)^m / m!
        for (int m = 0; m < 40; ++m) {
            sum += term * std::pow(t, m + p + 1) / (m + p + 1);
            term *= -beta / (m + 1);
        }
        return sum;
    }
    const double e = std::exp(-bt);
    if (p == 1) return (1.0 - e * (1.0 + bt)) / (beta * beta);
    return (2.0 - e * (2.0 + 2.0 * bt + bt * bt)) / (beta * beta * beta);
}

}  // namespace detail

/// Fundamental solution F(t) = e^{tG} of F' = G F for a constant traceless G
/// (G^2 = delta I, delta = -det G).
inline Mat2 constant_gradient_flow(const Mat2& G, double t) {
    const double delta = -G.det();
    double C = 1.0;
    double S = t;
    if (delta > 0.0) {
        const double s = std::sqrt(delta);
        C = std::cosh(t * s);
        S = std::sinh(t * s) / s;
    } else if (delta < 0.0) {
        const double s = std::sqrt(-delta);
        C = std::cos(t * s);
        S = std::sin(t * s) / s;
    }
    return C * Mat2::identity() + S * G;
}

/// Closed-form stress under a constant traceless velocity gradient:
///   sigma(t) = 2 kappa0 rho0 int_0^t e^{-2 kappa0 r} F(r) F(r)^T dr + e^{-2 kappa0 t} F(t) sigma0 F(t)^T.
inline Mat2 constant_gradient_reference(const Mat2& G, double t, double kappa0, const Mat2& sigma0, double rho0) {
    if (std::abs(G.trace()) > 1e-12 * std::max(1.0, G.max_abs()))
        throw ConfigError("constant_gradient_reference: gradient must be traceless");
    const double delta = -G.det();
    const double beta = 2.0 * kappa0;
    // int e^{-beta r} C^2, C S, S^2 dr with F = C I + S G.
    double iCC = 0.0;
    double iCS = 0.0;
    double iSS = 0.0;
    const double e0 = detail::phi(-beta, t);
    if (delta > 0.0) {
        const double s = std::sqrt(delta);
        const double up = detail::phi(2.0 * s - beta, t);
        const double dn = detail::phi(-2.0 * s - beta, t);
        const double ec = 0.5 * (up + dn);
        const double es = 0.5 * (up - dn);
        iCC = 0.5 * (e0 + ec);
        iCS = es / (2.0 * s);
        iSS = (ec - e0) / (2.0 * delta);
    } else if (delta < 0.0) {
        const double s = std::sqrt(-delta);
        const Complex z = detail::phi(Complex(-beta, 2.0 * s), t);
        const double ec = z.real();
        const double es = z.imag();
        iCC = 0.5 * (e0 + ec);
        iCS = es / (2.0 * s);
        iSS = (e0 - ec) / (-2.0 * delta);
    } else {
        iCC = e0;
        iCS = detail::moment(1, beta, t);
        iSS = detail::moment(2, beta, t);
    }
    const Mat2 sym = G + G.transpose();
    const Mat2 ggt = G * G.transpose();
    const Mat2 memory = iCC * Mat2::identity() + iCS * sym + iSS * ggt;
    const Mat2 F = constant_gradient_flow(G, t);
    return (2.0 * kappa0 * rho0) * memory + std::exp(-beta * t) * (F * sigma0 * F.transpose());
}

enum class GrowthClass { bounded, growing };

/// Exponential growth of the closed-form stress, measured between 20/kappa0 and
/// 40/kappa0 (or t = 20, 40 when kappa0 = 0): growing iff the log-rate exceeds
/// 0.1 kappa0 (0.01 when kappa0 = 0).
inline GrowthClass classify_constant_gradient(const Mat2& G, double kappa0, const Mat2& sigma0, double rho0,
                                              double* rate_out = nullptr) {
    const double scale = kappa0 > 0.0 ? kappa0 : 1.0;
    const double t1 = 20.0 / scale;
    const double t2 = 40.0 / scale;
    const double n1 = constant_gradient_reference(G, t1, kappa0, sigma0, rho0).max_abs();
    const double n2 = constant_gradient_reference(G, t2, kappa0, sigma0, rho0).max_abs();
    const double rate = std::log(n2 / n1) / (t2 - t1);
    if (rate_out) *rate_out = rate;
    return rate > 0.1 * (kappa0 > 0.0 ? kappa0 : 0.1) ? GrowthClass::growing : GrowthClass::bounded;
}

}  // namespace oldrlab
