#pragma once

// Galerkin-truncated coefficient system of the scalar model d_t tau = -tau A^2 tau:
//   d tau_l / dt = - sum_{k + j = l} tau_k alpha(j)^2 tau_j,   |l|, |k|, |j| <= K (max norm).
// Data in the cone tau_0 >= sum_{k != 0} |tau_k| stay there, tau_0 decays by
//   d tau_0 / dt = - sum_{k != 0} alpha(k)^2 |tau_k|^2,
// and weighted norms grow at most like e^{2^{s+1} tau_0(0) Gamma^2 t}.

#include "random.hpp"
#include "types.hpp"

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace oldrlab {

/// Input breaks tau_{-l} = conj(tau_l) or alpha(-l) = alpha(l).
class SymmetryViolation : public Error {
public:
    using Error::Error;
};

/// Integer wavevectors with max norm <= K, in 1D or 2D. Index order: l1 major.
class ConeLattice {
public:
    ConeLattice() = default;
    ConeLattice(int dim, int K) : dim_(dim), K_(K) {
        if (dim != 1 && dim != 2) throw ConfigError("cone lattice: dim must be 1 or 2");
        if (K < 0) throw ConfigError("cone lattice: K must be >= 0");
    }

    int dim() const { return dim_; }
    int cutoff() const { return K_; }
    int side() const { return 2 * K_ + 1; }
    std::size_t size() const {
        return dim_ == 1 ? static_cast<std::size_t>(side()) : static_cast<std::size_t>(side()) * side();
    }
    bool contains(int l1, int l2) const {
        return std::abs(l1) <= K_ && std::abs(l2) <= K_ && (dim_ == 2 || l2 == 0);
    }
    std::size_t index(int l1, int l2 = 0) const {
        return dim_ == 1 ? static_cast<std::size_t>(l1 + K_)
                         : static_cast<std::size_t>(l1 + K_) * side() + static_cast<std::size_t>(l2 + K_);
    }
    int l1(std::size_t i) const { return dim_ == 1 ? static_cast<int>(i) - K_ : static_cast<int>(i) / side() - K_; }
    int l2(std::size_t i) const { return dim_ == 1 ? 0 : static_cast<int>(i) % side() - K_; }
    std::size_t zero() const { return index(0, 0); }
    /// Index of -l.
    std::size_t mirror(std::size_t i) const { return size() - 1 - i; }
    double length(std::size_t i) const { return std::hypot(l1(i), l2(i)); }

    bool operator==(const ConeLattice&) const = default;

private:
    int dim_ = 1;
    int K_ = 0;
};

struct AlphaSymbol {
    ConeLattice lattice;
    std::vector<double> values;
    double gamma = 0.0;

    /// Even, zero at the origin, bounded by gamma.
    void validate() const {
        if (values.size() != lattice.size()) throw ConfigError("alpha: table size does not match lattice");
        if (!(gamma >= 0.0)) throw ConfigError("alpha: bound gamma must be >= 0");
        if (values[lattice.zero()] != 0.0) throw ConfigError("alpha: alpha(0) must be 0");
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i] != values[lattice.mirror(i)]) throw SymmetryViolation("alpha: symbol must be even");
            if (std::abs(values[i]) > gamma) throw ConfigError("alpha: |alpha| exceeds gamma");
        }
    }

    /// Sign-patterned default: 1D gamma (-1)^{|k|+1}; 2D gamma (k1^2 - k2^2)/|k|^2.
    static AlphaSymbol standard(const ConeLattice& lat, double gamma = 1.0) {
        AlphaSymbol a{lat, std::vector<double>(lat.size(), 0.0), gamma};
        for (std::size_t i = 0; i < lat.size(); ++i) {
            const int k1 = lat.l1(i);
            const int k2 = lat.l2(i);
            if (k1 == 0 && k2 == 0) continue;
            a.values[i] = lat.dim() == 1 ? gamma * (std::abs(k1) % 2 == 1 ? 1.0 : -1.0)
                                         : gamma * (k1 * k1 - k2 * k2) / static_cast<double>(k1 * k1 + k2 * k2);
        }
        return a;
    }

    /// Independent uniform values in [-gamma, gamma] on one half of the lattice, mirrored.
    static AlphaSymbol random(const ConeLattice& lat, double gamma, CounterRng& rng) {
        AlphaSymbol a{lat, std::vector<double>(lat.size(), 0.0), gamma};
        for (std::size_t i = lat.zero() + 1; i < lat.size(); ++i) {
            a.values[i] = rng.next_uniform(-gamma, gamma);
            a.values[lat.mirror(i)] = a.values[i];
        }
        return a;
    }
};

struct ConeState {
    ConeLattice lattice;
    std::vector<Complex> tau;
    double time = 0.0;

    static ConeState zeros(const ConeLattice& lat) { return {lat, std::vector<Complex>(lat.size()), 0.0}; }

    Complex& at(int l1, int l2 = 0) { return tau[lattice.index(l1, l2)]; }
    Complex at(int l1, int l2 = 0) const { return tau[lattice.index(l1, l2)]; }
    double mean() const { return tau[lattice.zero()].real(); }

    /// Sets tau_l and tau_{-l} = conj(tau_l).
    void set_pair(int l1, int l2, Complex v) {
        const std::size_t i = lattice.index(l1, l2);
        tau[i] = v;
        tau[lattice.mirror(i)] = std::conj(v);
        if (i == lattice.zero()) tau[i] = v.real();
    }

    /// Largest |tau_{-l} - conj(tau_l)| and |Im tau_0|.
    double symmetry_defect() const {
        double worst = std::abs(tau[lattice.zero()].imag());
        for (std::size_t i = 0; i < tau.size(); ++i)
            worst = std::max(worst, std::abs(tau[lattice.mirror(i)] - std::conj(tau[i])));
        return worst;
    }

    void check() const {
        if (tau.size() != lattice.size()) throw ConfigError("cone state: coefficient count does not match lattice");
        double scale = 0.0;
        for (const auto& v : tau) scale = std::max(scale, std::abs(v));
        if (symmetry_defect() > 1e-12 * std::max(scale, 1.0))
            throw SymmetryViolation("cone state: coefficients are not Hermitian");
    }
};

/// tau_0 - sum_{k != 0} |tau_k|; positive inside the cone.
inline double cone_margin(const ConeState& s) {
    double side = 0.0;
    for (std::size_t i = 0; i < s.tau.size(); ++i)
        if (i != s.lattice.zero()) side += std::abs(s.tau[i]);
    return s.mean() - side;
}

/// sum_k (1 + |k|)^s |tau_k| with Euclidean |k|.
inline double weighted_norm(const ConeState& s, double sexp) {
    if (!(sexp > 0.0)) throw ConfigError("weighted_norm: exponent must be positive");
    double sum = 0.0;
    for (std::size_t i = 0; i < s.tau.size(); ++i)
        sum += std::pow(1.0 + s.lattice.length(i), sexp) * std::abs(s.tau[i]);
    return sum;
}

/// C_s(0) e^{2^{s+1} tau_0(0) Gamma^2 t}.
inline double weighted_envelope(double c_s0, double sexp, double tau0_initial, double gamma, double t) {
    return c_s0 * std::exp(std::pow(2.0, sexp + 1.0) * tau0_initial * gamma * gamma * t);
}

/// weighted_norm(s) <= envelope * (1 + rel_tol).
inline bool bound_check(const ConeState& s, double sexp, double c_s0, double t, double gamma,
                        double tau0_initial, double rel_tol = 1e-6) {
    return weighted_norm(s, sexp) <= weighted_envelope(c_s0, sexp, tau0_initial, gamma, t) * (1.0 + rel_tol);
}

/// Tendencies of every coefficient; Hermitian symmetry of the output is exact.
inline std::vector<Complex> rhs_cone(const ConeState& s, const AlphaSymbol& alpha) {
    s.check();
    if (!(alpha.lattice == s.lattice)) throw ConfigError("rhs_cone: alpha lattice differs from state lattice");
    const auto& lat = s.lattice;
    const std::size_t N = lat.size();
    std::vector<double> a2(N);
    for (std::size_t j = 0; j < N; ++j) a2[j] = alpha.values[j] * alpha.values[j];
    std::vector<Complex> out(N);
    // Upper half including the origin; the lower half mirrors it.
    for (std::size_t l = lat.zero(); l < N; ++l) {
        const int l1 = lat.l1(l);
        const int l2 = lat.l2(l);
        Complex acc{};
        for (std::size_t k = 0; k < N; ++k) {
            const int j1 = l1 - lat.l1(k);
            const int j2 = l2 - lat.l2(k);
            if (!lat.contains(j1, j2)) continue;
            const std::size_t j = lat.index(j1, j2);
            if (a2[j] == 0.0) continue;
            acc += s.tau[k] * a2[j] * s.tau[j];
        }
        out[l] = -acc;
    }
    out[lat.zero()] = out[lat.zero()].real();
    for (std::size_t l = lat.zero() + 1; l < N; ++l) out[lat.mirror(l)] = std::conj(out[l]);
    return out;
}

/// - sum_{k != 0} alpha(k)^2 |tau_k|^2.
inline double mean_dissipation(const ConeState& s, const AlphaSymbol& alpha) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.tau.size(); ++i)
        if (i != s.lattice.zero()) sum += alpha.values[i] * alpha.values[i] * std::norm(s.tau[i]);
    return -sum;
}

/// min over an m-point grid per axis of the field sum_k tau_k e^{i k.x}.
inline double field_minimum(const ConeState& s, int m = 0) {
    const auto& lat = s.lattice;
    if (m <= 0) m = 4 * lat.cutoff() + 8;
    double best = std::numeric_limits<double>::infinity();
    const int m2 = lat.dim() == 2 ? m : 1;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m2; ++b) {
            const double x = kTwoPi * a / m;
            const double y = kTwoPi * b / m;
            double v = 0.0;
            for (std::size_t i = 0; i < s.tau.size(); ++i)
                v += (s.tau[i] * std::polar(1.0, lat.l1(i) * x + lat.l2(i) * y)).real();
            best = std::min(best, v);
        }
    return best;
}

struct ConeConfig {
    double dt = 1e-2;
    double t_end = 10.0;
    double sexp = 1.0;
    int record_every = 1;
    /// Grid points per axis for the positivity check; 0 picks 4K + 8; < 0 skips it.
    int positivity_points = 0;
    /// Coefficient magnitude treated as blow-up in exploratory runs.
    double blowup_cap = 1e12;

    void validate() const {
        if (!(dt > 0.0)) throw ConfigError("cone config: dt must be positive");
        if (!(t_end >= 0.0)) throw ConfigError("cone config: t_end must be >= 0");
        if (!(sexp > 0.0)) throw ConfigError("cone config: sexp must be positive");
        if (record_every < 1) throw ConfigError("cone config: record_every must be >= 1");
        if (!(blowup_cap > 0.0)) throw ConfigError("cone config: blowup_cap must be positive");
    }
};

struct ConeRecord {
    double t = 0.0;
    double tau0 = 0.0;
    double margin = 0.0;
    double weighted = 0.0;
    double envelope = 0.0;
    double field_min = 0.0;
    double dissipation = 0.0;
    double symmetry_defect = 0.0;
};

struct ConeTrajectory {
    std::vector<ConeRecord> records;
    ConeState final_state;
    double dt_used = 0.0;
    bool in_cone_initially = false;
    bool blowup = false;
    std::string reason;
};

/// Largest step allowed by the Lipschitz scale of the system: 0.1 / (Gamma^2 scale).
inline double cone_step_limit(const ConeState& s0, const AlphaSymbol& alpha) {
    double scale = std::abs(s0.mean());
    double side = 0.0;
    for (std::size_t i = 0; i < s0.tau.size(); ++i)
        if (i != s0.lattice.zero()) side += std::abs(s0.tau[i]);
    scale = std::max(scale, side);
    const double g2 = alpha.gamma * alpha.gamma;
    if (scale == 0.0 || g2 == 0.0) return std::numeric_limits<double>::infinity();
    return 0.1 / (g2 * scale);
}

/// Fixed-step RK4. The step is the largest h <= min(dt, step limit) dividing t_end.
inline ConeTrajectory simulate_cone(const ConeState& s0, const AlphaSymbol& alpha, const ConeConfig& cfg) {
    cfg.validate();
    alpha.validate();
    s0.check();
    ConeTrajectory out;
    out.in_cone_initially = cone_margin(s0) >= 0.0;
    const double hmax = std::min(cfg.dt, cone_step_limit(s0, alpha));
    const long steps = cfg.t_end == 0.0 ? 0 : static_cast<long>(std::ceil(cfg.t_end / hmax - 1e-12));
    const double h = steps > 0 ? cfg.t_end / steps : 0.0;
    out.dt_used = h;
    const double c0 = weighted_norm(s0, cfg.sexp);
    const double tau0_initial = s0.mean();

    auto record = [&](const ConeState& s) {
        ConeRecord r;
        r.t = s.time;
        r.tau0 = s.mean();
        r.margin = cone_margin(s);
        r.weighted = weighted_norm(s, cfg.sexp);
        r.envelope = weighted_envelope(c0, cfg.sexp, tau0_initial, alpha.gamma, s.time - s0.time);
        r.field_min = cfg.positivity_points < 0 ? std::numeric_limits<double>::quiet_NaN()
                                                : field_minimum(s, cfg.positivity_points);
        r.dissipation = mean_dissipation(s, alpha);
        r.symmetry_defect = s.symmetry_defect();
        out.records.push_back(r);
    };

    ConeState s = s0;
    record(s);
    auto combine = [&](const ConeState& base, const std::vector<Complex>& d, double a) {
        ConeState r = base;
        for (std::size_t i = 0; i < r.tau.size(); ++i) r.tau[i] += a * d[i];
        return r;
    };
    for (long n = 0; n < steps; ++n) {
        const auto k1 = rhs_cone(s, alpha);
        const auto k2 = rhs_cone(combine(s, k1, 0.5 * h), alpha);
        const auto k3 = rhs_cone(combine(s, k2, 0.5 * h), alpha);
        const auto k4 = rhs_cone(combine(s, k3, h), alpha);
        double big = 0.0;
        for (std::size_t i = 0; i < s.tau.size(); ++i) {
            s.tau[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            big = std::max(big, std::abs(s.tau[i]));
        }
        s.time = s0.time + (n + 1) * h;
        if (!std::isfinite(big) || big > cfg.blowup_cap) {
            out.blowup = true;
            out.reason = std::isfinite(big) ? "coefficient exceeded cap" : "non-finite coefficient";
            record(s);
            break;
        }
        if ((n + 1) % cfg.record_every == 0 || n + 1 == steps) record(s);
    }
    out.final_state = std::move(s);
    return out;
}

/// Random Hermitian data with |tau_k| ~ (1 + |k|)^-decay on the side modes and
/// tau_0 = (1 + slack) sum_{k != 0} |tau_k| (slack = 0 puts the data on the boundary).
inline ConeState random_cone_state(const ConeLattice& lat, CounterRng& rng, double slack, double decay = 1.0,
                                   double scale = 1.0) {
    ConeState s = ConeState::zeros(lat);
    double side = 0.0;
    for (std::size_t i = lat.zero() + 1; i < lat.size(); ++i) {
        const double w = scale * std::pow(1.0 + lat.length(i), -decay);
        const Complex v(w * rng.next_normal(), w * rng.next_normal());
        s.tau[i] = v;
        s.tau[lat.mirror(i)] = std::conj(v);
        side += 2.0 * std::abs(v);
    }
    s.tau[lat.zero()] = (1.0 + slack) * side;
    return s;
}

/// Plain text, one line per wavevector: "l1 [l2] re im". '#' lines are comments.
inline void write_cone_coefficients(std::ostream& os, const ConeState& s) {
    os << "# cone coefficients dim " << s.lattice.dim() << " K " << s.lattice.cutoff() << " t " << s.time << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < s.tau.size(); ++i) {
        os << s.lattice.l1(i);
        if (s.lattice.dim() == 2) os << ' ' << s.lattice.l2(i);
        os << ' ' << s.tau[i].real() << ' ' << s.tau[i].imag() << '\n';
    }
}

namespace detail {

struct CoefficientLine {
    int l1 = 0;
    int l2 = 0;
    std::vector<double> v;
};

/// Parses "l1 [l2] v..." lines with `values` trailing numbers; infers the dimension.
inline std::vector<CoefficientLine> read_coefficient_lines(std::istream& is, int values, int& dim) {
    std::vector<CoefficientLine> out;
    dim = 0;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto start = line.find_first_not_of(" \t\r");
        if (start == std::string::npos || line[start] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> tok;
        double x = 0.0;
        while (ls >> x) tok.push_back(x);
        if (!ls.eof()) throw ConfigError("coefficient table line " + std::to_string(lineno) + ": not numeric");
        const int d = static_cast<int>(tok.size()) - values;
        if (d != 1 && d != 2) throw ConfigError("coefficient table line " + std::to_string(lineno) + ": wrong field count");
        if (dim == 0) dim = d;
        if (d != dim) throw ConfigError("coefficient table line " + std::to_string(lineno) + ": mixed dimensions");
        CoefficientLine c;
        c.l1 = static_cast<int>(tok[0]);
        c.l2 = d == 2 ? static_cast<int>(tok[1]) : 0;
        if (c.l1 != tok[0] || (d == 2 && c.l2 != tok[1]))
            throw ConfigError("coefficient table line " + std::to_string(lineno) + ": wavevector must be integer");
        c.v.assign(tok.begin() + d, tok.end());
        out.push_back(std::move(c));
    }
    if (dim == 0) throw ConfigError("coefficient table: no entries");
    return out;
}

}  // namespace detail

/// Reads a table written by write_cone_coefficients; K is the largest |l|,
/// missing wavevectors are zero. Throws SymmetryViolation for non-Hermitian data.
inline ConeState read_cone_coefficients(std::istream& is) {
    int dim = 0;
    const auto lines = detail::read_coefficient_lines(is, 2, dim);
    int K = 0;
    for (const auto& c : lines) K = std::max({K, std::abs(c.l1), std::abs(c.l2)});
    ConeState s = ConeState::zeros(ConeLattice(dim, K));
    for (const auto& c : lines) s.at(c.l1, c.l2) = Complex(c.v[0], c.v[1]);
    s.check();
    return s;
}

/// Reads "l1 [l2] alpha" lines on the given lattice; missing entries are zero.
inline AlphaSymbol read_alpha_table(std::istream& is, const ConeLattice& lat, double gamma) {
    int dim = 0;
    const auto lines = detail::read_coefficient_lines(is, 1, dim);
    if (dim != lat.dim()) throw ConfigError("alpha table: dimension differs from lattice");
    AlphaSymbol a{lat, std::vector<double>(lat.size(), 0.0), gamma};
    for (const auto& c : lines) {
        if (!lat.contains(c.l1, c.l2)) continue;
        a.values[lat.index(c.l1, c.l2)] = c.v[0];
    }
    a.validate();
    return a;
}

}  // namespace oldrlab
