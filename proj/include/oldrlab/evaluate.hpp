#pragma once

// Off-grid evaluation of band-limited fields by direct Fourier summation, and
// continuum extrema located by local refinement around the grid extremum.

#include "spectral.hpp"

#include <functional>
#include <span>
#include <vector>

namespace oldrlab {

/// Value and derivatives up to second order at a point.
struct Jet {
    double f = 0.0;
    double fx = 0.0;
    double fy = 0.0;
    double fxx = 0.0;
    double fxy = 0.0;
    double fyy = 0.0;
};

/// Evaluates several fields sharing one grid at arbitrary points. Modes whose
/// coefficient is below prune_rel times the largest coefficient (over all
/// fields) are skipped.
class PointEvaluator {
public:
    explicit PointEvaluator(std::vector<SpectralField> fields, double prune_rel = 0.0)
        : fields_(std::move(fields)) {
        if (fields_.empty()) throw ConfigError("PointEvaluator: no fields");
        grid_ = fields_.front().grid();
        for (const auto& f : fields_) fields_.front().check_same(f, "PointEvaluator");
        double cmax = 0.0;
        for (const auto& f : fields_)
            for (const auto& c : f.coeffs()) cmax = std::max(cmax, std::abs(c));
        const double cut = prune_rel * cmax;
        const std::size_t nf = fields_.size();
        re_.resize(nf);
        im_.resize(nf);
        for_each_mode(grid_, [&](std::size_t s, int k1, int k2) {
            double mag = 0.0;
            for (const auto& f : fields_) mag = std::max(mag, std::abs(f.coeffs()[s]));
            if (mag == 0.0 || mag <= cut) return;
            const int last = grid_.dim() == 1 ? k1 : k2;
            const double w = (last == 0 || last == grid_.n() / 2) ? 1.0 : 2.0;
            k1_.push_back(k1);
            k2_.push_back(k2);
            for (std::size_t i = 0; i < nf; ++i) {
                re_[i].push_back(w * fields_[i].coeffs()[s].real());
                im_[i].push_back(w * fields_[i].coeffs()[s].imag());
            }
        });
    }

    explicit PointEvaluator(const SpectralField& f, double prune_rel = 0.0)
        : PointEvaluator(std::vector<SpectralField>{f}, prune_rel) {}

    std::size_t field_count() const { return fields_.size(); }
    std::size_t mode_count() const { return k1_.size(); }
    const Grid& grid() const { return grid_; }

    /// Values of every field at p (p.y ignored in 1D).
    std::vector<double> values(Vec2 p) const {
        std::vector<Jet> j = jets(p, false);
        std::vector<double> out(j.size());
        for (std::size_t i = 0; i < j.size(); ++i) out[i] = j[i].f;
        return out;
    }

    double value(Vec2 p, std::size_t field = 0) const { return values(p)[field]; }

    std::vector<Jet> jets(Vec2 p, bool derivatives = true) const {
        const int n = grid_.n();
        const int half = n / 2;
        const bool two_d = grid_.dim() == 2;
        // cos/sin of k x for k in [-n/2, n/2] and of k y for k in [0, n/2].
        std::vector<double> cx(static_cast<std::size_t>(n + 1)), sx(cx.size());
        for (int k = -half; k <= half; ++k) {
            cx[k + half] = std::cos(k * p.x);
            sx[k + half] = std::sin(k * p.x);
        }
        std::vector<double> cy(static_cast<std::size_t>(half + 1), 1.0), sy(cy.size(), 0.0);
        if (two_d)
            for (int k = 0; k <= half; ++k) {
                cy[k] = std::cos(k * p.y);
                sy[k] = std::sin(k * p.y);
            }
        // Per-mode phase, shared by all fields.
        const std::size_t nm = k1_.size();
        std::vector<double> er(nm), ei(nm);
        for (std::size_t m = 0; m < nm; ++m) {
            const double ar = cx[k1_[m] + half];
            const double ai = sx[k1_[m] + half];
            const double br = cy[k2_[m]];
            const double bi = sy[k2_[m]];
            er[m] = ar * br - ai * bi;
            ei[m] = ar * bi + ai * br;
        }
        std::vector<Jet> out(fields_.size());
        for (std::size_t i = 0; i < fields_.size(); ++i) {
            const double* cr = re_[i].data();
            const double* ci = im_[i].data();
            double f = 0.0, fx = 0.0, fy = 0.0, fxx = 0.0, fxy = 0.0, fyy = 0.0;
            if (!derivatives) {
                for (std::size_t m = 0; m < nm; ++m) f += cr[m] * er[m] - ci[m] * ei[m];
            } else {
                for (std::size_t m = 0; m < nm; ++m) {
                    const double tr = cr[m] * er[m] - ci[m] * ei[m];
                    const double ti = cr[m] * ei[m] + ci[m] * er[m];
                    const double da = k1_[m];
                    const double db = k2_[m];
                    // d/dx -> i k: real part of (i k t) = -k Im t
                    f += tr;
                    fx -= da * ti;
                    fy -= db * ti;
                    fxx -= da * da * tr;
                    fxy -= da * db * tr;
                    fyy -= db * db * tr;
                }
            }
            out[i] = {f, fx, fy, fxx, fxy, fyy};
        }
        return out;
    }

private:
    std::vector<SpectralField> fields_;
    Grid grid_;
    std::vector<int> k1_;
    std::vector<int> k2_;
    std::vector<std::vector<double>> re_;
    std::vector<std::vector<double>> im_;
};

struct Extremum {
    double value = 0.0;
    Vec2 at{};
};

/// Locates the continuum maximum of fn near the best of the candidate grid
/// nodes by a shrinking pattern search. fn must be smooth and 2*pi periodic.
/// candidates are flat grid indices to start from.
inline Extremum refine_maximum(const std::function<double(Vec2)>& fn, const Grid& g,
                               std::span<const std::size_t> candidates) {
    const int n = g.n();
    const double h = g.spacing();
    Extremum best{-INFINITY, {}};
    for (std::size_t idx : candidates) {
        Vec2 p = g.dim() == 1 ? Vec2{g.coord(static_cast<int>(idx)), 0.0}
                              : Vec2{g.coord(static_cast<int>(idx / n)),
                                     g.coord(static_cast<int>(idx % n))};
        double fp = fn(p);
        double step = h;
        while (step > 1e-9 * h) {
            bool moved = false;
            for (int dx = -1; dx <= 1; ++dx) {
                for (int dy = (g.dim() == 2 ? -1 : 0); dy <= (g.dim() == 2 ? 1 : 0); ++dy) {
                    if (dx == 0 && dy == 0) continue;
                    const Vec2 q{p.x + dx * step, p.y + dy * step};
                    const double fq = fn(q);
                    if (fq > fp) {
                        fp = fq;
                        p = q;
                        moved = true;
                    }
                }
            }
            if (!moved) step *= 0.5;
        }
        if (fp > best.value) best = {fp, p};
    }
    return best;
}

namespace detail {

/// Flat indices of the `count` largest values of v.
inline std::vector<std::size_t> top_indices(std::span<const double> v, std::size_t count) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    count = std::min(count, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count), idx.end(),
                      [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
    idx.resize(count);
    return idx;
}

}  // namespace detail

/// Continuum maximum of a band-limited field (refined from the 4 best nodes).
inline Extremum refined_max(const SpectralField& f) {
    PointEvaluator ev(f);
    const auto start = detail::top_indices(f.values(), 4);
    return refine_maximum([&](Vec2 p) { return ev.value(p); }, f.grid(), start);
}

inline Extremum refined_min(const SpectralField& f) {
    PointEvaluator ev(f);
    std::vector<double> neg(f.values().begin(), f.values().end());
    for (auto& v : neg) v = -v;
    const auto start = detail::top_indices(neg, 4);
    Extremum e = refine_maximum([&](Vec2 p) { return -ev.value(p); }, f.grid(), start);
    e.value = -e.value;
    return e;
}

/// Continuum sup norm of a band-limited field.
inline double refined_sup_abs(const SpectralField& f) {
    return std::max(refined_max(f).value, -refined_min(f).value);
}

}  // namespace oldrlab
