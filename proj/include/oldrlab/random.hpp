#pragma once

// Counter-based random numbers: value(i) = splitmix64(seed, stream, i). Any
// implementation of SplitMix64 reproduces the same streams.

#include "spectral.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

namespace oldrlab {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(splitmix64(seed ^ splitmix64(stream + 0x632BE59BD9B4E019ULL))) {}

    std::uint64_t bits(std::uint64_t counter) const { return splitmix64(key_ + counter * 0x9E3779B97F4A7C15ULL); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter) const {
        return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
    }

    /// Sequential interface on top of the counter.
    std::uint64_t next_bits() { return bits(counter_++); }
    double next_uniform() { return uniform(counter_++); }
    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }
    /// Standard normal by Box-Muller (consumes two counters).
    double next_normal() {
        const double u1 = 1.0 - next_uniform();
        const double u2 = next_uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }
    int next_int(int lo, int hi) {
        return lo + static_cast<int>(next_bits() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Random real field with independent normal coefficients on |k_axis| <= kmax,
/// amplitude decaying like (1+|k|)^-decay. Coefficients are drawn in a fixed
/// wavevector order, so the same seed gives the same continuum field on every
/// grid that resolves it. Nyquist-free. When amplitude > 0 the field is scaled
/// to that grid sup norm; amplitude <= 0 keeps the raw coefficients.
inline SpectralField random_field(const Grid& g, CounterRng& rng, int kmax, double amplitude = 1.0,
                                  double decay = 1.0, bool zero_mean = true) {
    std::vector<Complex> c(g.spec_size());
    const int n = g.n();
    const int limit = std::min(kmax, n / 2 - 1);
    const int cols = g.spec_cols();
    auto draw = [&](int k1, int k2) {
        const double w = std::pow(1.0 + std::hypot(k1, k2), -decay);
        const double re = rng.next_normal();
        const double im = rng.next_normal();
        return w * Complex(re, im);
    };
    if (g.dim() == 1) {
        for (int k = zero_mean ? 1 : 0; k <= limit; ++k) c[k] = draw(k, 0);
    } else {
        for (int k1 = -limit; k1 <= limit; ++k1)
            for (int k2 = 0; k2 <= limit; ++k2) {
                if (zero_mean && k1 == 0 && k2 == 0) continue;
                const int row = (k1 + n) % n;
                c[static_cast<std::size_t>(row) * cols + k2] = draw(k1, k2);
            }
    }
    SpectralField f = SpectralField::from_coeffs(g, std::move(c));
    const double sup = norm_linf(f);
    if (amplitude > 0.0 && sup > 0.0) f *= amplitude / sup;
    return f;
}

}  // namespace oldrlab
