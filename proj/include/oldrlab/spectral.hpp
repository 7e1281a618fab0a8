#pragma once

// Periodic grids, real fields carried together with their Fourier
// coefficients, and the Fourier-multiplier calculus built on them.
//
// Conventions
//  - Every axis has period 2*pi and n points, x_i = i * 2*pi / n.
//  - Coefficients are normalized so that coeffs()[0] is the spatial mean and
//    f(x) = sum_k c_k e^{i k.x}.
//  - Storage is the real-to-complex half spectrum: in 2D the last axis keeps
//    wavenumbers 0..n/2, the first axis all n wavenumbers in [-n/2, n/2).
//  - A symbol evaluated on a Nyquist index is averaged over the two aliases
//    +-n/2. This keeps real fields real for both even real symbols and odd
//    imaginary ones, and zeroes odd symbols (derivatives, B, Riesz, Hilbert)
//    on the Nyquist modes.

#include "fft.hpp"
#include "types.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace oldrlab {

class Grid {
public:
    Grid() = default;
    Grid(int dim, int n) : dim_(dim), n_(n) {
        if (dim != 1 && dim != 2) throw ConfigError("Grid: dim must be 1 or 2");
        if (n < 8 || (n & (n - 1)) != 0)
            throw ConfigError("Grid: n must be a power of two >= 8, got " + std::to_string(n));
    }

    int dim() const { return dim_; }
    int n() const { return n_; }
    bool valid() const { return dim_ != 0; }
    double spacing() const { return kTwoPi / n_; }
    double coord(int i) const { return i * spacing(); }
    double volume() const { return dim_ == 1 ? kTwoPi : kTwoPi * kTwoPi; }

    std::size_t size() const {
        return dim_ == 1 ? static_cast<std::size_t>(n_)
                         : static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_);
    }
    int spec_cols() const { return n_ / 2 + 1; }
    std::size_t spec_size() const {
        return dim_ == 1 ? static_cast<std::size_t>(spec_cols())
                         : static_cast<std::size_t>(n_) * static_cast<std::size_t>(spec_cols());
    }
    /// Signed wavenumber of a full-axis index, in [-n/2, n/2).
    int wavenumber(int index) const { return index < n_ / 2 ? index : index - n_; }

    bool operator==(const Grid&) const = default;

private:
    int dim_ = 0;
    int n_ = 0;
};

/// Calls fn(spectral_index, k1, k2) for every stored coefficient. In 1D k2 = 0.
template <class Fn>
void for_each_mode(const Grid& g, Fn&& fn) {
    const int n = g.n();
    const int cols = g.spec_cols();
    if (g.dim() == 1) {
        for (int j = 0; j < cols; ++j) fn(static_cast<std::size_t>(j), j, 0);
        return;
    }
    for (int i = 0; i < n; ++i) {
        const int k1 = g.wavenumber(i);
        for (int j = 0; j < cols; ++j)
            fn(static_cast<std::size_t>(i) * cols + j, k1, j);
    }
}

/// Weight of a stored coefficient in full-spectrum sums (2 when its
/// conjugate partner is not stored, 1 otherwise).
inline double mode_weight(const Grid& g, int k2_or_k) {
    const int last = g.dim() == 1 ? k2_or_k : k2_or_k;
    return (last == 0 || last == g.n() / 2) ? 1.0 : 2.0;
}

class SpectralField {
public:
    SpectralField() = default;

    static SpectralField from_values(const Grid& g, std::vector<double> values) {
        if (values.size() != g.size()) throw GridMismatch("from_values: size does not match grid");
        SpectralField f;
        f.grid_ = g;
        f.values_ = std::move(values);
        f.coeffs_ = fft::plan_for(g.dim(), g.n()).forward(f.values_);
        return f;
    }

    static SpectralField from_coeffs(const Grid& g, std::vector<Complex> coeffs) {
        if (coeffs.size() != g.spec_size())
            throw GridMismatch("from_coeffs: size does not match grid");
        SpectralField f;
        f.grid_ = g;
        f.coeffs_ = std::move(coeffs);
        make_hermitian(g, f.coeffs_);
        f.values_ = fft::plan_for(g.dim(), g.n()).backward(f.coeffs_);
        return f;
    }

    static SpectralField zeros(const Grid& g) {
        SpectralField f;
        f.grid_ = g;
        f.values_.assign(g.size(), 0.0);
        f.coeffs_.assign(g.spec_size(), Complex{});
        return f;
    }

    static SpectralField constant(const Grid& g, double v) {
        SpectralField f = zeros(g);
        std::fill(f.values_.begin(), f.values_.end(), v);
        f.coeffs_[0] = v;
        return f;
    }

    /// Samples fn(x) (1D) or fn(x1, x2) (2D) at the grid nodes.
    template <class Fn>
    static SpectralField sample(const Grid& g, Fn&& fn) {
        std::vector<double> v(g.size());
        const int n = g.n();
        if (g.dim() == 1) {
            if constexpr (std::is_invocable_v<Fn, double>) {
                for (int i = 0; i < n; ++i) v[i] = fn(g.coord(i));
            } else {
                throw GridMismatch("sample: 2D sampler given for a 1D grid");
            }
        } else {
            if constexpr (std::is_invocable_v<Fn, double, double>) {
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j)
                        v[static_cast<std::size_t>(i) * n + j] = fn(g.coord(i), g.coord(j));
            } else {
                throw GridMismatch("sample: 1D sampler given for a 2D grid");
            }
        }
        return from_values(g, std::move(v));
    }

    const Grid& grid() const { return grid_; }
    bool empty() const { return !grid_.valid(); }
    std::span<const double> values() const { return values_; }
    std::span<const Complex> coeffs() const { return coeffs_; }
    double operator[](std::size_t i) const { return values_[i]; }
    double at(int i, int j) const {
        return values_[static_cast<std::size_t>(i) * grid_.n() + j];
    }
    double mean() const { return coeffs_[0].real(); }

    /// Pointwise map of the grid values (aliasing is the caller's concern).
    template <class Fn>
    SpectralField map(Fn&& fn) const {
        std::vector<double> v(values_.size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = fn(values_[i]);
        return from_values(grid_, std::move(v));
    }

    SpectralField& operator+=(const SpectralField& o) { return axpy(1.0, o); }
    SpectralField& operator-=(const SpectralField& o) { return axpy(-1.0, o); }
    SpectralField& operator*=(double s) {
        for (auto& v : values_) v *= s;
        for (auto& c : coeffs_) c *= s;
        return *this;
    }
    /// this += s * o, applied to both representations.
    SpectralField& axpy(double s, const SpectralField& o) {
        check_same(o, "axpy");
        for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += s * o.values_[i];
        for (std::size_t i = 0; i < coeffs_.size(); ++i) coeffs_[i] += s * o.coeffs_[i];
        return *this;
    }

    friend SpectralField operator+(SpectralField a, const SpectralField& b) { return a += b; }
    friend SpectralField operator-(SpectralField a, const SpectralField& b) { return a -= b; }
    friend SpectralField operator*(double s, SpectralField a) { return a *= s; }
    friend SpectralField operator*(SpectralField a, double s) { return a *= s; }
    friend SpectralField operator-(SpectralField a) { return a *= -1.0; }

    void check_same(const SpectralField& o, const char* where) const {
        if (!(grid_ == o.grid_))
            throw GridMismatch(std::string(where) + ": fields live on different grids");
    }

    /// Projects the self-conjugate parts of a half spectrum onto Hermitian form.
    static void make_hermitian(const Grid& g, std::vector<Complex>& c) {
        const int n = g.n();
        if (g.dim() == 1) {
            c[0] = c[0].real();
            c[n / 2] = c[n / 2].real();
            return;
        }
        const int cols = g.spec_cols();
        for (int j : {0, n / 2}) {
            for (int i = 0; i <= n / 2; ++i) {
                const int ip = (n - i) % n;
                auto& a = c[static_cast<std::size_t>(i) * cols + j];
                auto& b = c[static_cast<std::size_t>(ip) * cols + j];
                if (ip == i) {
                    a = a.real();
                } else {
                    const Complex avg = 0.5 * (a + std::conj(b));
                    a = avg;
                    b = std::conj(avg);
                }
            }
        }
    }

    /// Largest violation of c(-k) = conj(c(k)) among stored self-conjugate pairs.
    static double hermitian_defect(const Grid& g, std::span<const Complex> c) {
        const int n = g.n();
        double worst = 0.0;
        if (g.dim() == 1) {
            worst = std::max(std::abs(c[0].imag()), std::abs(c[n / 2].imag()));
            return worst;
        }
        const int cols = g.spec_cols();
        for (int j : {0, n / 2}) {
            for (int i = 0; i < n; ++i) {
                const int ip = (n - i) % n;
                const Complex a = c[static_cast<std::size_t>(i) * cols + j];
                const Complex b = c[static_cast<std::size_t>(ip) * cols + j];
                worst = std::max(worst, std::abs(a - std::conj(b)));
            }
        }
        return worst;
    }

private:
    Grid grid_;
    std::vector<double> values_;
    std::vector<Complex> coeffs_;
};

/// Pointwise product on the grid; aliased unless followed by dealias().
inline SpectralField product(const SpectralField& a, const SpectralField& b) {
    a.check_same(b, "product");
    std::vector<double> v(a.values().size());
    const auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = av[i] * bv[i];
    return SpectralField::from_values(a.grid(), std::move(v));
}

// ---------------------------------------------------------------------------
// Multiplier symbols

class MultiplierSymbol {
public:
    using Rule = std::function<Complex(double xi1, double xi2)>;

    /// required_dim = 0 accepts any grid dimension.
    MultiplierSymbol(std::string name, Rule rule, Complex zero_value = 0.0, int required_dim = 0)
        : name_(std::move(name)),
          rule_(std::move(rule)),
          zero_(zero_value),
          required_dim_(required_dim),
          id_(next_id()) {}

    const std::string& name() const { return name_; }
    Complex zero_value() const { return zero_; }
    int required_dim() const { return required_dim_; }
    std::uint64_t id() const { return id_; }

    Complex operator()(double xi1, double xi2 = 0.0) const {
        if (xi1 == 0.0 && xi2 == 0.0) return zero_;
        return rule_(xi1, xi2);
    }

private:
    static std::uint64_t next_id() {
        static std::atomic<std::uint64_t> counter{1};
        return counter.fetch_add(1);
    }

    std::string name_;
    Rule rule_;
    Complex zero_;
    int required_dim_;
    std::uint64_t id_;
};

namespace symbols {

/// (xi2^2 - xi1^2) / (2 |xi|^2)
inline const MultiplierSymbol& A() {
    static const MultiplierSymbol s(
        "A", [](double a, double b) { return Complex((b * b - a * a) / (2.0 * (a * a + b * b))); },
        0.0, 2);
    return s;
}

/// -xi1 xi2 / |xi|^2
inline const MultiplierSymbol& B() {
    static const MultiplierSymbol s(
        "B", [](double a, double b) { return Complex(-a * b / (a * a + b * b)); }, 0.0, 2);
    return s;
}

/// R_j = Lambda^{-1} d_j, symbol i xi_j / |xi|. axis is 0 or 1.
inline const MultiplierSymbol& riesz(int axis) {
    static const MultiplierSymbol r0(
        "R1", [](double a, double b) { return Complex(0.0, a / std::hypot(a, b)); });
    static const MultiplierSymbol r1(
        "R2", [](double a, double b) { return Complex(0.0, b / std::hypot(a, b)); }, 0.0, 2);
    if (axis != 0 && axis != 1) throw ConfigError("riesz: axis must be 0 or 1");
    return axis == 0 ? r0 : r1;
}

/// -i sign(k), 1D only.
inline const MultiplierSymbol& hilbert() {
    static const MultiplierSymbol s(
        "H", [](double a, double) { return Complex(0.0, a > 0 ? -1.0 : (a < 0 ? 1.0 : 0.0)); },
        0.0, 1);
    return s;
}

inline const MultiplierSymbol& derivative(int axis) {
    static const MultiplierSymbol d0("d1", [](double a, double) { return Complex(0.0, a); });
    static const MultiplierSymbol d1(
        "d2", [](double, double b) { return Complex(0.0, b); }, 0.0, 2);
    if (axis != 0 && axis != 1) throw ConfigError("derivative: axis must be 0 or 1");
    return axis == 0 ? d0 : d1;
}

/// (-Delta)^{-1}: 1/|xi|^2 with the mean mode sent to zero.
inline const MultiplierSymbol& inverse_laplacian() {
    static const MultiplierSymbol s(
        "inv_lap", [](double a, double b) { return Complex(1.0 / (a * a + b * b)); });
    return s;
}

/// Lambda^{-1} = (-Delta)^{-1/2}.
inline const MultiplierSymbol& inverse_zygmund() {
    static const MultiplierSymbol s(
        "inv_zyg", [](double a, double b) { return Complex(1.0 / std::hypot(a, b)); });
    return s;
}

}  // namespace symbols

/// Symbol sampled on the stored half spectrum (with Nyquist averaging), plus
/// a mask of modes where m(-xi) != conj(m(xi)), i.e. where a real input would
/// produce a complex output.
struct SymbolTable {
    std::vector<Complex> values;
    std::vector<std::size_t> non_hermitian;

    Complex operator[](std::size_t i) const { return values[i]; }
};

/// Cached per thread for each (symbol, grid).
inline std::shared_ptr<const SymbolTable> symbol_table(const MultiplierSymbol& m, const Grid& g) {
    using Key = std::tuple<std::uint64_t, int, int>;
    thread_local std::map<Key, std::shared_ptr<const SymbolTable>> cache;
    auto& slot = cache[Key{m.id(), g.dim(), g.n()}];
    if (slot) return slot;

    const int half = g.n() / 2;
    auto table = std::make_shared<SymbolTable>();
    table->values.resize(g.spec_size());
    auto aliases = [half](int k) {
        return (k == half || k == -half) ? std::vector<int>{-half, half} : std::vector<int>{k};
    };
    for_each_mode(g, [&](std::size_t s, int k1, int k2) {
        const auto r1 = aliases(k1);
        const auto r2 = g.dim() == 1 ? std::vector<int>{0} : aliases(k2);
        Complex acc{};
        Complex mirror{};
        for (int a : r1)
            for (int b : r2) {
                acc += m(static_cast<double>(a), static_cast<double>(b));
                mirror += m(static_cast<double>(-a), static_cast<double>(-b));
            }
        const double cnt = static_cast<double>(r1.size() * r2.size());
        acc /= cnt;
        mirror /= cnt;
        table->values[s] = acc;
        if (std::abs(acc - std::conj(mirror)) > 1e-14 * std::max(1.0, std::abs(acc)))
            table->non_hermitian.push_back(s);
    });
    slot = std::move(table);
    return slot;
}

inline SpectralField apply_multiplier(const SpectralField& f, const MultiplierSymbol& m) {
    const Grid& g = f.grid();
    if (m.required_dim() != 0 && m.required_dim() != g.dim())
        throw GridMismatch("apply_multiplier: symbol '" + m.name() + "' requires a " +
                           std::to_string(m.required_dim()) + "D grid");
    const auto table = symbol_table(m, g);
    const auto c = f.coeffs();
    for (std::size_t s : table->non_hermitian)
        if (c[s] != Complex{})
            throw InternalError("apply_multiplier: symbol '" + m.name() +
                                "' produced a non-Hermitian spectrum");
    std::vector<Complex> out;
    out.reserve(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) out.push_back(table->values[i] * c[i]);
    return SpectralField::from_coeffs(g, std::move(out));
}

/// d f / d x_axis, axis 0 or 1.
inline SpectralField derivative(const SpectralField& f, int axis) {
    if (axis == 1 && f.grid().dim() != 2) throw GridMismatch("derivative: axis 1 needs a 2D grid");
    return apply_multiplier(f, symbols::derivative(axis));
}

inline SpectralField inverse_laplacian(const SpectralField& f) {
    return apply_multiplier(f, symbols::inverse_laplacian());
}

inline SpectralField hilbert(const SpectralField& f) {
    if (f.grid().dim() != 1) throw GridMismatch("hilbert: defined for 1D fields only");
    return apply_multiplier(f, symbols::hilbert());
}

inline SpectralField op_A(const SpectralField& f) { return apply_multiplier(f, symbols::A()); }
inline SpectralField op_B(const SpectralField& f) { return apply_multiplier(f, symbols::B()); }
inline SpectralField riesz(const SpectralField& f, int axis) {
    return apply_multiplier(f, symbols::riesz(axis));
}

/// Same trigonometric polynomial on an m-point grid. Upsampling splits the
/// source Nyquist content evenly between +-n/2; downsampling truncates to
/// |k| < m/2.
inline SpectralField resample(const SpectralField& f, int m) {
    const Grid& src = f.grid();
    const Grid dst(src.dim(), m);
    if (m == src.n()) return f;
    const int n = src.n();
    const auto c = f.coeffs();
    std::vector<Complex> out(dst.spec_size());
    auto row = [&](int k) { return static_cast<std::size_t>((k + n) % n); };
    for_each_mode(dst, [&](std::size_t s, int k1, int k2) {
        const int lim = std::min(n, m) / 2;
        if (std::abs(k1) > lim || std::abs(k2) > lim) return;
        if (m <= n && (std::abs(k1) == m / 2 || std::abs(k2) == m / 2)) return;
        double w = 1.0;
        if (std::abs(k1) == n / 2) w *= 0.5;
        if (src.dim() == 2 && k2 == n / 2) w *= 0.5;
        const std::size_t idx = src.dim() == 1 ? static_cast<std::size_t>(k1)
                                               : row(k1) * src.spec_cols() + static_cast<std::size_t>(k2);
        out[s] = w * c[idx];
    });
    return SpectralField::from_coeffs(dst, std::move(out));
}

/// Largest wavenumber kept by the 2/3 rule.
inline int dealias_cutoff(const Grid& g) { return g.n() / 3; }

/// Zeroes every coefficient with |k_axis| > n/3 on some axis.
inline std::vector<Complex> dealiased_coeffs(const Grid& g, std::span<const Complex> c) {
    const int cut = dealias_cutoff(g);
    std::vector<Complex> out(c.begin(), c.end());
    for_each_mode(g, [&](std::size_t s, int k1, int k2) {
        if (std::abs(k1) > cut || std::abs(k2) > cut) out[s] = 0.0;
    });
    return out;
}

inline SpectralField dealias(const SpectralField& f) {
    return SpectralField::from_coeffs(f.grid(), dealiased_coeffs(f.grid(), f.coeffs()));
}

/// Removes the mean mode.
inline SpectralField remove_mean(const SpectralField& f) {
    std::vector<Complex> c(f.coeffs().begin(), f.coeffs().end());
    c[0] = 0.0;
    return SpectralField::from_coeffs(f.grid(), std::move(c));
}

// ---------------------------------------------------------------------------
// Grid norms

inline double norm_l1(const SpectralField& f) {
    double s = 0.0;
    for (double v : f.values()) s += std::abs(v);
    return s * f.grid().volume() / static_cast<double>(f.grid().size());
}

inline double norm_l2(const SpectralField& f) {
    double s = 0.0;
    for (double v : f.values()) s += v * v;
    return std::sqrt(s * f.grid().volume() / static_cast<double>(f.grid().size()));
}

inline double norm_linf(const SpectralField& f) {
    double s = 0.0;
    for (double v : f.values()) s = std::max(s, std::abs(v));
    return s;
}

inline double integral(const SpectralField& f) { return f.mean() * f.grid().volume(); }

/// Grid quadrature of f*g over the torus.
inline double inner(const SpectralField& f, const SpectralField& g) {
    f.check_same(g, "inner");
    double s = 0.0;
    const auto a = f.values();
    const auto b = g.values();
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * f.grid().volume() / static_cast<double>(f.grid().size());
}

/// L2 norm from the coefficients (Parseval).
inline double norm_l2_spectral(const SpectralField& f) {
    const Grid& g = f.grid();
    double s = 0.0;
    const auto c = f.coeffs();
    for_each_mode(g, [&](std::size_t i, int k1, int k2) {
        const double w = mode_weight(g, g.dim() == 1 ? k1 : k2);
        s += w * std::norm(c[i]);
    });
    return std::sqrt(s * g.volume());
}

}  // namespace oldrlab
