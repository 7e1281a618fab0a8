#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace oldrlab {

using Complex = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operands live on different grids (dimension or resolution).
class GridMismatch : public Error {
public:
    using Error::Error;
};

/// A consistency check on an internal result failed (a bug, not bad input).
class InternalError : public Error {
public:
    using Error::Error;
};

/// Invalid parameter or configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    double norm() const { return std::hypot(x, y); }
};

/// Row-major 2x2 matrix, m[i][j] = entry (i, j).
struct Mat2 {
    std::array<std::array<double, 2>, 2> m{};

    static Mat2 of(double a11, double a12, double a21, double a22) {
        Mat2 r;
        r.m[0][0] = a11;
        r.m[0][1] = a12;
        r.m[1][0] = a21;
        r.m[1][1] = a22;
        return r;
    }
    static Mat2 identity() { return of(1.0, 0.0, 0.0, 1.0); }
    static Mat2 diag(double a, double b) { return of(a, 0.0, 0.0, b); }

    double operator()(int i, int j) const { return m[i][j]; }
    double& operator()(int i, int j) { return m[i][j]; }

    double trace() const { return m[0][0] + m[1][1]; }
    double det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }
    double frobenius() const {
        return std::sqrt(m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] +
                         m[1][1] * m[1][1]);
    }
    double max_abs() const {
        return std::max(std::max(std::abs(m[0][0]), std::abs(m[0][1])),
                        std::max(std::abs(m[1][0]), std::abs(m[1][1])));
    }
    Mat2 transpose() const { return of(m[0][0], m[1][0], m[0][1], m[1][1]); }
    Mat2 inverse() const {
        const double d = det();
        return of(m[1][1] / d, -m[0][1] / d, -m[1][0] / d, m[0][0] / d);
    }
    /// Ratio of largest to smallest singular value.
    double condition() const {
        const double f2 = m[0][0] * m[0][0] + m[0][1] * m[0][1] + m[1][0] * m[1][0] +
                          m[1][1] * m[1][1];
        const double d = std::abs(det());
        if (d == 0.0) return INFINITY;
        const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * d * d));
        const double smax = std::sqrt(0.5 * (f2 + disc));
        const double smin = d / smax;
        return smax / smin;
    }
    /// Eigenvalues of the symmetric part, largest first.
    std::array<double, 2> sym_eigenvalues() const {
        const double a = m[0][0];
        const double c = m[1][1];
        const double b = 0.5 * (m[0][1] + m[1][0]);
        const double mid = 0.5 * (a + c);
        const double rad = std::hypot(0.5 * (a - c), b);
        return {mid + rad, mid - rad};
    }

    friend Mat2 operator+(const Mat2& a, const Mat2& b) {
        return of(a(0, 0) + b(0, 0), a(0, 1) + b(0, 1), a(1, 0) + b(1, 0), a(1, 1) + b(1, 1));
    }
    friend Mat2 operator-(const Mat2& a, const Mat2& b) {
        return of(a(0, 0) - b(0, 0), a(0, 1) - b(0, 1), a(1, 0) - b(1, 0), a(1, 1) - b(1, 1));
    }
    friend Mat2 operator*(double s, const Mat2& a) {
        return of(s * a(0, 0), s * a(0, 1), s * a(1, 0), s * a(1, 1));
    }
    friend Mat2 operator*(const Mat2& a, const Mat2& b) {
        Mat2 r;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j);
        return r;
    }
    friend Vec2 operator*(const Mat2& a, Vec2 v) {
        return {a(0, 0) * v.x + a(0, 1) * v.y, a(1, 0) * v.x + a(1, 1) * v.y};
    }
};

}  // namespace oldrlab
