#pragma once

// Thin FFTW wrapper: per-thread cached real<->complex plans for square
// periodic grids in one or two dimensions.
//
// Plans are created with FFTW_ESTIMATE so the chosen algorithm (and hence the
// floating point result) depends only on the transform size. The FFTW planner
// is not thread-safe; plan creation/destruction is serialized by a global
// mutex, execution is not.

#include <fftw3.h>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include <complex>
#include <cstddef>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace oldrlab::fft {

inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

class Plan {
public:
    Plan(int dim, int n) : dim_(dim), n_(n) {
        real_size_ = dim == 1 ? static_cast<std::size_t>(n)
                              : static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
        spec_size_ = dim == 1 ? static_cast<std::size_t>(n / 2 + 1)
                              : static_cast<std::size_t>(n) * static_cast<std::size_t>(n / 2 + 1);
        std::lock_guard<std::mutex> lock(planner_mutex());
        real_ = fftw_alloc_real(real_size_);
        spec_ = fftw_alloc_complex(spec_size_);
        if (dim == 1) {
            fwd_ = fftw_plan_dft_r2c_1d(n, real_, spec_, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_c2r_1d(n, spec_, real_, FFTW_ESTIMATE);
        } else {
            fwd_ = fftw_plan_dft_r2c_2d(n, n, real_, spec_, FFTW_ESTIMATE);
            bwd_ = fftw_plan_dft_c2r_2d(n, n, spec_, real_, FFTW_ESTIMATE);
        }
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    ~Plan() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(spec_);
    }

    std::size_t real_size() const { return real_size_; }
    std::size_t spec_size() const { return spec_size_; }

    // Forward transform normalized so the zero coefficient is the mean.
    std::vector<std::complex<double>> forward(std::span<const double> in) {
        std::memcpy(real_, in.data(), real_size_ * sizeof(double));
        fftw_execute(fwd_);
        const double scale = 1.0 / static_cast<double>(real_size_);
        const auto* s = reinterpret_cast<const std::complex<double>*>(spec_);
        std::vector<std::complex<double>> out(s, s + spec_size_);
        for (auto& v : out) v *= scale;
        return out;
    }

    // Inverse of forward(): plain synthesis sum_k c_k e^{ik.x}.
    std::vector<double> backward(std::span<const std::complex<double>> in) {
        std::memcpy(spec_, in.data(), spec_size_ * sizeof(fftw_complex));
        fftw_execute(bwd_);
        return std::vector<double>(real_, real_ + real_size_);
    }

private:
    int dim_;
    int n_;
    std::size_t real_size_ = 0;
    std::size_t spec_size_ = 0;
    double* real_ = nullptr;
    fftw_complex* spec_ = nullptr;
    fftw_plan fwd_ = nullptr;
    fftw_plan bwd_ = nullptr;
};

/// Keeps large field buffers on the heap instead of fresh mmap regions, which
/// otherwise page-fault on every field construction. glibc only; no-op elsewhere.
inline void tune_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 64 << 20);
    mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
}

inline Plan& plan_for(int dim, int n) {
    thread_local std::map<std::pair<int, int>, std::unique_ptr<Plan>> cache;
    auto& slot = cache[{dim, n}];
    if (!slot) slot = std::make_unique<Plan>(dim, n);
    return *slot;
}

}  // namespace oldrlab::fft
