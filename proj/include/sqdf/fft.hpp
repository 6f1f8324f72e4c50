#pragma once

// Thin RAII layer over FFTW3 (complex, double precision).

#include <fftw3.h>

#include <algorithm>
#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

namespace sqdf::fft {

using cplx = std::complex<double>;

namespace detail {

// FFTW's planner is not reentrant.
inline std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* p) const {
        if (p != nullptr) {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(p);
        }
    }
};

}  // namespace detail

enum class Direction { Forward = FFTW_FORWARD, Backward = FFTW_BACKWARD };

/// In-place complex DFT of fixed size.
///   Forward:  X[k] = sum_j x[j] e^{-2 pi i jk/n}
///   Backward: X[k] = sum_j x[j] e^{+2 pi i jk/n}   (unnormalized)
class Plan {
public:
    Plan(std::size_t n, Direction dir) : n_(n), buf_(n) {
        std::lock_guard lock(detail::planner_mutex());
        auto* data = reinterpret_cast<fftw_complex*>(buf_.data());
        plan_.reset(fftw_plan_dft_1d(static_cast<int>(n), data, data,
                                     static_cast<int>(dir), FFTW_ESTIMATE));
    }

    std::size_t size() const { return n_; }
    std::span<cplx> buffer() { return buf_; }

    void execute() { fftw_execute(plan_.get()); }

private:
    std::size_t n_;
    std::vector<cplx> buf_;
    std::unique_ptr<fftw_plan_s, detail::PlanDeleter> plan_;
};

/// Returns the transform of `in` zero-padded to length n.
inline std::vector<cplx> transform(std::span<const cplx> in, std::size_t n, Direction dir) {
    Plan plan(n, dir);
    auto buf = plan.buffer();
    std::fill(buf.begin(), buf.end(), cplx{});
    std::copy(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(std::min(in.size(), n)),
              buf.begin());
    plan.execute();
    return {buf.begin(), buf.end()};
}

inline std::vector<cplx> transform(std::span<const double> in, std::size_t n, Direction dir) {
    Plan plan(n, dir);
    auto buf = plan.buffer();
    std::fill(buf.begin(), buf.end(), cplx{});
    for (std::size_t i = 0; i < in.size() && i < n; ++i) buf[i] = in[i];
    plan.execute();
    return {buf.begin(), buf.end()};
}

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace sqdf::fft
