#pragma once

// Discrete Fourier analysis for finitely supported real functions on Z.
//
// Convention:  f^(alpha) = sum_n f(n) e^{-2 pi i n alpha},  alpha in T = [0,1).
// Interval integrals of |f^|^2 are evaluated exactly through the
// autocorrelation r(m) = sum_n f(n) f(n-m), since |f^|^2 = sum_m r(m) e^{-2 pi i m alpha}
// is a trigonometric polynomial.

#include "sqdf/error.hpp"
#include "sqdf/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace sqdf {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Fractional part of n*alpha reduced to [-1/2, 1/2].  The product is split
/// into a rounded part and its exact fma residual before reduction, so the
/// result is accurate to ~1 ulp for |n| < 2^52 regardless of the size of n*alpha.
inline double phase_frac(std::int64_t n, double alpha) {
    const double dn = static_cast<double>(n);
    const double p = dn * alpha;
    const double e = std::fma(dn, alpha, -p);
    double f = p - std::nearbyint(p);
    f += e;
    return f - std::nearbyint(f);
}

/// e^{2 pi i x}
inline cplx cis_turns(double x) {
    const double a = kTwoPi * x;
    return {std::cos(a), std::sin(a)};
}

/// A point of the circle T, reduced into [0, 1) on construction.
class TorusPoint {
public:
    TorusPoint() = default;
    explicit TorusPoint(double alpha) : alpha_(reduce(alpha)) {}

    double value() const { return alpha_; }

    static double reduce(double x) {
        double r = x - std::floor(x);
        return r >= 1.0 ? 0.0 : r;
    }

private:
    double alpha_ = 0.0;
};

/// Finitely supported real-valued function on the integers.
/// The zero function has no stored values.
class IntegerFunction {
public:
    IntegerFunction() = default;

    IntegerFunction(std::int64_t start, std::vector<double> values)
        : start_(start), values_(std::move(values)) {
        for (double v : values_) {
            if (!std::isfinite(v)) throw PreconditionError("IntegerFunction: non-finite value");
        }
        if (values_.empty()) start_ = 0;
    }

    static IntegerFunction point_mass(std::int64_t n0, double c = 1.0) {
        return IntegerFunction(n0, {c});
    }

    /// Indicator of the integer interval [lo, hi].
    static IntegerFunction interval(std::int64_t lo, std::int64_t hi, double c = 1.0) {
        if (hi < lo) return {};
        return IntegerFunction(lo, std::vector<double>(static_cast<std::size_t>(hi - lo + 1), c));
    }

    std::int64_t start() const { return start_; }
    /// One past the last stored index.
    std::int64_t end() const { return start_ + static_cast<std::int64_t>(values_.size()); }
    std::size_t size() const { return values_.size(); }
    bool is_zero_repr() const { return values_.empty(); }
    std::span<const double> values() const { return values_; }

    double operator()(std::int64_t n) const {
        if (n < start_ || n >= end()) return 0.0;
        return values_[static_cast<std::size_t>(n - start_)];
    }

    double sum() const {
        double s = 0.0, c = 0.0;
        for (double v : values_) {
            const double y = v - c;
            const double t = s + y;
            c = (t - s) - y;
            s = t;
        }
        return s;
    }

    double l1_norm() const {
        double s = 0.0;
        for (double v : values_) s += std::abs(v);
        return s;
    }

    double sum_squares() const {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return s;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : values_) m = std::max(m, std::abs(v));
        return m;
    }

    bool all_integral() const {
        return std::all_of(values_.begin(), values_.end(),
                           [](double v) { return v == std::nearbyint(v) && std::abs(v) < 0x1p26; });
    }

    /// True when every value lies in [lo - tol, hi + tol].
    bool values_within(double lo, double hi, double tol = 0.0) const {
        return std::all_of(values_.begin(), values_.end(),
                           [&](double v) { return v >= lo - tol && v <= hi + tol; });
    }

    /// Restriction to the window [lo, hi) (values outside become absent).
    IntegerFunction window(std::int64_t lo, std::int64_t hi) const {
        lo = std::max(lo, start_);
        hi = std::min(hi, end());
        if (hi <= lo) return {};
        auto first = values_.begin() + (lo - start_);
        return IntegerFunction(lo, std::vector<double>(first, first + (hi - lo)));
    }

    friend IntegerFunction combine(const IntegerFunction& a, double ca, const IntegerFunction& b,
                                   double cb) {
        if (a.is_zero_repr() && b.is_zero_repr()) return {};
        std::int64_t lo, hi;
        if (a.is_zero_repr()) {
            lo = b.start_;
            hi = b.end();
        } else if (b.is_zero_repr()) {
            lo = a.start_;
            hi = a.end();
        } else {
            lo = std::min(a.start_, b.start_);
            hi = std::max(a.end(), b.end());
        }
        std::vector<double> out(static_cast<std::size_t>(hi - lo), 0.0);
        for (std::size_t i = 0; i < a.size(); ++i) out[a.start_ - lo + i] += ca * a.values_[i];
        for (std::size_t i = 0; i < b.size(); ++i) out[b.start_ - lo + i] += cb * b.values_[i];
        return IntegerFunction(lo, std::move(out));
    }

    friend IntegerFunction operator+(const IntegerFunction& a, const IntegerFunction& b) {
        return combine(a, 1.0, b, 1.0);
    }
    friend IntegerFunction operator-(const IntegerFunction& a, const IntegerFunction& b) {
        return combine(a, 1.0, b, -1.0);
    }

private:
    std::int64_t start_ = 0;
    std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Arc systems

struct Arc {
    double lo = 0.0;
    double hi = 0.0;
    double length() const { return hi - lo; }
    friend bool operator==(const Arc&, const Arc&) = default;
};

/// Finite union of closed arcs of T, each given by a real interval [lo, hi]
/// read modulo 1.
class ArcSystem {
public:
    ArcSystem() = default;

    explicit ArcSystem(std::vector<Arc> arcs) : arcs_(std::move(arcs)) {
        for (const Arc& a : arcs_) {
            if (!(a.lo <= a.hi) || !std::isfinite(a.lo) || !std::isfinite(a.hi))
                throw PreconditionError("ArcSystem: interval with lo > hi");
            if (a.hi - a.lo > 1.0) throw PreconditionError("ArcSystem: interval longer than 1");
        }
    }

    static ArcSystem full() {
        ArcSystem s({{0.0, 1.0}});
        s.normalized_ = true;
        return s;
    }

    std::span<const Arc> arcs() const { return arcs_; }
    bool empty() const { return arcs_.empty(); }
    bool is_normalized() const { return normalized_ || arcs_.empty(); }
    bool is_full() const {
        return normalized_ && arcs_.size() == 1 && arcs_[0].lo <= 0.0 && arcs_[0].hi >= 1.0;
    }

    /// Sorted, pairwise disjoint arcs inside [0, 1]; arcs overlapping modulo 1
    /// (including those that merely touch) are merged.
    ArcSystem normalized() const {
        if (normalized_) return *this;
        std::vector<Arc> pieces;
        pieces.reserve(arcs_.size() + 2);
        for (const Arc& a : arcs_) {
            const double len = a.hi - a.lo;
            if (len >= 1.0) return full();
            const double lo = TorusPoint::reduce(a.lo);
            const double hi = lo + len;
            if (hi <= 1.0) {
                pieces.push_back({lo, hi});
            } else {
                pieces.push_back({lo, 1.0});
                pieces.push_back({0.0, hi - 1.0});
            }
        }
        std::sort(pieces.begin(), pieces.end(),
                  [](const Arc& x, const Arc& y) { return x.lo < y.lo || (x.lo == y.lo && x.hi < y.hi); });
        std::vector<Arc> merged;
        for (const Arc& p : pieces) {
            if (!merged.empty() && p.lo <= merged.back().hi) {
                merged.back().hi = std::max(merged.back().hi, p.hi);
            } else {
                merged.push_back(p);
            }
        }
        ArcSystem out;
        out.arcs_ = std::move(merged);
        out.normalized_ = true;
        if (out.measure() >= 1.0) return full();
        return out;
    }

    double measure() const {
        const ArcSystem& n = normalized_ ? *this : normalized();
        double m = 0.0;
        for (const Arc& a : n.arcs_) m += a.length();
        return std::min(m, 1.0);
    }

    /// Closed membership modulo 1.
    bool contains(double alpha) const {
        const double x = TorusPoint::reduce(alpha);
        auto hit = [&](const Arc& a) {
            const double lo = a.lo - std::floor(a.lo);
            const double hi = lo + (a.hi - a.lo);
            return (x >= lo && x <= hi) || (x + 1.0 >= lo && x + 1.0 <= hi);
        };
        if (normalized_) {
            // Binary search on sorted arcs; 0 is also covered by an arc ending at 1.
            auto it = std::upper_bound(arcs_.begin(), arcs_.end(), x,
                                       [](double v, const Arc& a) { return v < a.lo; });
            if (it != arcs_.begin() && x <= std::prev(it)->hi) return true;
            return x == 0.0 && !arcs_.empty() && arcs_.back().hi >= 1.0;
        }
        return std::any_of(arcs_.begin(), arcs_.end(), hit);
    }

    friend ArcSystem unite(const ArcSystem& a, const ArcSystem& b) {
        std::vector<Arc> all(a.arcs_.begin(), a.arcs_.end());
        all.insert(all.end(), b.arcs_.begin(), b.arcs_.end());
        return ArcSystem(std::move(all)).normalized();
    }

    friend ArcSystem intersect(const ArcSystem& a, const ArcSystem& b) {
        const ArcSystem na = a.normalized(), nb = b.normalized();
        std::vector<Arc> out;
        std::size_t i = 0, j = 0;
        while (i < na.arcs_.size() && j < nb.arcs_.size()) {
            const Arc& x = na.arcs_[i];
            const Arc& y = nb.arcs_[j];
            const double lo = std::max(x.lo, y.lo), hi = std::min(x.hi, y.hi);
            if (lo <= hi) out.push_back({lo, hi});
            (x.hi < y.hi) ? ++i : ++j;
        }
        ArcSystem s;
        s.arcs_ = std::move(out);
        s.normalized_ = true;
        return s;
    }

private:
    std::vector<Arc> arcs_;
    bool normalized_ = false;
};

// ---------------------------------------------------------------------------
// Transforms

/// f^(alpha), Kahan-compensated, summed in ascending n.
inline cplx fourier_eval(const IntegerFunction& f, TorusPoint alpha) {
    double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0;
    const auto vals = f.values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
        if (vals[i] == 0.0) continue;
        const std::int64_t n = f.start() + static_cast<std::int64_t>(i);
        const cplx term = vals[i] * cis_turns(-phase_frac(n, alpha.value()));
        double y = term.real() - cr;
        double t = sr + y;
        cr = (t - sr) - y;
        sr = t;
        y = term.imag() - ci;
        t = si + y;
        ci = (t - si) - y;
        si = t;
    }
    return {sr, si};
}

/// f^(k/M) for k = 0..M-1 via one FFT.  Requires M >= support length so the
/// grid determines f.
inline std::vector<cplx> dft_grid(const IntegerFunction& f, std::size_t M) {
    if (M == 0 || M < f.size())
        throw ResolutionError("grid too coarse for exact representation");
    auto out = fft::transform(f.values(), M, fft::Direction::Forward);
    const auto m = static_cast<std::int64_t>(M);
    std::int64_t s = f.start() % m;
    if (s < 0) s += m;
    if (s != 0) {
        for (std::size_t k = 0; k < M; ++k) {
            const auto e = static_cast<std::int64_t>((static_cast<__int128>(s) * k) % m);
            out[k] *= cis_turns(-static_cast<double>(e) / static_cast<double>(M));
        }
    }
    return out;
}

namespace detail {

inline std::vector<double> direct_convolution(std::span<const double> a, std::span<const double> b) {
    std::vector<double> out(a.size() + b.size() - 1, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] == 0.0) continue;
        for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
    }
    return out;
}

inline std::vector<double> fft_convolution(std::span<const double> a, std::span<const double> b) {
    const std::size_t len = a.size() + b.size() - 1;
    const std::size_t n = fft::next_pow2(len);
    auto fa = fft::transform(a, n, fft::Direction::Forward);
    auto fb = fft::transform(b, n, fft::Direction::Forward);
    for (std::size_t k = 0; k < n; ++k) fa[k] *= fb[k];
    auto back = fft::transform(std::span<const cplx>(fa), n, fft::Direction::Backward);
    std::vector<double> out(len);
    for (std::size_t i = 0; i < len; ++i) out[i] = back[i].real() / static_cast<double>(n);
    return out;
}

inline std::vector<double> linear_convolution(std::span<const double> a, std::span<const double> b) {
    if (std::min(a.size(), b.size()) <= 64 || a.size() * b.size() <= (1u << 20))
        return direct_convolution(a, b);
    return fft_convolution(a, b);
}

}  // namespace detail

/// (f*g)(n) = sum_l f(n-l) g(l).
inline IntegerFunction convolve(const IntegerFunction& f, const IntegerFunction& g) {
    if (f.is_zero_repr() || g.is_zero_repr()) return {};
    auto out = detail::linear_convolution(f.values(), g.values());
    if (f.all_integral() && g.all_integral()) {
        for (double& v : out) v = std::nearbyint(v);
    }
    return IntegerFunction(f.start() + g.start(), std::move(out));
}

/// r(m) = sum_n f(n) f(n-m), stored on [-(len-1), len-1].  Exactly even.
/// Integer-valued inputs give exactly integral outputs.
inline IntegerFunction autocorrelation(const IntegerFunction& f) {
    if (f.is_zero_repr()) return {};
    const std::size_t len = f.size();
    std::vector<double> r(2 * len - 1, 0.0);
    const auto v = f.values();
    if (len <= 256) {
        for (std::size_t m = 0; m < len; ++m) {
            double s = 0.0;
            for (std::size_t n = m; n < len; ++n) s += v[n] * v[n - m];
            r[len - 1 + m] = s;
            r[len - 1 - m] = s;
        }
    } else {
        const std::size_t n = fft::next_pow2(2 * len);
        auto spec = fft::transform(v, n, fft::Direction::Forward);
        for (auto& z : spec) z = std::norm(z);
        auto back = fft::transform(std::span<const cplx>(spec), n, fft::Direction::Backward);
        const bool integral = f.all_integral();
        for (std::size_t m = 0; m < len; ++m) {
            const double a = back[m].real() / static_cast<double>(n);
            const double b = back[(n - m) % n].real() / static_cast<double>(n);
            double s = 0.5 * (a + b);
            if (integral) s = std::nearbyint(s);
            r[len - 1 + m] = s;
            r[len - 1 - m] = s;
        }
    }
    return IntegerFunction(-static_cast<std::int64_t>(len - 1), std::move(r));
}

namespace detail {

/// G(x) = sum_{m=1}^{M} c_m sin(2 pi m x), with c = coeffs[m-1].
/// Rotation recurrence re-anchored from the exact phase every 64 steps.
inline double sine_series(std::span<const double> coeffs, double x) {
    constexpr std::size_t kBlock = 64;
    double total = 0.0, comp = 0.0;
    const cplx step = cis_turns(phase_frac(1, x));
    for (std::size_t base = 0; base < coeffs.size(); base += kBlock) {
        cplx z = cis_turns(phase_frac(static_cast<std::int64_t>(base + 1), x));
        double block = 0.0;
        const std::size_t stop = std::min(coeffs.size(), base + kBlock);
        for (std::size_t i = base; i < stop; ++i) {
            block += coeffs[i] * z.imag();
            z *= step;
        }
        const double y = block - comp;
        const double t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    return total;
}

}  // namespace detail

/// Exact integral of |f^|^2 over a normalized arc system.
///   int_arcs |f^|^2 = r(0)|arcs| + sum_{m>=1} r(m) [sin 2 pi m hi - sin 2 pi m lo] / (pi m)
inline double integrate_energy_autocorr(const IntegerFunction& r, const ArcSystem& arcs) {
    if (!arcs.is_normalized()) throw PreconditionError("integrate_energy: arcs must be normalized");
    if (r.is_zero_repr() || arcs.empty()) return 0.0;
    const double r0 = r(0);
    if (arcs.is_full()) return r0;
    const std::int64_t mmax = r.end() - 1;
    std::vector<double> coeffs(static_cast<std::size_t>(std::max<std::int64_t>(mmax, 0)));
    for (std::int64_t m = 1; m <= mmax; ++m)
        coeffs[static_cast<std::size_t>(m - 1)] = r(m) / (kPi * static_cast<double>(m));
    double total = r0 * arcs.measure();
    for (const Arc& a : arcs.arcs()) {
        total += detail::sine_series(coeffs, a.hi) - detail::sine_series(coeffs, a.lo);
    }
    return total;
}

inline double integrate_energy(const IntegerFunction& f, const ArcSystem& arcs) {
    if (!arcs.is_normalized()) throw PreconditionError("integrate_energy: arcs must be normalized");
    if (arcs.is_full()) return f.sum_squares();
    return integrate_energy_autocorr(autocorrelation(f), arcs);
}

}  // namespace sqdf
