#pragma once

// Piecewise-polynomial weights on T that are periodic with period 1/Q.
//
// A weight W(alpha) = w(Q alpha mod 1) is stored through its profile w on
// one unit period [0, 1].  Only frequencies that are multiples of Q survive
// integration against W:
//
//     int_0^1 W(alpha) e^{-2 pi i Q k alpha} d alpha = w^(k) = int_0^1 w(u) e^{-2 pi i k u} du,
//
// so integrals of |f^|^2 W (and of g^ conj(h^) S W) collapse to finite sums
// over the autocorrelation sampled on the lattice QZ.  Every w^(k) is
// evaluated in closed form, which makes these integrals exact up to rounding.

#include "sqdf/error.hpp"
#include "sqdf/fourier.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace sqdf {

/// Polynomial c0 + c1 x + ... + c4 x^4 in the local coordinate x = u - a on [a, b].
struct PolyPiece {
    double a = 0.0;
    double b = 0.0;
    std::array<double, 5> c{};

    double eval(double u) const {
        const double x = u - a;
        return c[0] + x * (c[1] + x * (c[2] + x * (c[3] + x * c[4])));
    }

    int degree() const {
        for (int d = 4; d > 0; --d)
            if (c[static_cast<std::size_t>(d)] != 0.0) return d;
        return 0;
    }

    /// Same polynomial re-expanded around a new left endpoint.
    PolyPiece rebased(double na, double nb) const {
        const double d = na - a;
        PolyPiece p{na, nb, {}};
        // Taylor shift: p(x + d) = sum_k c_k (x + d)^k
        static constexpr int binom[5][5] = {
            {1, 0, 0, 0, 0}, {1, 1, 0, 0, 0}, {1, 2, 1, 0, 0}, {1, 3, 3, 1, 0}, {1, 4, 6, 4, 1}};
        // coefficient of x^j from c_k (x+d)^k is binom(k,j) d^{k-j}
        for (int k = 0; k < 5; ++k) {
            for (int j = 0; j <= k; ++j) {
                p.c[static_cast<std::size_t>(j)] +=
                    c[static_cast<std::size_t>(k)] * binom[k][j] * std::pow(d, k - j);
            }
        }
        return p;
    }
};

class PeriodicWeight {
public:
    PeriodicWeight() : PeriodicWeight(constant(0.0)) {}

    static PeriodicWeight constant(double v) {
        PeriodicWeight w(0);
        w.pieces_.push_back({0.0, 1.0, {v, 0, 0, 0, 0}});
        return w;
    }

    /// sum_k height * max(0, 1 - |u - k*spacing| / half_width), k over Z.
    /// `spacing` must be 1/n for a positive integer n.
    static PeriodicWeight triangle_train(double half_width, double spacing = 1.0, double height = 1.0) {
        if (!(half_width > 0.0)) throw PreconditionError("triangle_train: half width must be positive");
        const double inv = 1.0 / spacing;
        const auto per_unit = static_cast<std::int64_t>(std::llround(inv));
        if (per_unit < 1 || std::abs(inv - static_cast<double>(per_unit)) > 1e-9 * inv)
            throw PreconditionError("triangle_train: spacing must be 1/n");
        const double overlap = 2.0 * half_width / spacing;
        if (static_cast<double>(per_unit) * (overlap + 3.0) > 4e7)
            throw PreconditionError("triangle_train: too many breakpoints to materialize");

        const auto kmin = static_cast<std::int64_t>(std::floor(-half_width / spacing)) - 1;
        const auto kmax = static_cast<std::int64_t>(std::ceil((1.0 + half_width) / spacing)) + 1;
        auto center = [&](std::int64_t k) { return static_cast<double>(k) / static_cast<double>(per_unit); };

        std::vector<double> bps{0.0, 1.0};
        for (std::int64_t k = kmin; k <= kmax; ++k) {
            const double c = center(k);
            for (double x : {c - half_width, c, c + half_width})
                if (x > 0.0 && x < 1.0) bps.push_back(x);
        }
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end()), bps.end());

        PeriodicWeight w(0);
        w.pieces_.reserve(bps.size());
        for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
            const double a = bps[i], b = bps[i + 1];
            if (!(b > a)) continue;
            const double mid = 0.5 * (a + b);
            // Active triangles are those whose open support contains mid.
            const auto k_lo = static_cast<std::int64_t>(std::ceil((mid - half_width) / spacing - 1e-12));
            const auto k_hi = static_cast<std::int64_t>(std::floor((mid + half_width) / spacing + 1e-12));
            double v0 = 0.0, slope = 0.0;
            for (std::int64_t k = k_lo; k <= k_hi; ++k) {
                const double c = center(k);
                if (std::abs(mid - c) >= half_width) continue;
                const double s = (mid >= c) ? -1.0 : 1.0;
                v0 += height * (1.0 - std::abs(a - c) / half_width);
                slope += height * s / half_width;
            }
            w.pieces_.push_back({a, b, {v0, slope, 0, 0, 0}});
        }
        return w;
    }

    /// Indicator of a union of closed intervals inside [0, 1].
    static PeriodicWeight indicator(std::span<const Arc> intervals) {
        std::vector<Arc> iv(intervals.begin(), intervals.end());
        for (Arc& a : iv) {
            a.lo = std::clamp(a.lo, 0.0, 1.0);
            a.hi = std::clamp(a.hi, 0.0, 1.0);
        }
        std::sort(iv.begin(), iv.end(), [](const Arc& x, const Arc& y) { return x.lo < y.lo; });
        std::vector<Arc> merged;
        for (const Arc& a : iv) {
            if (!(a.hi > a.lo)) continue;
            if (!merged.empty() && a.lo <= merged.back().hi)
                merged.back().hi = std::max(merged.back().hi, a.hi);
            else
                merged.push_back(a);
        }
        PeriodicWeight w(0);
        double cursor = 0.0;
        for (const Arc& a : merged) {
            if (a.lo > cursor) w.pieces_.push_back({cursor, a.lo, {0, 0, 0, 0, 0}});
            w.pieces_.push_back({a.lo, a.hi, {1, 0, 0, 0, 0}});
            cursor = a.hi;
        }
        if (cursor < 1.0) w.pieces_.push_back({cursor, 1.0, {0, 0, 0, 0, 0}});
        return w;
    }

    std::span<const PolyPiece> pieces() const { return pieces_; }

    double operator()(double u) const {
        u = TorusPoint::reduce(u);
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), u,
                                   [](double v, const PolyPiece& p) { return v < p.a; });
        if (it != pieces_.begin()) --it;
        return it->eval(u);
    }

    friend PeriodicWeight operator+(const PeriodicWeight& x, const PeriodicWeight& y) {
        return combine(x, y, [](const PolyPiece& p, const PolyPiece& q) {
            PolyPiece r = p;
            for (std::size_t i = 0; i < 5; ++i) r.c[i] += q.c[i];
            return r;
        });
    }

    friend PeriodicWeight operator-(const PeriodicWeight& x, const PeriodicWeight& y) {
        return combine(x, y, [](const PolyPiece& p, const PolyPiece& q) {
            PolyPiece r = p;
            for (std::size_t i = 0; i < 5; ++i) r.c[i] -= q.c[i];
            return r;
        });
    }

    friend PeriodicWeight operator*(const PeriodicWeight& x, const PeriodicWeight& y) {
        return combine(x, y, [](const PolyPiece& p, const PolyPiece& q) {
            if (p.degree() + q.degree() > 4) throw PreconditionError("PeriodicWeight: degree overflow");
            PolyPiece r{p.a, p.b, {}};
            for (std::size_t i = 0; i < 5; ++i)
                for (std::size_t j = 0; i + j < 5; ++j) r.c[i + j] += p.c[i] * q.c[j];
            return r;
        });
    }

    PeriodicWeight scaled(double s) const {
        PeriodicWeight w = *this;
        for (auto& p : w.pieces_)
            for (double& c : p.c) c *= s;
        return w;
    }

    /// |w|, splitting pieces at sign changes (pieces of degree <= 2).
    PeriodicWeight abs() const {
        PeriodicWeight w(0);
        for (const PolyPiece& p : pieces_) {
            if (p.degree() > 2) throw PreconditionError("PeriodicWeight::abs: degree > 2");
            std::vector<double> cuts{p.a};
            for (double r : roots_in(p)) cuts.push_back(r);
            cuts.push_back(p.b);
            for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
                if (!(cuts[i + 1] > cuts[i])) continue;
                PolyPiece q = p.rebased(cuts[i], cuts[i + 1]);
                if (p.eval(0.5 * (cuts[i] + cuts[i + 1])) < 0.0)
                    for (double& c : q.c) c = -c;
                w.pieces_.push_back(q);
            }
        }
        return w;
    }

    /// max |w| (exact for pieces of degree <= 2).
    double sup_abs() const {
        double m = 0.0;
        for (const PolyPiece& p : pieces_) {
            m = std::max({m, std::abs(p.eval(p.a)), std::abs(p.eval(p.b))});
            if (p.degree() == 2) {
                const double x = -p.c[1] / (2.0 * p.c[2]);
                if (x > 0.0 && p.a + x < p.b) m = std::max(m, std::abs(p.eval(p.a + x)));
            } else if (p.degree() > 2) {
                for (int i = 1; i < 64; ++i) m = std::max(m, std::abs(p.eval(p.a + (p.b - p.a) * i / 64.0)));
            }
        }
        return m;
    }

    /// w^(k) = int_0^1 w(u) e^{-2 pi i k u} du.
    cplx fourier_coeff(std::int64_t k) const {
        cplx total{};
        for (const PolyPiece& p : pieces_) total += piece_coeff(p, k);
        return total;
    }

    double integral() const { return fourier_coeff(0).real(); }

private:
    explicit PeriodicWeight(int) {}

    template <class Op>
    static PeriodicWeight combine(const PeriodicWeight& x, const PeriodicWeight& y, Op op) {
        std::vector<double> bps;
        bps.reserve(x.pieces_.size() + y.pieces_.size() + 2);
        for (const auto& p : x.pieces_) bps.push_back(p.a);
        for (const auto& p : y.pieces_) bps.push_back(p.a);
        bps.push_back(1.0);
        std::sort(bps.begin(), bps.end());
        bps.erase(std::unique(bps.begin(), bps.end()), bps.end());
        PeriodicWeight w(0);
        std::size_t ix = 0, iy = 0;
        for (std::size_t i = 0; i + 1 < bps.size(); ++i) {
            const double a = bps[i], b = bps[i + 1];
            while (ix + 1 < x.pieces_.size() && x.pieces_[ix].b <= a) ++ix;
            while (iy + 1 < y.pieces_.size() && y.pieces_[iy].b <= a) ++iy;
            w.pieces_.push_back(op(x.pieces_[ix].rebased(a, b), y.pieces_[iy].rebased(a, b)));
        }
        return w;
    }

    static std::vector<double> roots_in(const PolyPiece& p) {
        std::vector<double> out;
        const double h = p.b - p.a;
        auto keep = [&](double x) {
            if (x > 0.0 && x < h) out.push_back(p.a + x);
        };
        if (p.degree() == 1) {
            keep(-p.c[0] / p.c[1]);
        } else if (p.degree() == 2) {
            const double disc = p.c[1] * p.c[1] - 4.0 * p.c[2] * p.c[0];
            if (disc > 0.0) {
                const double sq = std::sqrt(disc);
                const double qq = -0.5 * (p.c[1] + std::copysign(sq, p.c[1]));
                if (qq != 0.0) keep(p.c[0] / qq);
                keep(qq / p.c[2]);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    // int_a^b p(u) e^{-2 pi i k u} du
    static cplx piece_coeff(const PolyPiece& p, std::int64_t k) {
        const double h = p.b - p.a;
        if (!(h > 0.0)) return {};
        const int deg = p.degree();
        if (k == 0) {
            double s = 0.0, hp = h;
            for (int d = 0; d <= deg; ++d, hp *= h) s += p.c[static_cast<std::size_t>(d)] * hp / (d + 1);
            return {s, 0.0};
        }
        const cplx beta{0.0, -kTwoPi * static_cast<double>(k)};
        const cplx phase = cis_turns(-phase_frac(k, p.a));
        const double bh = std::abs(beta) * h;
        cplx integral{};
        if (bh <= 1.0) {
            // Taylor expansion of e^{beta x}
            cplx bj{1.0, 0.0};
            double fact = 1.0;
            for (int j = 0; j < 40; ++j) {
                if (j > 0) {
                    bj *= beta;
                    fact *= j;
                }
                double mom = 0.0;
                for (int d = 0; d <= deg; ++d)
                    mom += p.c[static_cast<std::size_t>(d)] * std::pow(h, d + j + 1) / (d + j + 1);
                const cplx term = bj / fact * mom;
                integral += term;
                if (j > 4 && std::abs(term) < 1e-18 * (std::abs(integral) + 1e-300)) break;
            }
        } else {
            // int_0^h x^d e^{beta x} dx = [e^{beta x} sum_i (-1)^i d!/(d-i)! x^{d-i} / beta^{i+1}]_0^h
            const cplx eh = cis_turns(-phase_frac(k, p.b) + phase_frac(k, p.a));
            for (int d = 0; d <= deg; ++d) {
                const double cd = p.c[static_cast<std::size_t>(d)];
                if (cd == 0.0) continue;
                cplx at_h{}, at_0{};
                double falling = 1.0;
                cplx bpow = beta;
                for (int i = 0; i <= d; ++i) {
                    const double sign = (i % 2 == 0) ? 1.0 : -1.0;
                    at_h += sign * falling * std::pow(h, d - i) / bpow;
                    if (i == d) at_0 += sign * falling / bpow;
                    falling *= (d - i);
                    bpow *= beta;
                }
                integral += cd * (eh * at_h - at_0);
            }
        }
        return phase * integral;
    }

    std::vector<PolyPiece> pieces_;
};

/// int_T |f^|^2 W, where r is the autocorrelation of f and W(alpha) = w(Q alpha).
inline double periodic_energy(const IntegerFunction& r, const PeriodicWeight& w, std::int64_t Q) {
    if (Q < 1) throw PreconditionError("periodic_energy: period denominator must be >= 1");
    if (r.is_zero_repr()) return 0.0;
    double total = r(0) * w.fourier_coeff(0).real();
    const std::int64_t mmax = r.end() - 1;
    for (std::int64_t k = 1; k * Q <= mmax; ++k) {
        const double rk = r(k * Q);
        if (rk != 0.0) total += 2.0 * rk * w.fourier_coeff(k).real();
    }
    return total;
}

/// scale * sum_t int_T c^ . e^{2 pi i t^2 alpha} W, for the cross-correlation
/// c(m) = sum_n g(n) h(n - m) and an even weight W(alpha) = w(Q alpha).  This is
/// the transform-side value of scale * sum_t sum_n (g*k_a)(n) (h*k_b)(n - t^2)
/// when W is the product of the multipliers of the kernels k_a, k_b.
inline double periodic_lambda(const IntegerFunction& c, std::span<const std::int64_t> ts,
                              const PeriodicWeight& w, std::int64_t Q, double scale) {
    if (Q < 1) throw PreconditionError("periodic_lambda: period denominator must be >= 1");
    if (c.is_zero_repr() || ts.empty()) return 0.0;
    const std::int64_t lo = c.start(), hi = c.end() - 1;
    std::int64_t tmin = ts.front() * ts.front(), tmax = tmin;
    for (auto t : ts) {
        tmin = std::min(tmin, t * t);
        tmax = std::max(tmax, t * t);
    }
    auto floor_div = [](std::int64_t a, std::int64_t b) {
        std::int64_t q = a / b;
        if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
        return q;
    };
    const std::int64_t kmin = floor_div(lo - tmax, Q) - 1;
    const std::int64_t kmax = floor_div(hi - tmin, Q) + 1;
    std::vector<double> coeff(static_cast<std::size_t>(kmax - kmin + 1));
    for (std::int64_t k = kmin; k <= kmax; ++k)
        coeff[static_cast<std::size_t>(k - kmin)] = w.fourier_coeff(k).real();
    double total = 0.0;
    for (auto t : ts) {
        const std::int64_t s = t * t;
        double part = 0.0;
        for (std::int64_t k = floor_div(lo - s, Q); k <= floor_div(hi - s, Q) + 1; ++k) {
            const double cv = c(s + k * Q);
            if (cv != 0.0) part += cv * coeff[static_cast<std::size_t>(k - kmin)];
        }
        total += part;
    }
    return scale * total;
}

}  // namespace sqdf
