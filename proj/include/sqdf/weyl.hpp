#pragma once

// Quadratic Weyl sums
//
//     S_{lambda,mu}(alpha)   = (1/mu) sum_{t=lambda+1}^{lambda+mu} e(t^2 alpha)
//     S_{lambda,mu,q}(alpha) = (q/mu) sum_{t in (lambda, lambda+mu], q|t} e(t^2 alpha)
//
// together with q_eta = lcm(1..floor(eta^-2)), major arcs around a/q^2 and the
// annuli around a/q_eta^2, and grid scans of |S| off the major arcs.

#include "sqdf/error.hpp"
#include "sqdf/fft.hpp"
#include "sqdf/fourier.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace sqdf {

using BigInt = boost::multiprecision::cpp_int;

struct WeylParams {
    std::int64_t lambda = 1;
    std::int64_t mu = 1;
    std::int64_t q = 1;

    WeylParams() = default;
    WeylParams(std::int64_t l, std::int64_t m, std::int64_t qq = 1) : lambda(l), mu(m), q(qq) {
        if (lambda < 1) throw PreconditionError("WeylParams: lambda must be >= 1");
        if (mu < 1) throw PreconditionError("WeylParams: mu must be >= 1");
        if (mu > lambda) throw PreconditionError("WeylParams: requires mu <= lambda");
        if (q < 1) throw PreconditionError("WeylParams: q must be >= 1");
        if (lambda + mu > 3'000'000'000LL) throw PreconditionError("WeylParams: t^2 would overflow");
    }

    /// lambda^2 <= N/4
    void check_against(std::int64_t n) const {
        if (4 * lambda * lambda > n)
            throw PreconditionError("lambda^2 <= N/4 violated (lambda=" + std::to_string(lambda) +
                                    ", N=" + std::to_string(n) + ")");
    }

    /// t in (lambda, lambda+mu] with q | t, ascending.
    std::vector<std::int64_t> admissible_t() const {
        std::vector<std::int64_t> ts;
        for (std::int64_t t = (lambda / q + 1) * q; t <= lambda + mu; t += q) ts.push_back(t);
        return ts;
    }

    double scale() const { return static_cast<double>(q) / static_cast<double>(mu); }
};

// ---------------------------------------------------------------------------
// Direct sums

namespace detail {

/// sum_{t in ts} e(t^2 alpha), Kahan-compensated, ascending t.
inline cplx square_phase_sum(const std::vector<std::int64_t>& ts, double alpha) {
    double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0;
    for (std::int64_t t : ts) {
        const cplx z = cis_turns(phase_frac(t * t, alpha));
        double y = z.real() - cr;
        double s = sr + y;
        cr = (s - sr) - y;
        sr = s;
        y = z.imag() - ci;
        s = si + y;
        ci = (s - si) - y;
        si = s;
    }
    return {sr, si};
}

inline std::vector<std::int64_t> t_range(std::int64_t lo_exclusive, std::int64_t hi_inclusive) {
    std::vector<std::int64_t> ts;
    for (std::int64_t t = lo_exclusive + 1; t <= hi_inclusive; ++t) ts.push_back(t);
    return ts;
}

}  // namespace detail

inline cplx weyl_sum(std::int64_t lambda, std::int64_t mu, TorusPoint alpha) {
    if (lambda < 0 || mu < 1) throw PreconditionError("weyl_sum: need lambda >= 0, mu >= 1");
    return detail::square_phase_sum(detail::t_range(lambda, lambda + mu), alpha.value()) /
           static_cast<double>(mu);
}

inline cplx weyl_sum(const WeylParams& p, TorusPoint alpha) {
    if (p.q != 1) throw PreconditionError("weyl_sum: params must have q = 1");
    return weyl_sum(p.lambda, p.mu, alpha);
}

/// Second form: (1/mu) sum_{t=1}^{mu} e((t^2 + 2 lambda t + lambda^2) alpha).
inline cplx weyl_sum_shifted_form(std::int64_t lambda, std::int64_t mu, TorusPoint alpha) {
    double sr = 0.0, si = 0.0;
    for (std::int64_t t = 1; t <= mu; ++t) {
        const double ph = phase_frac(t * t, alpha.value()) + phase_frac(2 * lambda * t, alpha.value()) +
                          phase_frac(lambda * lambda, alpha.value());
        const cplx z = cis_turns(ph);
        sr += z.real();
        si += z.imag();
    }
    return cplx{sr, si} / static_cast<double>(mu);
}

/// Sum over real endpoints: (1/mu) sum_{lambda < t <= lambda+mu} e(t^2 alpha).
inline cplx weyl_sum_real(double lambda, double mu, TorusPoint alpha) {
    if (!(mu > 0.0) || !(lambda >= 0.0)) throw PreconditionError("weyl_sum_real: need lambda >= 0, mu > 0");
    const auto lo = static_cast<std::int64_t>(std::floor(lambda));
    const auto hi = static_cast<std::int64_t>(std::floor(lambda + mu));
    return detail::square_phase_sum(detail::t_range(lo, hi), alpha.value()) / mu;
}

struct WeylValue {
    cplx value{};
    std::int64_t terms = 0;
    bool empty_sum = false;
};

inline WeylValue weyl_sum_q(const WeylParams& p, TorusPoint alpha) {
    const auto ts = p.admissible_t();
    WeylValue w;
    w.terms = static_cast<std::int64_t>(ts.size());
    w.empty_sum = ts.empty();
    if (!ts.empty()) w.value = detail::square_phase_sum(ts, alpha.value()) * p.scale();
    return w;
}

/// |S_{lambda,mu,q}(alpha) - S_{lambda/q,mu/q}(q^2 alpha)|
inline double weyl_rescale_check(const WeylParams& p, TorusPoint alpha) {
    if (p.lambda % p.q != 0 || p.mu % p.q != 0)
        throw PreconditionError("identity requires q|lambda and q|mu");
    const cplx lhs = weyl_sum_q(p, alpha).value;
    // q^2 alpha reduced exactly before forming the rescaled sum
    const TorusPoint scaled(phase_frac(p.q * p.q, alpha.value()));
    const cplx rhs = weyl_sum(p.lambda / p.q, p.mu / p.q, scaled);
    return std::abs(lhs - rhs);
}

// ---------------------------------------------------------------------------
// lcm and eta parameters

inline BigInt lcm_up_to(std::int64_t k) {
    if (k < 1) throw PreconditionError("lcm_up_to: k must be >= 1");
    if (k > 1'000'000) throw PreconditionError("lcm_up_to: k beyond desk scale");
    std::vector<bool> composite(static_cast<std::size_t>(k) + 1, false);
    BigInt result = 1;
    for (std::int64_t p = 2; p <= k; ++p) {
        if (composite[static_cast<std::size_t>(p)]) continue;
        for (std::int64_t m = p * p; m <= k; m += p) composite[static_cast<std::size_t>(m)] = true;
        std::int64_t pe = p;
        while (pe <= k / p) pe *= p;
        result *= pe;
    }
    return result;
}

inline std::optional<std::int64_t> to_int64(const BigInt& v) {
    if (v > BigInt(std::numeric_limits<std::int64_t>::max()) ||
        v < BigInt(std::numeric_limits<std::int64_t>::min()))
        return std::nullopt;
    return static_cast<std::int64_t>(v);
}

/// eta together with K = floor(eta^-2) and q_eta = lcm(1..K).
class EtaParams {
public:
    /// Largest K for which arc systems with q_eta^2 centers are built.
    static constexpr std::int64_t kMaterializableK = 8;

    explicit EtaParams(double eta) : eta_(eta) {
        if (!(eta > 0.0) || !(eta <= 1.0)) throw PreconditionError("EtaParams: eta must lie in (0, 1]");
        const double inv = 1.0 / (eta * eta);
        const double r = std::nearbyint(inv);
        if (std::abs(inv - r) <= 1e-9 * inv) {
            k_ = static_cast<std::int64_t>(r);
            exact_ = true;
        } else {
            if (inv > 9e15) throw PreconditionError("EtaParams: eta too small");
            k_ = static_cast<std::int64_t>(std::floor(inv));
        }
        if (k_ <= 1'000'000) q_ = lcm_up_to(k_);
    }

    /// Checks a caller-supplied q_eta against the recomputed value.
    EtaParams(double eta, const BigInt& q) : EtaParams(eta) {
        if (!q_ || *q_ != q) throw PreconditionError("EtaParams: q_eta does not equal lcm(1..floor(eta^-2))");
    }

    /// eta = K^{-1/2} with eta^2 = 1/K held exactly.
    static EtaParams from_inverse_square(std::int64_t k) {
        if (k < 1) throw PreconditionError("EtaParams: K must be >= 1");
        return EtaParams(1.0 / std::sqrt(static_cast<double>(k)));
    }

    double eta() const { return eta_; }
    /// eta^2, exactly 1/K when eta^-2 is an integer.
    double eta_sq() const { return exact_ ? 1.0 / static_cast<double>(k_) : eta_ * eta_; }
    std::int64_t inv_sq_floor() const { return k_; }
    bool inv_sq_exact() const { return exact_; }
    bool analytic_only() const { return !q_.has_value(); }

    const BigInt& q_eta() const {
        if (!q_) throw PreconditionError("q_eta unavailable: analytic-only regime (floor(eta^-2) > 1e6)");
        return *q_;
    }

    std::optional<std::int64_t> q_small() const {
        if (!q_) return std::nullopt;
        return to_int64(*q_);
    }

    bool arcs_materializable() const { return k_ <= kMaterializableK; }

    /// q_eta as a machine integer, or an error naming the regime.
    std::int64_t q_checked() const {
        if (!arcs_materializable())
            throw PreconditionError("analytic-only regime: floor(eta^-2) = " + std::to_string(k_) +
                                    " exceeds the desk cap " + std::to_string(kMaterializableK));
        return *q_small();
    }

    /// 1/(eta^2 mu^2)
    double major_radius(double mu) const { return 1.0 / (eta_sq() * mu * mu); }

private:
    double eta_ = 1.0;
    std::int64_t k_ = 1;
    bool exact_ = false;
    std::optional<BigInt> q_;
};

// ---------------------------------------------------------------------------
// Arc systems

/// Union over q <= eta^-2 and 0 <= a < q^2 of |alpha - a/q^2| <= 1/(eta^2 mu^2).
/// A degenerate (full-circle) result is reported through ArcSystem::is_full().
inline ArcSystem major_arcs(const EtaParams& eta, double mu) {
    if (!(mu > 0.0)) throw PreconditionError("major_arcs: mu must be positive");
    const double r = eta.major_radius(mu);
    if (r >= 0.5) return ArcSystem::full();
    const std::int64_t kk = eta.inv_sq_floor();
    const double count = static_cast<double>(kk) * (kk + 1) * (2 * kk + 1) / 6.0;
    if (count > 4e6) throw PreconditionError("major_arcs: arc count beyond desk scale");
    std::vector<Arc> arcs;
    arcs.reserve(static_cast<std::size_t>(count));
    for (std::int64_t q = 1; q <= kk; ++q) {
        const std::int64_t q2 = q * q;
        for (std::int64_t a = 0; a < q2; ++a) {
            // repeated centers (a/q^2 not in lowest terms) merge on normalization
            const double c = static_cast<double>(a) / static_cast<double>(q2);
            arcs.push_back({c - r, c + r});
        }
    }
    return ArcSystem(std::move(arcs)).normalized();
}

/// Radii of Omega_{eta,lambda,mu}: eta^2/lambda^2 <= |alpha - a/q_eta^2| <= 1/(eta^2 mu^2).
struct AnnulusRadii {
    double inner = 0.0;
    double outer = 0.0;
};

inline AnnulusRadii annulus_radii(const EtaParams& eta, std::int64_t lambda, std::int64_t mu) {
    if (lambda < 1 || mu < 1) throw PreconditionError("annuli: lambda, mu must be >= 1");
    const double inner = eta.eta_sq() / (static_cast<double>(lambda) * static_cast<double>(lambda));
    const double outer = eta.major_radius(static_cast<double>(mu));
    bool empty;
    if (eta.inv_sq_exact()) {
        // eta^4 mu^2 >= lambda^2  <=>  mu >= K lambda
        empty = static_cast<__int128>(mu) >= static_cast<__int128>(eta.inv_sq_floor()) * lambda;
    } else {
        empty = !(inner < outer);
    }
    if (empty) throw PreconditionError("empty annulus: eta^4 mu^2 >= lambda^2");
    return {inner, outer};
}

/// Omega_{eta,lambda,mu} as a normalized arc system (q_eta^2 centers).
inline ArcSystem annuli(const EtaParams& eta, std::int64_t lambda, std::int64_t mu) {
    const AnnulusRadii r = annulus_radii(eta, lambda, mu);
    const std::int64_t q = eta.q_checked();
    const std::int64_t Q = q * q;
    if (r.outer > 0.5 / static_cast<double>(Q))
        throw PreconditionError("annuli overlap: 1/(eta^2 mu^2) > 1/(2 q_eta^2)");
    std::vector<Arc> arcs;
    arcs.reserve(static_cast<std::size_t>(2 * Q));
    for (std::int64_t a = 0; a < Q; ++a) {
        const double c = static_cast<double>(a) / static_cast<double>(Q);
        arcs.push_back({c - r.outer, c - r.inner});
        arcs.push_back({c + r.inner, c + r.outer});
    }
    return ArcSystem(std::move(arcs)).normalized();
}

// ---------------------------------------------------------------------------
// Grid scans

/// Largest divisor of g not exceeding 2^16.
inline std::uint64_t grid_block(std::uint64_t g) {
    for (std::uint64_t b = std::min<std::uint64_t>(g, 65536); b > 1; --b)
        if (g % b == 0) return b;
    return 1;
}

/// Default scan grid: max(10 mu^2, 1e6) rounded up to a multiple of 2^16.
inline std::uint64_t default_grid(double mu) {
    const double want = std::max(10.0 * mu * mu, 1e6);
    const auto g = static_cast<std::uint64_t>(std::ceil(want));
    return (g + 65535) / 65536 * 65536;
}

/// Calls visit(k, sum_{t in ts} e(t^2 k / G)) for k = 0..G-1.  The grid is
/// factored as G = P*B with B <= 2^16, so that for each residue p < P the B
/// values at k = p + P*b come from one length-B FFT.
inline void for_each_grid_square_sum(const std::vector<std::int64_t>& ts, std::uint64_t G,
                                     const std::function<void(std::uint64_t, cplx)>& visit) {
    if (G == 0) throw PreconditionError("grid size must be positive");
    const std::uint64_t B = grid_block(G);
    const std::uint64_t P = G / B;
    std::vector<std::uint64_t> t2_mod_g(ts.size()), t2_mod_b(ts.size());
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const auto s = static_cast<unsigned __int128>(ts[i]) * static_cast<unsigned __int128>(ts[i]);
        t2_mod_g[i] = static_cast<std::uint64_t>(s % G);
        t2_mod_b[i] = static_cast<std::uint64_t>(s % B);
    }
    fft::Plan plan(B, fft::Direction::Backward);
    auto buf = plan.buffer();
    const double inv_g = 1.0 / static_cast<double>(G);
    for (std::uint64_t p = 0; p < P; ++p) {
        std::fill(buf.begin(), buf.end(), cplx{});
        for (std::size_t i = 0; i < ts.size(); ++i) {
            const auto e = static_cast<std::uint64_t>(
                (static_cast<unsigned __int128>(t2_mod_g[i]) * p) % G);
            buf[t2_mod_b[i]] += cis_turns(static_cast<double>(e) * inv_g);
        }
        plan.execute();
        for (std::uint64_t b = 0; b < B; ++b) visit(p + P * b, buf[b]);
    }
}

/// Marks grid points k/G lying in a normalized arc system (closed arcs).
inline std::vector<bool> grid_membership(const ArcSystem& arcs, std::uint64_t G) {
    if (!arcs.is_normalized()) throw PreconditionError("grid_membership: arcs must be normalized");
    std::vector<bool> in(G, false);
    const double g = static_cast<double>(G);
    for (const Arc& a : arcs.arcs()) {
        auto k0 = static_cast<std::int64_t>(std::ceil(a.lo * g - 1e-9));
        auto k1 = static_cast<std::int64_t>(std::floor(a.hi * g + 1e-9));
        k0 = std::max<std::int64_t>(k0, 0);
        for (std::int64_t k = k0; k <= k1; ++k) in[static_cast<std::size_t>(k % static_cast<std::int64_t>(G))] = true;
    }
    return in;
}

struct MinorArcScan {
    double sup = 0.0;
    double argmax = 0.0;
    std::uint64_t grid_size = 0;
    std::uint64_t minor_points = 0;
    double eta = 0.0;
    double lambda = 0.0;
    double mu = 0.0;
};

/// max |(1/mu) sum_{t in ts} e(t^2 alpha)| over grid points outside the major arcs.
inline MinorArcScan minor_arc_scan(const std::vector<std::int64_t>& ts, double mu, const EtaParams& eta,
                                   std::uint64_t G) {
    const ArcSystem major = major_arcs(eta, mu);
    if (major.is_full()) throw ResolutionError("no minor arc points at this resolution");
    const auto inside = grid_membership(major, G);
    MinorArcScan out;
    out.grid_size = G;
    out.eta = eta.eta();
    out.mu = mu;
    const double norm = 1.0 / mu;
    for_each_grid_square_sum(ts, G, [&](std::uint64_t k, cplx s) {
        if (inside[k]) return;
        ++out.minor_points;
        const double v = std::abs(s) * norm;
        if (v > out.sup) {
            out.sup = v;
            out.argmax = static_cast<double>(k) / static_cast<double>(G);
        }
    });
    if (out.minor_points == 0) throw ResolutionError("no minor arc points at this resolution");
    return out;
}

inline MinorArcScan minor_arc_sup(const WeylParams& p, const EtaParams& eta, std::uint64_t grid_size = 0) {
    if (p.q != 1) throw PreconditionError("minor_arc_sup: params must have q = 1");
    const double mu = static_cast<double>(p.mu);
    if (grid_size == 0) grid_size = default_grid(mu);
    if (static_cast<double>(grid_size) < 10.0 * mu * mu)
        throw ResolutionError("grid_size must be >= 10 mu^2");
    auto r = minor_arc_scan(detail::t_range(p.lambda, p.lambda + p.mu), mu, eta, grid_size);
    r.lambda = static_cast<double>(p.lambda);
    return r;
}

/// Same scan for real lambda, mu (perturbed sums).
inline MinorArcScan minor_arc_sup_real(double lambda, double mu, const EtaParams& eta, std::uint64_t grid_size = 0) {
    if (!(mu > 0.0) || !(lambda >= 0.0)) throw PreconditionError("minor_arc_sup_real: need lambda >= 0, mu > 0");
    if (grid_size == 0) grid_size = default_grid(mu);
    const auto lo = static_cast<std::int64_t>(std::floor(lambda));
    const auto hi = static_cast<std::int64_t>(std::floor(lambda + mu));
    auto r = minor_arc_scan(detail::t_range(lo, hi), mu, eta, grid_size);
    r.lambda = lambda;
    return r;
}

}  // namespace sqdf
