#pragma once

// The f = f1 + f2 + f3 decomposition, the Lambda_q bookkeeping around it,
// the two-branch dichotomy test and the scale iteration.
//
// All Lambda_q values of smoothed functions are computed on the transform
// side: with H the periodized Fejer hat (a triangle train in u = q^2 alpha),
//     Lambda_q(f*k_a, f*k_b) = int |f^|^2 K_a K_b S_{lambda,mu,q},
// which periodic_lambda evaluates exactly from the autocorrelation of f.

#include "sqdf/calibration.hpp"
#include "sqdf/counting.hpp"
#include "sqdf/error.hpp"
#include "sqdf/fourier.hpp"
#include "sqdf/mollifier.hpp"
#include "sqdf/periodic.hpp"
#include "sqdf/weyl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sqdf {

/// One asserted or reported inequality with both sides.
struct Inequality {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool holds = false;
    /// true when the inequality only holds in the asymptotic regime
    bool asymptotic = false;
};

inline Inequality check_le(std::string name, double lhs, double rhs, bool asymptotic = false) {
    return {std::move(name), lhs, rhs, lhs <= rhs, asymptotic};
}

inline Inequality check_ge(std::string name, double lhs, double rhs, bool asymptotic = false) {
    return {std::move(name), lhs, rhs, lhs >= rhs, asymptotic};
}

inline std::string describe_failures(const std::vector<Inequality>& v) {
    std::ostringstream os;
    bool first = true;
    for (const auto& c : v) {
        if (c.holds) continue;
        if (!first) os << "; ";
        first = false;
        os << c.name << " violated (" << c.lhs << " vs " << c.rhs << ")";
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// epsilon regime

/// Default desk-scale eta when eta_eps cannot be materialized.
inline constexpr double kDeskEta = 0.5;

struct EpsilonRegime {
    double epsilon = 0.1;
    double c_eta = 1.0;
    double mu_factor = 10.0;
    double n_factor = 100.0;
    double c_strength = 0.25;
    std::optional<double> eta_override;
    ProfileKind profile = ProfileKind::Fejer;

    static EpsilonRegime make(double eps, const CalibrationConstants& c = frozen_calibration()) {
        if (!(eps > 0.0) || !(eps <= 1.0)) throw PreconditionError("EpsilonRegime: epsilon must lie in (0, 1]");
        EpsilonRegime r;
        r.epsilon = eps;
        r.c_eta = c.c_eta;
        r.c_strength = c.c_strength;
        return r;
    }

    /// exp(-c_eta eps^-1 log eps^-1); may underflow to 0.
    double eta_eps() const { return std::exp(-c_eta / epsilon * std::log(1.0 / epsilon)); }

    /// floor(eta_eps^-2), or nullopt when it does not fit.
    std::optional<std::int64_t> eta_eps_inv_sq() const {
        const double e = eta_eps();
        if (!(e > 0.0)) return std::nullopt;
        const double inv = 1.0 / (e * e);
        if (!(inv < 9e15)) return std::nullopt;
        return static_cast<std::int64_t>(std::floor(inv * (1.0 + 1e-12)));
    }

    /// q_eps is materializable only when floor(eta_eps^-2) is within the arc cap.
    bool analytic_only() const {
        const auto k = eta_eps_inv_sq();
        return !k || *k > EtaParams::kMaterializableK;
    }

    /// q_eps as a big integer when floor(eta_eps^-2) <= 1e6.
    std::optional<BigInt> q_eps() const {
        const auto k = eta_eps_inv_sq();
        if (!k || *k > 1'000'000) return std::nullopt;
        return lcm_up_to(std::max<std::int64_t>(*k, 1));
    }

    bool surrogate() const { return eta_override.has_value() || analytic_only(); }

    EtaParams working_eta() const {
        if (eta_override) return EtaParams(*eta_override);
        if (!analytic_only()) return EtaParams(eta_eps());
        return EtaParams(kDeskEta);
    }
};

// ---------------------------------------------------------------------------
// decomposition

struct Decomposition {
    IntegerFunction f;  // the input, zero-extended to the smoothing window
    IntegerFunction f1;
    IntegerFunction f2;
    IntegerFunction f3;
    double eta = 0.0;
    BigInt q = 1;
    std::int64_t q_small = 1;
    double l1 = 0.0;
    double l2 = 0.0;
    std::int64_t lambda = 1;
    std::int64_t mu = 1;
    std::int64_t n = 0;  // f supported on [1, n]
    std::int64_t pad = 0;
    ProfileKind profile = ProfileKind::Fejer;
    IntegerFunction original;
    double identity_residual = 0.0;
    double mass_f = 0.0;
    double mass_f1 = 0.0;
    /// ||f||_1 * mass(psi_{q,L1}) - sum f1 over the window (f >= 0)
    double mass_deficit = 0.0;
};

inline Decomposition decompose(const IntegerFunction& f, const EtaParams& eta, std::int64_t lambda, std::int64_t mu,
                               const CutoffProfile& profile, std::int64_t pad = -1) {
    if (lambda < 1 || mu < 1) throw PreconditionError("decompose: lambda, mu must be >= 1");
    if (mu > lambda) throw PreconditionError("decompose: mu <= lambda violated");
    const std::int64_t q = eta.q_checked();
    Decomposition d;
    d.eta = eta.eta();
    d.q = BigInt(q);
    d.q_small = q;
    d.l1 = static_cast<double>(lambda) / eta.eta();
    d.l2 = eta.eta() * static_cast<double>(mu);
    d.lambda = lambda;
    d.mu = mu;
    d.profile = profile.kind();
    if (!(d.l2 * d.l2 > 2.0 * static_cast<double>(q) * static_cast<double>(q))) {
        std::ostringstream os;
        os << "decompose: L2^2 > 2 q^2 violated (eta=" << d.eta << ", lambda=" << lambda << ", mu=" << mu
           << ", q=" << q << ", L1=" << d.l1 << ", L2=" << d.l2 << ")";
        throw PreconditionError(os.str());
    }
    d.original = f;
    d.n = f.is_zero_repr() ? 0 : f.end() - 1;
    if (f.is_zero_repr()) return d;

    const DiscreteMollifier m1(profile, q, d.l1);
    const DiscreteMollifier m2(profile, q, d.l2);
    d.pad = pad >= 0 ? pad : std::max(default_smoothing_pad(m1), default_smoothing_pad(m2));
    d.f1 = smooth_convolve(f, m1, d.pad);
    const IntegerFunction g2 = smooth_convolve(f, m2, d.pad);
    const IntegerFunction ext = combine(f, 1.0, IntegerFunction(d.f1.start(), std::vector<double>(d.f1.size(), 0.0)), 0.0);
    d.f = ext;
    d.f2 = ext - g2;
    d.f3 = g2 - d.f1;
    const IntegerFunction recon = d.f1 + d.f2 + d.f3;
    for (std::int64_t n = ext.start(); n < ext.end(); ++n)
        d.identity_residual = std::max(d.identity_residual, std::abs(ext(n) - recon(n)));
    d.mass_f = f.sum();
    d.mass_f1 = d.f1.sum();
    d.mass_deficit = d.mass_f * m1.untruncated_mass() - d.mass_f1;
    return d;
}

// ---------------------------------------------------------------------------
// Lambda_q bookkeeping

struct LambdaTerms {
    double ff = 0.0;    // Lambda(f, f)
    double f1f1 = 0.0;  // Lambda(f1, f1)
    double f2f1 = 0.0;  // Lambda(f2, f1)
    double ff2 = 0.0;   // Lambda(f, f2)
    double f3f1 = 0.0;  // Lambda(f3, f1)
    double ff3 = 0.0;   // Lambda(f, f3)
    double majorant = 0.0;  // int |f^|^2 |H2 - H1|
    double r0 = 0.0;        // sum f^2
};

namespace detail {

struct HatPair {
    PeriodicWeight h1;
    PeriodicWeight h2;
    std::int64_t Q = 1;
};

inline HatPair fejer_hats(const Decomposition& d) {
    if (d.profile != ProfileKind::Fejer)
        throw PreconditionError("exact Lambda terms require the FEJER profile");
    const std::int64_t Q = d.q_small * d.q_small;
    const double Qd = static_cast<double>(Q);
    return {PeriodicWeight::triangle_train(Qd / (d.l1 * d.l1)), PeriodicWeight::triangle_train(Qd / (d.l2 * d.l2)), Q};
}

inline void check_params(const Decomposition& d, const WeylParams& p) {
    if (p.q != d.q_small)
        throw PreconditionError("params.q = q_eta violated (params.q=" + std::to_string(p.q) +
                                ", q_eta=" + std::to_string(d.q_small) + ")");
}

}  // namespace detail

inline LambdaTerms lambda_terms(const Decomposition& d, const WeylParams& p) {
    detail::check_params(d, p);
    LambdaTerms out;
    if (d.original.is_zero_repr()) return out;
    const auto hats = detail::fejer_hats(d);
    const auto one = PeriodicWeight::constant(1.0);
    const auto r = autocorrelation(d.original);
    const auto ts = p.admissible_t();
    const double sc = p.scale();
    auto lam = [&](const PeriodicWeight& w) { return periodic_lambda(r, ts, w, hats.Q, sc); };
    const auto diff = hats.h2 - hats.h1;
    out.ff = lam(one);
    out.f1f1 = lam(hats.h1 * hats.h1);
    out.f2f1 = lam((one - hats.h2) * hats.h1);
    out.ff2 = lam(one - hats.h2);
    out.f3f1 = lam(diff * hats.h1);
    out.ff3 = lam(diff);
    out.majorant = periodic_energy(r, diff.abs(), hats.Q);
    out.r0 = r(0);
    return out;
}

/// Lambda_q(f1, f1), exact for the untruncated kernel.
inline double main_term(const Decomposition& d, const WeylParams& p) {
    detail::check_params(d, p);
    if (d.original.is_zero_repr()) return 0.0;
    const auto hats = detail::fejer_hats(d);
    return periodic_lambda(autocorrelation(d.original), p.admissible_t(), hats.h1 * hats.h1, hats.Q, p.scale());
}

/// max over admissible t of the translation flatness of psi_{q,L1}.
inline double max_translation_flatness(const DiscreteMollifier& m, const std::vector<std::int64_t>& ts) {
    double worst = 0.0;
    for (auto t : ts) {
        const auto f = translation_flatness(m, t);
        worst = std::max(worst, f.value + f.tail_bound);
    }
    return worst;
}

struct MainTermReport {
    double exact = 0.0;
    double windowed = 0.0;
    double window_bound = 0.0;
    double delta = 0.0;
    double target = 0.0;  // (delta^2 - eps/2) N
    double flatness = 0.0;
    std::vector<Inequality> preconditions;
    Inequality windowed_agreement;
    Inequality inequality;
    bool preconditions_hold = true;
};

inline MainTermReport main_term_report(const Decomposition& d, const WeylParams& p, double eps,
                                       const CalibrationConstants& cal = frozen_calibration()) {
    detail::check_params(d, p);
    if (p.lambda + p.mu > static_cast<std::int64_t>(std::floor(2.0 * d.eta * d.l1 + 1e-9)))
        throw PreconditionError("lambda + mu <= 2 eta L1 violated");
    MainTermReport r;
    const auto n = static_cast<double>(std::max<std::int64_t>(d.n, 1));
    r.delta = d.mass_f / n;
    r.exact = main_term(d, p);
    r.target = (r.delta * r.delta - eps / 2.0) * n;
    r.inequality = check_ge("Lambda_q(f1,f1) >= (delta^2 - eps/2) N", r.exact, r.target);
    if (!d.original.is_zero_repr()) {
        r.windowed = lambda_direct(d.f1, d.f1, p, false).value;
        const bool nonneg = d.original.values_within(0.0, std::numeric_limits<double>::infinity());
        const DiscreteMollifier m1(make_profile(d.profile), d.q_small, d.l1);
        const double sup_f = d.original.max_abs() * m1.untruncated_mass();
        r.window_bound = nonneg ? p.scale() * static_cast<double>(p.admissible_t().size()) * 2.0 * sup_f *
                                      std::max(d.mass_deficit, 0.0) + 1e-9 * (1.0 + std::abs(r.exact))
                                : std::numeric_limits<double>::infinity();
        r.flatness = max_translation_flatness(m1, p.admissible_t());
    }
    r.windowed_agreement = check_le("|windowed - exact| <= window bound", std::abs(r.windowed - r.exact), r.window_bound);
    r.preconditions.push_back(check_ge("N >= 100 L1", n, 100.0 * d.l1));
    r.preconditions.push_back(check_le("eps <= delta^2", eps, r.delta * r.delta));
    r.preconditions.push_back(check_le("c_flat eta^2 <= eps/4", cal.c_flat * d.eta * d.eta, eps / 4.0, true));
    r.preconditions.push_back(check_le("flatness <= c_flat eta^2", r.flatness, cal.c_flat * d.eta * d.eta));
    for (const auto& c : r.preconditions) r.preconditions_hold = r.preconditions_hold && c.holds;
    return r;
}

/// |Lambda_q(f2,f1) + Lambda_q(f,f2)|
inline double error_term_lambda(const Decomposition& d, const WeylParams& p) {
    const auto t = lambda_terms(d, p);
    return std::abs(t.f2f1 + t.ff2);
}

struct ErrorTermSup {
    double sup = 0.0;         // on the refined grid
    double coarse_sup = 0.0;  // on the requested grid
    double argmax = 0.0;
    std::uint64_t grid = 0;
    std::int64_t q_prime = 1;
    double l2_prime = 0.0;
    double eta = 0.0;
    double eta_prime = 0.0;

    double bound(double c1) const { return 2.0 * c1 * eta_prime / eta; }
};

namespace detail {

inline std::pair<double, double> error_sup_scan(const std::vector<std::int64_t>& ts, double scale,
                                                const DiscreteMollifier& m, std::uint64_t G) {
    const std::int64_t Q = m.Q();
    const double radius = 1.0 / (m.L() * m.L());
    double best = 0.0, arg = 0.0;
    for_each_grid_square_sum(ts, G, [&](std::uint64_t k, cplx s) {
        const double a = static_cast<double>(k) / static_cast<double>(G);
        double v = std::abs(s) * scale;
        if (v <= best) return;
        const double dist = std::abs(phase_frac(Q, a)) / static_cast<double>(Q);
        if (dist <= radius) v *= std::abs(1.0 - m.hat(TorusPoint(a)));
        if (v > best) {
            best = v;
            arg = a;
        }
    });
    return {best, arg};
}

}  // namespace detail

/// Grid sup of |1 - psi^_{q',L2'}(alpha)| |S_{lambda,mu,q}(alpha)| with
/// q' = q_{eta'}, L2' = eta' mu; rerun on the doubled grid as a stability check.
inline ErrorTermSup error_term_sup(const EtaParams& eta, const EtaParams& eta_prime, const WeylParams& p,
                                   const CutoffProfile& profile, std::uint64_t grid = 0) {
    if (!(eta_prime.eta() < eta.eta())) throw PreconditionError("error_term_sup: eta' < eta violated");
    ErrorTermSup r;
    r.eta = eta.eta();
    r.eta_prime = eta_prime.eta();
    r.q_prime = eta_prime.q_checked();
    r.l2_prime = eta_prime.eta() * static_cast<double>(p.mu);
    const double mu2 = static_cast<double>(p.mu) * static_cast<double>(p.mu);
    if (grid == 0) grid = default_grid(static_cast<double>(p.mu));
    if (static_cast<double>(grid) < 10.0 * std::max(mu2, r.l2_prime * r.l2_prime))
        throw ResolutionError("error_term_sup: grid must resolve 10 max(mu^2, L2'^2)");
    const DiscreteMollifier m(profile, r.q_prime, r.l2_prime);
    if (!(r.l2_prime * r.l2_prime > 2.0 * static_cast<double>(m.Q())))
        throw PreconditionError("error_term_sup: L2'^2 > 2 q'^2 violated (L2'=" + std::to_string(r.l2_prime) +
                                ", q'=" + std::to_string(r.q_prime) + ")");
    const auto ts = p.admissible_t();
    const auto coarse = detail::error_sup_scan(ts, p.scale(), m, grid);
    const auto fine = detail::error_sup_scan(ts, p.scale(), m, 2 * grid);
    r.coarse_sup = coarse.first;
    r.sup = fine.first;
    r.argmax = fine.second;
    r.grid = grid;
    const double scale = std::max(coarse.first, fine.first);
    if (scale > 0.0 && std::abs(fine.first - coarse.first) > 0.1 * scale)
        throw ResolutionError("error_term_sup: grid too coarse (refinement changed the sup by more than 10%)");
    return r;
}

// ---------------------------------------------------------------------------
// structured energy

struct StructuredEnergy {
    double smooth = 0.0;   // int |f^|^2 |H2 - H1|
    double annulus = 0.0;  // int_Omega |f^|^2
    double hole = 0.0;     // int_{dist < inner} |f^|^2 |H2 - H1|
    double r0 = 0.0;
    double n = 0.0;
    double epsilon = 0.0;
    double inner = 0.0;
    double outer = 0.0;
    std::int64_t q = 1;
    std::optional<double> arc_cross_check;
    Inequality split;        // smooth <= annulus + hole
    Inequality contract;     // smooth <= annulus + (eps/10) r(0)
    Inequality implication;  // smooth >= eps N / 5  implies  annulus >= eps N / 10
};

namespace detail {

/// Annulus (or hole) indicator in u = Q alpha coordinates.
inline PeriodicWeight annulus_weight(double lo, double hi, std::int64_t Q) {
    const double Qd = static_cast<double>(Q);
    const std::vector<Arc> iv{{lo * Qd, hi * Qd}, {1.0 - hi * Qd, 1.0 - lo * Qd}};
    return PeriodicWeight::indicator(iv);
}

inline double annulus_energy(const IntegerFunction& r, const EtaParams& eta, std::int64_t lambda, std::int64_t mu) {
    const auto radii = annulus_radii(eta, lambda, mu);
    const std::int64_t q = eta.q_checked();
    const std::int64_t Q = q * q;
    if (radii.outer > 0.5 / static_cast<double>(Q))
        throw PreconditionError("annuli overlap: 1/(eta^2 mu^2) > 1/(2 q_eta^2)");
    return periodic_energy(r, annulus_weight(radii.inner, radii.outer, Q), Q);
}

inline StructuredEnergy structured_energy_from(const IntegerFunction& r, const IntegerFunction* f, double n,
                                               double eps, const EtaParams& eta, std::int64_t lambda,
                                               std::int64_t mu, bool cross_check) {
    const std::int64_t q = eta.q_checked();
    const std::int64_t Q = q * q;
    const auto radii = annulus_radii(eta, lambda, mu);
    if (radii.outer > 0.5 / static_cast<double>(Q))
        throw PreconditionError("annuli overlap: 1/(eta^2 mu^2) > 1/(2 q_eta^2)");
    StructuredEnergy s;
    s.q = q;
    s.n = n;
    s.epsilon = eps;
    s.inner = radii.inner;
    s.outer = radii.outer;
    const double Qd = static_cast<double>(Q);
    const double l1 = static_cast<double>(lambda) / eta.eta();
    const double l2 = eta.eta() * static_cast<double>(mu);
    const auto diff = (PeriodicWeight::triangle_train(Qd / (l2 * l2)) - PeriodicWeight::triangle_train(Qd / (l1 * l1))).abs();
    if (!r.is_zero_repr()) {
        s.r0 = r(0);
        s.smooth = periodic_energy(r, diff, Q);
        s.annulus = periodic_energy(r, annulus_weight(radii.inner, radii.outer, Q), Q);
        s.hole = periodic_energy(r, diff * annulus_weight(0.0, radii.inner, Q), Q);
        if (cross_check && f != nullptr) s.arc_cross_check = integrate_energy(*f, annuli(eta, lambda, mu));
    }
    const double tol = 1e-9 * (1.0 + s.r0);
    s.split = check_le("smooth <= annulus + hole", s.smooth, s.annulus + s.hole + tol);
    s.contract = check_le("smooth <= annulus + (eps/10) r(0)", s.smooth, s.annulus + eps / 10.0 * s.r0, true);
    const bool premise = s.smooth >= eps * n / 5.0;
    s.implication = {"smooth >= eps N/5 implies annulus >= eps N/10", s.annulus, eps * n / 10.0,
                     !premise || s.annulus >= eps * n / 10.0, true};
    return s;
}

}  // namespace detail

inline StructuredEnergy structured_energy(const IndicatorSet& a, const EpsilonRegime& regime, const EtaParams& eta,
                                          std::int64_t lambda, std::int64_t mu, bool cross_check = false) {
    if (regime.profile != ProfileKind::Fejer)
        throw PreconditionError("structured_energy: exact integration requires the FEJER profile");
    const auto f = a.indicator();
    const auto r = autocorrelation(f);
    return detail::structured_energy_from(r, &f, static_cast<double>(a.n()), regime.epsilon, eta, lambda, mu,
                                          cross_check);
}

// ---------------------------------------------------------------------------
// dichotomy

enum class Branch { Random, Structured };

inline const char* to_string(Branch b) { return b == Branch::Random ? "RANDOM" : "STRUCTURED"; }

struct DichotomyOptions {
    bool enforce_preconditions = true;
    bool cross_check_arcs = false;
};

struct DichotomyOutcome {
    Branch branch = Branch::Structured;
    std::optional<std::int64_t> witness_t;
    std::optional<std::int64_t> witness_count;
    std::optional<double> annulus_energy;
    double threshold_used = 0.0;
    bool pass = false;

    double delta = 0.0;
    double epsilon = 0.0;
    double eta = 0.0;
    bool eta_surrogate = false;
    std::int64_t q = 1;
    std::int64_t lambda = 1;
    std::int64_t mu = 1;
    std::int64_t n = 0;
    std::vector<Inequality> preconditions;
    std::map<std::int64_t, std::int64_t> counts;  // t with q | t
    std::int64_t strengthened_q = 0;              // #{q | t : count > (delta^2 - eps) N}
    std::int64_t strengthened_all = 0;            // same over every t in the range
    Inequality strength;                          // strengthened_q >= (c eps / q) mu
    std::optional<StructuredEnergy> structured;
};

namespace detail {

inline DichotomyOutcome dichotomy_impl(const IndicatorSet& a, const EpsilonRegime& regime, std::int64_t lambda,
                                       std::int64_t mu, const DichotomyOptions& opt, const IntegerFunction* r_cache) {
    if (lambda < 1 || mu < 1) throw PreconditionError("dichotomy_test: lambda, mu must be >= 1");
    if (mu > lambda) throw PreconditionError("dichotomy_test: mu <= lambda violated");
    const EtaParams eta = regime.working_eta();
    const std::int64_t q = eta.q_checked();
    DichotomyOutcome o;
    o.n = a.n();
    o.delta = a.density();
    o.epsilon = regime.epsilon;
    o.eta = eta.eta();
    o.eta_surrogate = regime.surrogate();
    o.q = q;
    o.lambda = lambda;
    o.mu = mu;
    const double n = static_cast<double>(a.n());
    const double inv_eta = 1.0 / eta.eta();
    o.preconditions.push_back(check_le("eps <= delta^2", regime.epsilon, o.delta * o.delta));
    o.preconditions.push_back(
        check_ge("mu >= mu_factor q / eta", static_cast<double>(mu), regime.mu_factor * static_cast<double>(q) * inv_eta));
    o.preconditions.push_back(check_ge("N >= n_factor lambda^2 / eta^2", n,
                                       regime.n_factor * static_cast<double>(lambda) * static_cast<double>(lambda) *
                                           inv_eta * inv_eta));
    if (opt.enforce_preconditions) {
        const std::string why = describe_failures(o.preconditions);
        if (!why.empty()) throw PreconditionError("dichotomy_test: " + why);
    }

    const double threshold = (o.delta * o.delta - regime.epsilon) * n;
    for (std::int64_t t = lambda + 1; t <= lambda + mu; ++t) {
        const std::int64_t c = intersect_count(a, t);
        const bool hit = static_cast<double>(c) > threshold;
        if (hit) ++o.strengthened_all;
        if (t % q != 0) continue;
        o.counts[t] = c;
        if (hit) {
            ++o.strengthened_q;
            if (!o.witness_t) {
                o.witness_t = t;
                o.witness_count = c;
            }
        }
    }
    o.strength = check_ge("#{t : count > (delta^2 - eps) N} >= (c eps / q) mu", static_cast<double>(o.strengthened_q),
                          regime.c_strength * regime.epsilon / static_cast<double>(q) * static_cast<double>(mu), true);

    if (o.witness_t) {
        o.branch = Branch::Random;
        o.threshold_used = threshold;
        o.pass = true;
        return o;
    }
    o.branch = Branch::Structured;
    o.threshold_used = regime.epsilon * n / 10.0;
    IntegerFunction f = a.indicator();
    IntegerFunction r_local;
    const IntegerFunction* r = r_cache;
    if (r == nullptr) {
        r_local = autocorrelation(f);
        r = &r_local;
    }
    o.structured = structured_energy_from(*r, &f, n, regime.epsilon, eta, lambda, mu, opt.cross_check_arcs);
    o.annulus_energy = o.structured->annulus;
    o.pass = o.structured->annulus >= o.threshold_used;
    return o;
}

}  // namespace detail

inline DichotomyOutcome dichotomy_test(const IndicatorSet& a, const EpsilonRegime& regime, std::int64_t lambda,
                                       std::int64_t mu, const DichotomyOptions& opt = {}) {
    if (regime.profile != ProfileKind::Fejer)
        throw PreconditionError("dichotomy_test: exact energy integration requires the FEJER profile");
    return detail::dichotomy_impl(a, regime, lambda, mu, opt, nullptr);
}

// ---------------------------------------------------------------------------
// scale iteration

struct Witness {
    std::int64_t t = 0;
    std::int64_t count = 0;
    std::size_t scale_index = 0;
};

struct ScaleIteration {
    std::optional<Witness> witness;
    std::vector<std::int64_t> scales;
    std::vector<double> energies;
    std::vector<DichotomyOutcome> outcomes;
    double energy_sum = 0.0;
    double ceiling = 0.0;  // r(0) = |A|
    Inequality plancherel;
    bool disjoint_exact = true;
    double max_overlap_measure = 0.0;  // double-precision cross-check
    std::int64_t j_cap = 0;
};

/// Pairwise disjointness (up to shared boundary points) of the annuli of a
/// scale chain, decided exactly when eta^-2 is an integer.
inline bool annuli_disjoint_exact(const EtaParams& eta, const std::vector<std::int64_t>& lambdas,
                                  const std::vector<std::int64_t>& mus) {
    const std::size_t J = lambdas.size();
    for (std::size_t j = 0; j < J; ++j)
        for (std::size_t k = 0; k < J; ++k) {
            if (j == k) continue;
            // annulus k lies inside the hole of j when outer_k <= inner_j, or the reverse
            bool apart;
            if (eta.inv_sq_exact()) {
                const auto K = static_cast<__int128>(eta.inv_sq_floor());
                auto inside = [&](std::size_t a, std::size_t b) {
                    // K / mu_b^2 <= 1 / (K lambda_a^2)
                    return K * K * static_cast<__int128>(lambdas[a]) * lambdas[a] <=
                           static_cast<__int128>(mus[b]) * mus[b];
                };
                apart = inside(j, k) || inside(k, j);
            } else {
                const auto rj = annulus_radii(eta, lambdas[j], mus[j]);
                const auto rk = annulus_radii(eta, lambdas[k], mus[k]);
                apart = rk.outer <= rj.inner || rj.outer <= rk.inner;
            }
            if (!apart) return false;
        }
    return true;
}

inline ScaleIteration scale_iteration(const IndicatorSet& a, const EpsilonRegime& regime, std::int64_t j_max,
                                      const DichotomyOptions& opt = {}) {
    if (j_max < 1) throw PreconditionError("scale_iteration: j_max must be >= 1");
    if (regime.profile != ProfileKind::Fejer)
        throw PreconditionError("scale_iteration: exact energy integration requires the FEJER profile");
    const EtaParams eta = regime.working_eta();
    const std::int64_t q = eta.q_checked();
    ScaleIteration out;
    out.j_cap = std::min<std::int64_t>(j_max, static_cast<std::int64_t>(std::ceil(10.0 / regime.epsilon)) + 1);
    const double n = static_cast<double>(a.n());
    auto fits = [&](std::int64_t l) {
        return 4.0 * regime.n_factor * static_cast<double>(l) * static_cast<double>(l) <= n;
    };
    auto lam = static_cast<std::int64_t>(std::ceil(regime.mu_factor * static_cast<double>(q) / eta.eta() - 1e-9));
    lam = std::max<std::int64_t>(lam, 1);
    while (static_cast<std::int64_t>(out.scales.size()) < out.j_cap && fits(lam)) {
        out.scales.push_back(lam);
        lam = eta.inv_sq_exact() ? lam * eta.inv_sq_floor()
                                 : static_cast<std::int64_t>(std::ceil(static_cast<double>(lam) / eta.eta_sq()));
    }
    if (out.scales.empty()) throw PreconditionError("N too small for one scale");

    const auto f = a.indicator();
    const auto r = autocorrelation(f);
    out.ceiling = r.is_zero_repr() ? 0.0 : r(0);
    for (std::size_t j = 0; j < out.scales.size(); ++j) {
        const std::int64_t l = out.scales[j];
        out.energies.push_back(r.is_zero_repr() ? 0.0 : detail::annulus_energy(r, eta, l, l));
        auto o = detail::dichotomy_impl(a, regime, l, l, opt, &r);
        if (o.branch == Branch::Random && !out.witness) out.witness = Witness{*o.witness_t, *o.witness_count, j};
        out.outcomes.push_back(std::move(o));
    }
    for (double e : out.energies) out.energy_sum += e;
    out.plancherel = check_le("sum_j energy_j <= |A|", out.energy_sum, out.ceiling + 1e-6);
    out.disjoint_exact = annuli_disjoint_exact(eta, out.scales, out.scales);
    for (std::size_t j = 0; j < out.scales.size(); ++j)
        for (std::size_t k = j + 1; k < out.scales.size(); ++k) {
            const double m = intersect(annuli(eta, out.scales[j], out.scales[j]),
                                       annuli(eta, out.scales[k], out.scales[k])).measure();
            out.max_overlap_measure = std::max(out.max_overlap_measure, m);
        }
    return out;
}

// ---------------------------------------------------------------------------
// eta selection

class EtaSelectionError : public Error {
public:
    EtaSelectionError(const std::string& what, std::vector<double> sups) : Error(what), sups(std::move(sups)) {}
    std::vector<double> sups;
};

struct EtaSelection {
    double eta = 0.0;
    double eta_prime = 0.0;
    std::int64_t j = 0;
    std::int64_t j_bound = 0;
    std::vector<double> sups;
    std::int64_t q_used = 1;
    bool q_capped = false;
    double implied_c_prime = std::numeric_limits<double>::quiet_NaN();
    std::vector<Inequality> checks;
};

/// sup over alpha of |psi^_{q2,L2}(alpha) - psi^_{q1,L1}(alpha)| for FEJER,
/// with q1 | q2, computed on the exact piecewise-linear structure.
inline double hat_difference_sup(std::int64_t q1, double l1, std::int64_t q2, double l2) {
    if (q1 < 1 || q2 % q1 != 0) throw PreconditionError("hat_difference_sup: requires q1 | q2");
    const double Q1 = static_cast<double>(q1) * static_cast<double>(q1);
    const double Q2 = static_cast<double>(q2) * static_cast<double>(q2);
    // coordinates u = Q1 alpha: the q2 train has spacing Q1/Q2
    const auto a = PeriodicWeight::triangle_train(Q1 / (l1 * l1));
    const auto b = PeriodicWeight::triangle_train(Q1 / (l2 * l2), Q1 / Q2);
    return (b - a).sup_abs();
}

/// q_eta with floor(eta^-2) capped at the arc materialization limit.
inline std::pair<std::int64_t, bool> capped_q(double eta) {
    const EtaParams e(std::max(eta, 1.0 / std::sqrt(static_cast<double>(EtaParams::kMaterializableK))));
    const bool capped = 1.0 / (eta * eta) >= static_cast<double>(EtaParams::kMaterializableK + 1);
    return {e.q_checked(), capped};
}

inline EtaSelection eta_selection(double eps, std::int64_t mu, double lacunarity,
                                  const CalibrationConstants& cal = frozen_calibration(), bool enforce = true) {
    if (!(eps > 0.0) || !(eps <= 1.0)) throw PreconditionError("eta_selection: 0 < eps <= 1 violated");
    if (mu < 1) throw PreconditionError("eta_selection: mu must be >= 1");
    if (!(lacunarity > 0.0) || !(lacunarity < 1.0)) throw PreconditionError("eta_selection: lacunarity must lie in (0, 1)");
    if (enforce && lacunarity > eps / (40.0 * cal.c1))
        throw PreconditionError("eta_selection: lacunarity <= eps/(40 c1) violated");
    EtaSelection out;
    out.j_bound = static_cast<std::int64_t>(std::ceil(40.0 * cal.c2 / eps));
    const double eta1 = eps / 100.0;
    const double target = eps / 40.0;
    for (std::int64_t j = 1; j <= out.j_bound; ++j) {
        const double ej = eta1 * std::pow(lacunarity, static_cast<double>(j - 1));
        const double ek = ej * lacunarity;
        const auto [qj, cj] = capped_q(ej);
        const auto [qk, ck] = capped_q(ek);
        const double lj = ej * static_cast<double>(mu), lk = ek * static_cast<double>(mu);
        const double Qk = static_cast<double>(qk) * static_cast<double>(qk);
        if (!(lk * lk > 2.0 * Qk)) {
            std::ostringstream os;
            os << "eta_selection: no j found; kernels degenerate (L^2 <= 2 q^2) at j=" << j << " after scanning "
               << out.sups.size() << " sups";
            throw EtaSelectionError(os.str(), out.sups);
        }
        const double s = hat_difference_sup(qj, lj, qk, lk);
        out.sups.push_back(s);
        if (s <= target) {
            out.eta = ej;
            out.eta_prime = ek;
            out.j = j;
            out.q_used = qk;
            out.q_capped = cj || ck;
            if (eps < 1.0) out.implied_c_prime = -std::log(ej) * eps / std::log(1.0 / eps);
            out.checks.push_back(check_le("j <= ceil(40 c2 / eps)", static_cast<double>(j), static_cast<double>(out.j_bound)));
            out.checks.push_back(check_le("eta << eps (eta <= eps/100)", ej, eps / 100.0));
            const double eta_eps = std::exp(-cal.c_eta / eps * std::log(1.0 / eps));
            out.checks.push_back(check_le("eta_eps <= eps eta", eta_eps, eps * ej, true));
            return out;
        }
    }
    std::ostringstream os;
    os << "eta_selection: no j <= " << out.j_bound << " with sup <= eps/40 = " << target;
    throw EtaSelectionError(os.str(), out.sups);
}

}  // namespace sqdf
