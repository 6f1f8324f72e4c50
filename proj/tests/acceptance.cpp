// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include "sqdf/sqdf.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace sqdf;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

IndicatorSet random_set(std::int64_t n, double d, std::uint64_t seed) {
    SetSpec s;
    s.kind = SetKind::Random;
    s.n = n;
    s.density = d;
    s.seed = seed;
    return realize(s);
}

IntegerFunction random_function(std::mt19937_64& g, std::int64_t max_len, double lo = -1.0) {
    std::uniform_int_distribution<std::int64_t> len(1, max_len), start(-100, 100);
    std::uniform_real_distribution<double> v(lo, 1.0);
    std::vector<double> vals(static_cast<std::size_t>(len(g)));
    for (auto& x : vals) x = v(g);
    return IntegerFunction(start(g), std::move(vals));
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

// 1: Plancherel and the convolution theorem
Verdict fourier_identities() {
    const auto t0 = Clock::now();
    std::mt19937_64 g(101);
    const int cases = 1000;
    double pl_arc = 0.0, pl_grid = 0.0, conv = 0.0, conv_grid = 0.0;
    for (int i = 0; i < cases; ++i) {
        const auto f = random_function(g, 4096);
        const auto h = random_function(g, 512);
        const double l2 = f.sum_squares();
        pl_arc = std::max(pl_arc, std::abs(integrate_energy(f, ArcSystem::full()) - l2) / l2);
        const std::size_t M = f.size() + static_cast<std::size_t>(g() % 64);
        double s = 0.0;
        for (const auto& z : dft_grid(f, M)) s += std::norm(z);
        pl_grid = std::max(pl_grid, std::abs(s / static_cast<double>(M) - l2) / l2);

        const auto fh = convolve(f, h);
        const double scale = f.l1_norm() * h.l1_norm();
        for (int k = 0; k < 3; ++k) {
            const TorusPoint a(std::uniform_real_distribution<double>(0.0, 1.0)(g));
            conv = std::max(conv, std::abs(fourier_eval(fh, a) - fourier_eval(f, a) * fourier_eval(h, a)) / scale);
        }
        const std::size_t Mc = fh.size();
        const auto A = dft_grid(f, Mc), B = dft_grid(h, Mc), C = dft_grid(fh, Mc);
        for (std::size_t k = 0; k < Mc; k += 1 + Mc / 64) conv_grid = std::max(conv_grid, std::abs(C[k] - A[k] * B[k]) / scale);
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const double worst = std::max({pl_arc, pl_grid, conv, conv_grid});
    return {worst <= 1e-9 && secs < 60.0,
            fmt("%d cases N<=4096; Plancherel arc %.1e grid %.1e, convolution point %.1e grid %.1e (tol 1e-9); %.1f s (< 60)",
                cases, pl_arc, pl_grid, conv, conv_grid, secs)};
}

// 2: average_count against the torus integral
Verdict counting_identity() {
    std::mt19937_64 g(202);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const std::int64_t n = std::uniform_int_distribution<std::int64_t>(16, 4096)(g);
        const auto a = random_set(n, std::uniform_real_distribution<double>(0.05, 0.95)(g), g());
        const auto lam = std::uniform_int_distribution<std::int64_t>(1, isqrt(n / 4))(g);
        const auto mu = std::uniform_int_distribution<std::int64_t>(1, lam)(g);
        const double direct = average_count(a, lam, mu);
        const auto f = a.indicator();
        worst = std::max(worst, rel(direct, lambda_fourier(f, f, WeylParams(lam, mu, 1))));
    }
    return {worst <= 1e-8, fmt("100 random sets N<=4096; max relative gap %.1e (tol 1e-8)", worst)};
}

// 3: Lambda_q two paths, and the rescaling identity
Verdict lambda_identity() {
    std::mt19937_64 g(303);
    double worst = 0.0, worst_rescale = 0.0;
    for (int i = 0; i < 100; ++i) {
        const auto gf = random_function(g, 1024), hf = random_function(g, 1024);
        const auto lam = std::uniform_int_distribution<std::int64_t>(1, 16)(g);
        const auto mu = std::uniform_int_distribution<std::int64_t>(1, lam)(g);
        const auto q = std::uniform_int_distribution<std::int64_t>(1, 6)(g);
        const WeylParams p(lam, mu, q);
        worst = std::max(worst, rel(lambda_direct(gf, hf, p, false).value, lambda_fourier(gf, hf, p)));
    }
    for (int i = 0; i < 100; ++i) {
        const auto q = std::uniform_int_distribution<std::int64_t>(1, 12)(g);
        const auto m = std::uniform_int_distribution<std::int64_t>(1, 40)(g);
        const auto l = m + std::uniform_int_distribution<std::int64_t>(0, 200)(g);
        const TorusPoint a(std::uniform_real_distribution<double>(0.0, 1.0)(g));
        worst_rescale = std::max(worst_rescale, weyl_rescale_check(WeylParams(q * l, q * m, q), a));
    }
    return {worst <= 1e-8 && worst_rescale <= 1e-10,
            fmt("100 (g,h,lambda,mu,q) cases N<=1024: max relative gap %.1e (tol 1e-8); rescaling on 100 cases %.1e (tol 1e-10)",
                worst, worst_rescale)};
}

// 4: transform support, centers and mass
Verdict mollifier_support() {
    struct Cfg {
        ProfileKind kind;
        std::int64_t q;
        double L;
    };
    const std::vector<Cfg> cfgs{{ProfileKind::Fejer, 1, 8.0},    {ProfileKind::Fejer, 2, 20.0},
                                {ProfileKind::Fejer, 3, 90.0},   {ProfileKind::Fejer, 12, 400.0},
                                {ProfileKind::Fejer, 12, 60.0},  {ProfileKind::SmoothBump, 2, 20.0},
                                {ProfileKind::SmoothBump, 12, 100.0}};
    std::mt19937_64 g(404);
    double worst_out = 0.0, worst_center = 0.0, worst_mass = 0.0;
    bool ok = true;
    for (const auto& c : cfgs) {
        const DiscreteMollifier m(make_profile(c.kind), c.q, c.L);
        const double Q = static_cast<double>(m.Q());
        const double r = 1.0 / (c.L * c.L);
        double out = 0.0;
        for (int i = 0; i < 10000;) {
            const auto a = std::uniform_int_distribution<std::int64_t>(0, m.Q() - 1)(g);
            const double off = std::uniform_real_distribution<double>(r, 0.5 / Q)(g);
            if (!(off > r)) continue;
            const double sign = (g() & 1) ? 1.0 : -1.0;
            out = std::max(out, std::abs(m.hat_periodized(TorusPoint(static_cast<double>(a) / Q + sign * off))));
            ++i;
        }
        double center = 0.0;
        for (std::int64_t a = 0; a < m.Q(); ++a)
            center = std::max(center, std::abs(m.hat(TorusPoint(static_cast<double>(a) / Q)) - 1.0));
        const double mass = std::abs(m.mass() - 1.0);
        // centers a/q^2 carry a representation error of 2^-53, scaled by L^2 in the transform
        ok = ok && out == 0.0 && center <= c.L * c.L * 0x1p-52 && mass <= 1e-6;
        worst_out = std::max(worst_out, out);
        worst_center = std::max(worst_center, center);
        worst_mass = std::max(worst_mass, mass);
    }
    return {ok, fmt("%zu configs x 1e4 outside samples: max |hat| outside %.1e (exact 0); max |hat(a/q^2)-1| %.1e "
                    "(tol L^2 2^-52); max |mass-1| %.1e (tol 1e-6)",
                    cfgs.size(), worst_out, worst_center, worst_mass)};
}

// 5: minor-arc calibration
Verdict weyl_calibration(const CalibrationConstants& cal) {
    const auto t0 = Clock::now();
    double worst_ratio = 0.0, worst_stab = 0.0;
    int vacuous = 0, live = 0;
    std::ostringstream runs;
    for (std::int64_t l : {200, 500, 1000}) {
        for (double e : {0.4, 0.2, 0.1}) {
            const WeylParams p(l, l);
            const EtaParams eta(e);
            const auto G = default_grid(static_cast<double>(l));
            MinorArcScan s1, s2;
            try {
                s1 = minor_arc_sup(p, eta, G);
                s2 = minor_arc_sup(p, eta, 2 * G);
            } catch (const ResolutionError&) {
                ++vacuous;  // major arcs cover the circle: no minor arc to bound
                runs << " " << l << "/" << e << ":vacuous";
                continue;
            }
            ++live;
            const double ratio = std::max(s1.sup, s2.sup) / e;
            const double stab = std::abs(s2.sup - s1.sup) / std::max(s1.sup, s2.sup);
            worst_ratio = std::max(worst_ratio, ratio);
            worst_stab = std::max(worst_stab, stab);
            runs << " " << l << "/" << e << ":" << fmt("%.3f", ratio);
        }
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return {worst_ratio <= cal.c1 && worst_stab < 0.05 && secs < 600.0,
            fmt("max sup/eta %.4f <= c1 %.2f; refinement change %.2f%% (< 5%%); %d live, %d vacuous; %.1f s (< 600);",
                worst_ratio, cal.c1, 100.0 * worst_stab, live, vacuous, secs) +
                runs.str()};
}

// 6: decomposition, majorant and main term
Verdict decomposition(const CalibrationConstants& cal) {
    const auto fejer = make_profile(ProfileKind::Fejer);
    const EtaParams eta(kDeskEta);
    std::mt19937_64 g(606);
    double worst_id = 0.0, worst_gap = -1e300;
    int majorant_ok = 0;
    for (int i = 0; i < 50; ++i) {
        const auto f = random_function(g, 4000, 0.0);
        const std::int64_t lam = 12 * std::uniform_int_distribution<std::int64_t>(3, 6)(g);
        const std::int64_t mu = 12 * std::uniform_int_distribution<std::int64_t>(3, lam / 12)(g);
        const auto d = decompose(f, eta, lam, mu, fejer);
        worst_id = std::max(worst_id, d.identity_residual);
        const auto t = lambda_terms(d, WeylParams(lam, mu, 12));
        const double lhs = std::max(std::abs(t.f3f1), std::abs(t.ff3));
        const double rhs = t.majorant + 1e-6 * static_cast<double>(d.n);
        worst_gap = std::max(worst_gap, lhs - rhs);
        if (lhs <= rhs) ++majorant_ok;
    }
    int main_ok = 0, pre_ok = 0;
    double min_margin = 1e300;
    std::string asym;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto a = random_set(100000, 0.5, 6000 + s);
        const auto d = decompose(a.indicator(), eta, 36, 36, fejer);
        worst_id = std::max(worst_id, d.identity_residual);
        const auto r = main_term_report(d, WeylParams(36, 36, 12), 0.05, cal);
        bool pre = true;
        for (const auto& c : r.preconditions) {
            if (c.asymptotic) {
                if (!c.holds) asym = c.name;
                continue;
            }
            pre = pre && c.holds;
        }
        if (pre) ++pre_ok;
        if (r.inequality.holds) ++main_ok;
        min_margin = std::min(min_margin, (r.exact - r.target) / 100000.0);
    }
    return {worst_id <= 1e-9 && majorant_ok == 50 && main_ok == 20 && pre_ok == 20,
            fmt("identity residual %.1e (tol 1e-9); majorant %d/50 (max lhs-rhs %.2e); main term %d/20 at delta=0.5 "
                "N=1e5 eta=1/2 lambda=mu=36 eps=0.05 (min margin %.4f N), desk preconditions %d/20",
                worst_id, majorant_ok, worst_gap, main_ok, min_margin, pre_ok) +
                (asym.empty() ? std::string() : "; asymptotic-only, not met: " + asym)};
}

// 7: scale iteration
Verdict scale_iteration_check() {
    const auto t0 = Clock::now();
    DichotomyOptions loose;
    loose.enforce_preconditions = false;
    auto regime = [](double eps) {
        auto r = EpsilonRegime::make(eps);
        r.eta_override = kDeskEta;
        r.mu_factor = 2.0;
        r.n_factor = 1.0;
        return r;
    };
    // corpus: bundled vectors plus structured families
    std::vector<std::pair<std::string, std::int64_t>> corpus;
    {
        std::ifstream in(std::string(SQDF_SOURCE_DIR) + "/data/vectors.json");
        const auto v = json::parse(in);
        for (const auto& c : v.at("corpus")) corpus.emplace_back(c.at("spec").get<std::string>(), c.at("n").get<std::int64_t>());
    }
    for (const char* s : {"congruence:144:0", "interval:1:1000", "congruence:2:1", "random:0.05:77", "random:0.9:78"})
        corpus.emplace_back(s, 1000000);
    int corpus_ok = 0;
    double worst_excess = -1e300;
    for (const auto& [spec, n] : corpus) {
        const auto a = realize(parse_set_spec(spec, n));
        const auto it = scale_iteration(a, regime(0.05), 16, loose);
        worst_excess = std::max(worst_excess, it.energy_sum - static_cast<double>(a.size()));
        if (it.disjoint_exact && it.plancherel.holds) ++corpus_ok;
    }
    int found = 0, verified = 0, found_c = 0;
    std::size_t scales = 0;
    bool pre_violated = false;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto a = random_set(1000000, 0.3, 7000 + s);
        const auto it = scale_iteration(a, regime(0.1), 16, loose);
        scales = it.scales.size();
        for (const auto& c : it.outcomes.front().preconditions)
            if (!c.holds) pre_violated = true;
        if (it.witness) {
            ++found;
            const auto c = intersect_count(a, it.witness->t);
            const double thr = (a.density() * a.density() - 0.1) * static_cast<double>(a.n());
            if (c == it.witness->count && static_cast<double>(c) > thr) ++verified;
        }
        // companion run with eps <= delta^2
        const auto it2 = scale_iteration(a, regime(0.05), 16, loose);
        if (it2.witness && static_cast<double>(intersect_count(a, it2.witness->t)) >
                               (a.density() * a.density() - 0.05) * static_cast<double>(a.n()))
            ++found_c;
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    return {corpus_ok == static_cast<int>(corpus.size()) && verified == 20 && secs < 300.0,
            fmt("corpus %d/%zu disjoint (exact) with sum energy <= |A| + 1e-6 (max sum-|A| %.1f); "
                "delta=0.3 eps=0.1 N=1e6 eta=1/2: witness %d/20, recount verified %d/20 over %zu scales%s; "
                "eps=0.05 companion %d/20; %.1f s (< 300)",
                corpus_ok, corpus.size(), worst_excess, found, verified, scales,
                pre_violated ? " (eps <= delta^2 not met, reported)" : "", found_c, secs)};
}

// 8: random baseline
Verdict random_baseline_check() {
    int within = 0;
    double worst = 0.0, mean_pooled = 0.0, mean_literal = 0.0, mean_target = 0.0, se = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto b = random_baseline(random_set(100000, 0.3, 8000 + s));
        const double p = b.delta * b.delta;
        const double z = std::abs(b.pooled_ratio - p) / b.standard_error;
        worst = std::max(worst, z);
        if (z <= 3.0) ++within;
        mean_pooled += b.pooled_ratio / 20.0;
        mean_literal += b.literal_mean / 20.0;
        mean_target += p / 20.0;
        se += b.standard_error / 20.0;
    }
    const double z_mean = std::abs(mean_pooled - mean_target) / (se / std::sqrt(20.0));
    // the seed mean is reported only: overlapping pairs make se / sqrt(20) optimistic
    return {within == 20,
            fmt("20 seeds N=1e5 delta=0.3: pooled ratio within 3 se of delta^2 in %d/20 (max %.2f se); seed mean %.5f vs "
                "%.5f (%.2f naive se of the mean, reported only); unpooled mean over t of count/N %.5f",
                within, worst, mean_pooled, mean_target, z_mean, mean_literal)};
}

// 9: appendix census
Verdict census_check() {
    const std::int64_t n = 100000;
    std::int64_t closed = 0;
    for (std::int64_t t = 1; t * t <= n; ++t) closed += n - t * t;
    const auto full = realize(parse_set_spec("interval:1:100000", n));
    const bool closed_ok = varnavides_sum(full) == closed;
    int met = 0;
    double min_ratio = 1e300;
    std::int64_t worst_over = 0;
    std::mt19937_64 g(909);
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto a = random_set(n, 0.4, 9000 + s);
        const auto c = good_progressions(a, 20);
        if (!c.degenerate && static_cast<double>(c.good_count) >= c.target) ++met;
        min_ratio = std::min(min_ratio, static_cast<double>(c.good_count) / c.target);
        if (s == 0) {
            const auto lim = ProgressionLimits::from(a.n(), a.density(), 20);
            const std::int64_t smax = isqrt(n - 1);
            for (int i = 0; i < 100; ++i) {
                const auto sg = std::uniform_int_distribution<std::int64_t>(1, smax)(g);
                const auto n0 = std::uniform_int_distribution<std::int64_t>(1, n - sg * sg)(g);
                worst_over = std::max(worst_over, overcount_bound_check(n0, sg, lim));
            }
        }
    }
    return {closed_ok && met == 20 && worst_over <= 400,
            fmt("varnavides full interval %s closed form %lld; good progressions >= (delta N)^{3/2}/M in %d/20 at "
                "delta=0.4 N=1e5 M=20 (min ratio %.2f); overcount max %lld <= M^2 = 400 over 100 pairs",
                closed_ok ? "==" : "!=", static_cast<long long>(closed), met, min_ratio, static_cast<long long>(worst_over))};
}

// 10: congruence obstruction
Verdict congruence_obstruction() {
    const std::int64_t n = 10000;
    std::int64_t checked = 0, bad = 0;
    for (std::int64_t d = 1; d <= 12; ++d) {
        const auto a = realize(parse_set_spec("congruence:" + std::to_string(d) + ":0", n));
        for (std::int64_t t = 1; t * t < n; ++t) {
            ++checked;
            if ((intersect_count(a, t) == 0) != ((t * t) % d != 0)) ++bad;
        }
    }
    return {bad == 0, fmt("A = dZ cap [1,1e4], d<=12, all t with t^2 < N: %lld pairs, %lld mismatches",
                          static_cast<long long>(checked), static_cast<long long>(bad))};
}

}  // namespace

int main() {
    const CalibrationConstants cal = calibration_from_env();
    const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria{
        {"fourier identities", fourier_identities},
        {"counting identity", counting_identity},
        {"lambda identity", lambda_identity},
        {"mollifier support", mollifier_support},
        {"minor-arc calibration", [&] { return weyl_calibration(cal); }},
        {"decomposition and bookkeeping", [&] { return decomposition(cal); }},
        {"scale-iteration pigeonhole", scale_iteration_check},
        {"random-set baseline", random_baseline_check},
        {"census", census_check},
        {"congruence obstruction", congruence_obstruction},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        if (!v.pass) ++failed;
        std::cout << "criterion " << (i + 1) << " [" << criteria[i].first << "]: " << (v.pass ? "PASS" : "FAIL") << ": "
                  << v.detail << std::endl;
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : std::string("acceptance: all criteria passed"))
              << std::endl;
    return failed ? 1 : 0;
}
