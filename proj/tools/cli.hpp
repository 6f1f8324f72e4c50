#pragma once

// Command-line front end.  run_cli is the whole program; sqdf.cpp only
// forwards to it so the tests can drive subcommands in-process.

#include "sqdf/sqdf.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#ifndef SQDF_DATA_DIR
#define SQDF_DATA_DIR "data"
#endif

namespace sqdf::cli {

inline constexpr int kExitUsage = 64;

inline std::filesystem::path data_dir() {
    if (const char* p = std::getenv("SQDF_DATA_DIR"); p != nullptr && *p != '\0') return p;
    return SQDF_DATA_DIR;
}

struct GlobalOptions {
    std::string output;
    std::string csv;
    std::string calibration;
    bool no_timestamp = false;
};

/// Rows for the --csv projection.
class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}
    template <class... T>
    void row(const T&... v) {
        std::vector<std::string> r;
        (r.push_back(cell(v)), ...);
        rows_.push_back(std::move(r));
    }
    void write(std::ostream& os) const {
        auto line = [&](const std::vector<std::string>& r) {
            for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << r[i];
            os << '\n';
        };
        line(header_);
        for (const auto& r : rows_) line(r);
    }
    bool empty() const { return rows_.empty(); }

    static std::string cell_str(double v) { return cell(v); }

private:
    template <class T>
    static std::string cell(const T& v) {
        if constexpr (std::is_floating_point_v<T>) {
            std::ostringstream os;
            os.precision(17);
            os << v;
            return os.str();
        } else if constexpr (std::is_convertible_v<T, std::string>) {
            return std::string(v);
        } else {
            return std::to_string(v);
        }
    }
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

struct Context {
    GlobalOptions global;
    CalibrationConstants cal;
    std::optional<Table> table;
};

// ---------------------------------------------------------------------------
// dichotomy / iterate configuration

struct RunConfig {
    double epsilon = 0.1;
    std::optional<double> eta_override;
    double mu_factor = 10.0;
    double n_factor = 100.0;
    ProfileKind profile = ProfileKind::Fejer;
    std::vector<std::uint64_t> seeds;
    std::string set_spec;
    std::int64_t n = 0;
    std::int64_t lambda = 0;
    std::int64_t mu = 0;
    std::int64_t j_max = 64;
    bool enforce = true;
    bool cross_check = false;

    static RunConfig from_json(const json& j) {
        RunConfig c;
        try {
            if (j.contains("epsilon")) c.epsilon = j.at("epsilon").get<double>();
            if (j.contains("eta_override") && !j.at("eta_override").is_null())
                c.eta_override = j.at("eta_override").get<double>();
            if (j.contains("mu_factor")) c.mu_factor = j.at("mu_factor").get<double>();
            if (j.contains("n_factor")) c.n_factor = j.at("n_factor").get<double>();
            if (j.contains("profile")) c.profile = parse_profile_kind(j.at("profile").get<std::string>());
            if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
            if (j.contains("set_spec")) c.set_spec = j.at("set_spec").get<std::string>();
            if (j.contains("n")) c.n = j.at("n").get<std::int64_t>();
            if (j.contains("lambda")) c.lambda = j.at("lambda").get<std::int64_t>();
            if (j.contains("mu")) c.mu = j.at("mu").get<std::int64_t>();
            if (j.contains("j_max")) c.j_max = j.at("j_max").get<std::int64_t>();
            if (j.contains("enforce_preconditions")) c.enforce = j.at("enforce_preconditions").get<bool>();
        } catch (const json::exception& e) {
            throw ParseError(std::string("config: ") + e.what());
        }
        return c;
    }

    json to_json() const {
        return json{{"epsilon", epsilon},
                    {"eta_override", eta_override ? json(*eta_override) : json(nullptr)},
                    {"mu_factor", mu_factor},
                    {"n_factor", n_factor},
                    {"profile", to_string(profile)},
                    {"seeds", seeds},
                    {"set_spec", set_spec},
                    {"n", n},
                    {"lambda", lambda},
                    {"mu", mu},
                    {"j_max", j_max},
                    {"enforce_preconditions", enforce}};
    }

    EpsilonRegime regime(const CalibrationConstants& cal) const {
        if (!(epsilon > 0.0) || !(epsilon <= 1.0)) throw PreconditionError("epsilon must lie in (0, 1]");
        auto r = EpsilonRegime::make(epsilon, cal);
        r.mu_factor = mu_factor;
        r.n_factor = n_factor;
        r.eta_override = eta_override;
        r.profile = profile;
        return r;
    }

    /// One realized set per seed (a single run when no seeds are given).
    std::vector<std::pair<std::optional<std::uint64_t>, SetSpec>> specs() const {
        if (set_spec.empty()) throw PreconditionError("no set given (--set or set_spec)");
        if (n < 1) throw PreconditionError("no ambient size given (--n or n)");
        const SetSpec base = parse_set_spec(set_spec, n);
        std::vector<std::pair<std::optional<std::uint64_t>, SetSpec>> out;
        if (seeds.empty() || base.kind != SetKind::Random) {
            out.emplace_back(std::nullopt, base);
            return out;
        }
        for (auto s : seeds) {
            SetSpec c = base;
            c.seed = s;
            out.emplace_back(s, c);
        }
        return out;
    }
};

inline std::string run_label(const std::optional<std::uint64_t>& seed) {
    return seed ? "[seed " + std::to_string(*seed) + "] " : std::string();
}

inline Inequality relabel(Inequality c, const std::string& prefix, bool asymptotic = false) {
    c.name = prefix + c.name;
    c.asymptotic = c.asymptotic || asymptotic;
    return c;
}

/// Records the checks attached to one dichotomy outcome.
inline void record_outcome(RunReport& rep, const DichotomyOutcome& o, const IndicatorSet& a, const std::string& prefix,
                           bool enforced) {
    // unenforced preconditions mark the run as outside the stated regime
    for (const auto& c : o.preconditions) rep.record(relabel(c, prefix, !enforced));
    rep.record(relabel(o.strength, prefix));
    if (o.branch == Branch::Random) {
        const auto recount = intersect_count(a, *o.witness_t);
        rep.record(check_le(prefix + "witness recount == reported count", std::abs(static_cast<double>(recount - *o.witness_count)), 0.0));
        rep.record(check_ge(prefix + "witness count > (delta^2 - eps) N", static_cast<double>(recount),
                            std::nextafter(o.threshold_used, INFINITY)));
    } else if (o.structured) {
        rep.record(relabel(o.structured->split, prefix));
        rep.record(relabel(o.structured->contract, prefix));
        rep.record(relabel(o.structured->implication, prefix));
        rep.record(check_ge(prefix + "annulus energy >= eps N / 10", o.structured->annulus, o.threshold_used, true));
    }
}

// ---------------------------------------------------------------------------
// verify

struct Verifier {
    RunReport& rep;
    bool quick;
    json results = json::object();

    void check(const std::string& group, const Inequality& c) {
        rep.record(relabel(c, group + ": "));
        auto& g = results[group];
        if (g.is_null()) g = json{{"checks", 0}, {"failed", 0}};
        g["checks"] = g["checks"].get<int>() + 1;
        if (!c.holds) g["failed"] = g["failed"].get<int>() + 1;
    }

    static IntegerFunction random_function(std::mt19937_64& g, std::int64_t max_len) {
        std::uniform_int_distribution<std::int64_t> len(1, max_len), start(-50, 50);
        std::uniform_real_distribution<double> v(-1.0, 1.0);
        std::vector<double> vals(static_cast<std::size_t>(len(g)));
        for (auto& x : vals) x = v(g);
        return IntegerFunction(start(g), std::move(vals));
    }

    static IndicatorSet random_set(std::int64_t n, double d, std::uint64_t seed) {
        SetSpec s;
        s.kind = SetKind::Random;
        s.n = n;
        s.density = d;
        s.seed = seed;
        return realize(s);
    }

    void vectors(const json& v) {
        for (const auto& c : v.value("sets", json::array())) {
            const auto a = realize(parse_set_spec(c.at("spec").get<std::string>(), c.at("n").get<std::int64_t>()));
            const auto want = c.at("members").get<std::vector<std::int64_t>>();
            check("vectors", check_le("realize " + c.at("spec").get<std::string>() + " mismatches",
                                      a.members() == want ? 0.0 : 1.0, 0.0));
        }
        for (const auto& c : v.value("count", json::array())) {
            const auto a = realize(parse_set_spec(c.at("spec").get<std::string>(), c.at("n").get<std::int64_t>()));
            const auto got = intersect_count(a, c.at("t").get<std::int64_t>());
            check("vectors", check_le("intersect_count " + c.at("spec").get<std::string>() + " |got - want|",
                                      std::abs(static_cast<double>(got - c.at("expected").get<std::int64_t>())), 0.0));
        }
        for (const auto& c : v.value("weyl", json::array())) {
            const auto got = std::abs(weyl_sum(c.at("lambda").get<std::int64_t>(), c.at("mu").get<std::int64_t>(),
                                               TorusPoint(c.at("alpha").get<double>())));
            check("vectors", check_le("|weyl_sum| deviation", std::abs(got - c.at("expected_abs").get<double>()), 1e-12));
        }
        for (const auto& c : v.value("lcm", json::array())) {
            const auto got = lcm_up_to(c.at("k").get<std::int64_t>()).str();
            check("vectors", check_le("lcm(1.." + std::to_string(c.at("k").get<std::int64_t>()) + ") mismatches",
                                      got == c.at("value").get<std::string>() ? 0.0 : 1.0, 0.0));
        }
        for (const auto& c : v.value("varnavides", json::array())) {
            const auto got = varnavides_sum(realize(parse_set_spec(c.at("spec").get<std::string>(), c.at("n").get<std::int64_t>())));
            check("vectors", check_le("varnavides_sum |got - want|",
                                      std::abs(static_cast<double>(got - c.at("expected").get<std::int64_t>())), 0.0));
        }
    }

    void fourier() {
        std::mt19937_64 g(1);
        const int cases = quick ? 50 : 1000;
        double worst_pl = 0.0, worst_conv = 0.0;
        for (int i = 0; i < cases; ++i) {
            const auto f = random_function(g, quick ? 256 : 4096);
            const auto h = random_function(g, 64);
            const double l2 = f.sum_squares();
            worst_pl = std::max(worst_pl, std::abs(integrate_energy(f, ArcSystem::full()) - l2) / l2);
            const TorusPoint a(std::uniform_real_distribution<double>(0.0, 1.0)(g));
            const cplx lhs = fourier_eval(convolve(f, h), a);
            const cplx rhs = fourier_eval(f, a) * fourier_eval(h, a);
            worst_conv = std::max(worst_conv, std::abs(lhs - rhs) / (f.l1_norm() * h.l1_norm()));
        }
        check("fourier", check_le("Plancherel max relative error", worst_pl, 1e-9));
        check("fourier", check_le("convolution theorem max relative error", worst_conv, 1e-9));
    }

    void counting() {
        std::mt19937_64 g(2);
        double worst_avg = 0.0, worst_lambda = 0.0, worst_rescale = 0.0;
        const int cases = quick ? 10 : 100;
        for (int i = 0; i < cases; ++i) {
            const std::int64_t n = std::uniform_int_distribution<std::int64_t>(64, quick ? 1024 : 4096)(g);
            const auto a = random_set(n, 0.4, g());
            const auto lam = std::uniform_int_distribution<std::int64_t>(1, isqrt(n / 4))(g);
            const auto mu = std::uniform_int_distribution<std::int64_t>(1, lam)(g);
            const double avg = average_count(a, lam, mu);
            const auto f = a.indicator();
            const double four = lambda_fourier(f, f, WeylParams(lam, mu, 1));
            worst_avg = std::max(worst_avg, std::abs(four - avg) / std::max(1.0, std::abs(avg)));

            const auto gf = random_function(g, 1024), hf = random_function(g, 1024);
            const auto q = std::uniform_int_distribution<std::int64_t>(1, 4)(g);
            const WeylParams p(lam, mu, q);
            const double d = lambda_direct(gf, hf, p, false).value;
            const double fo = lambda_fourier(gf, hf, p);
            worst_lambda = std::max(worst_lambda, std::abs(d - fo) / std::max(1.0, std::abs(d)));

            const auto k = std::uniform_int_distribution<std::int64_t>(1, 20)(g);
            const WeylParams pr(q * (k + 5), q * k, q);
            worst_rescale = std::max(worst_rescale, weyl_rescale_check(pr, TorusPoint(std::uniform_real_distribution<double>(0, 1)(g))));
        }
        check("counting", check_le("average_count vs torus integral relative error", worst_avg, 1e-8));
        check("counting", check_le("lambda_direct vs lambda_fourier relative error", worst_lambda, 1e-8));
        check("counting", check_le("rescaling identity error", worst_rescale, 1e-10));
        for (std::int64_t d = 1; d <= 12; ++d) {
            const auto a = realize(parse_set_spec("congruence:" + std::to_string(d) + ":0", quick ? 2000 : 10000));
            std::int64_t bad = 0;
            for (std::int64_t t = 1; t * t < a.n(); ++t)
                if ((intersect_count(a, t) == 0) != ((t * t) % d != 0)) ++bad;
            check("counting", check_le("congruence obstruction mismatches d=" + std::to_string(d), static_cast<double>(bad), 0.0));
        }
        std::int64_t closed = 0;
        const std::int64_t n = 10000;
        for (std::int64_t t = 1; t * t <= n; ++t) closed += n - t * t;
        const auto full = realize(parse_set_spec("interval:1:" + std::to_string(n), n));
        check("counting", check_le("varnavides full interval |sum - closed form|",
                                   std::abs(static_cast<double>(varnavides_sum(full) - closed)), 0.0));
    }

    void mollifier() {
        const std::vector<std::pair<std::int64_t, double>> cfgs{{1, 8.0}, {2, 20.0}, {3, 90.0}, {12, 400.0}};
        std::mt19937_64 g(3);
        const int samples = quick ? 1000 : 10000;
        for (const auto& [q, L] : cfgs) {
            const DiscreteMollifier m(make_profile(ProfileKind::Fejer), q, L);
            const std::string tag = "q=" + std::to_string(q) + " L=" + Table::cell_str(L) + " ";
            const double Q = static_cast<double>(m.Q());
            const double r = 1.0 / (L * L);
            double worst_out = 0.0;
            for (int i = 0; i < samples; ++i) {
                const auto a = std::uniform_int_distribution<std::int64_t>(0, m.Q() - 1)(g);
                const double off = std::uniform_real_distribution<double>(r, 0.5 / Q)(g);
                const double sign = (g() & 1) ? 1.0 : -1.0;
                if (!(off > r)) continue;
                worst_out = std::max(worst_out, std::abs(m.hat_periodized(TorusPoint(static_cast<double>(a) / Q + sign * off))));
            }
            double worst_center = 0.0;
            for (std::int64_t a = 0; a < m.Q(); ++a)
                worst_center = std::max(worst_center, std::abs(m.hat(TorusPoint(static_cast<double>(a) / Q)) - 1.0));
            check("mollifier", check_le(tag + "max |hat| outside support", worst_out, 0.0));
            // a/q^2 is only representable to 2^-53, which the transform scales by L^2
            check("mollifier", check_le(tag + "max |hat(a/q^2) - 1|", worst_center, L * L * 0x1p-52));
            check("mollifier", check_le(tag + "|mass - 1|", std::abs(m.mass() - 1.0), 1e-6));
        }
    }

    void weyl(const CalibrationConstants& cal) {
        const std::vector<std::int64_t> lams = quick ? std::vector<std::int64_t>{200} : std::vector<std::int64_t>{200, 500, 1000};
        for (auto l : lams) {
            const auto s = minor_arc_sup(WeylParams(l, l), EtaParams(0.4));
            check("weyl", check_le("minor-arc sup / eta at lambda=mu=" + std::to_string(l), s.sup / s.eta, cal.c1));
        }
    }

    void decomposition() {
        std::mt19937_64 g(4);
        const EtaParams eta(1.0 / std::sqrt(2.0));
        double worst_id = 0.0, worst_major = -1e300;
        const int cases = quick ? 5 : 50;
        for (int i = 0; i < cases; ++i) {
            const std::int64_t n = std::uniform_int_distribution<std::int64_t>(200, 600)(g);
            const auto a = random_set(n, 0.5, g());
            const std::int64_t lm = 2 * std::uniform_int_distribution<std::int64_t>(8, 20)(g);
            const auto d = decompose(a.indicator(), eta, lm, lm, make_profile(ProfileKind::Fejer));
            worst_id = std::max(worst_id, d.identity_residual);
            const auto t = lambda_terms(d, WeylParams(lm, lm, 2));
            const double lhs = std::max(std::abs(t.f3f1), std::abs(t.ff3));
            worst_major = std::max(worst_major, lhs - (t.majorant + 1e-6 * static_cast<double>(n)));
        }
        check("decomposition", check_le("identity residual", worst_id, 1e-9));
        check("decomposition", check_le("max(|L(f3,f1)|,|L(f,f3)|) - majorant bound", worst_major, 0.0));
    }

    void iteration(const json& v) {
        EpsilonRegime r = EpsilonRegime::make(0.05);
        r.eta_override = kDeskEta;
        r.mu_factor = 2.0;
        r.n_factor = 1.0;
        DichotomyOptions opt;
        opt.enforce_preconditions = false;
        for (const auto& c : v.value("corpus", json::array())) {
            const auto n = c.at("n").get<std::int64_t>();
            if (quick && n > 200000) continue;
            const auto spec = c.at("spec").get<std::string>();
            const auto a = realize(parse_set_spec(spec, n));
            const auto it = scale_iteration(a, r, 8, opt);
            check("iteration", relabel(it.plancherel, spec + " "));
            check("iteration", check_le(spec + " annulus overlaps (exact)", it.disjoint_exact ? 0.0 : 1.0, 0.0));
            if (it.witness) {
                const auto recount = intersect_count(a, it.witness->t);
                check("iteration", check_le(spec + " witness recount mismatch",
                                            std::abs(static_cast<double>(recount - it.witness->count)), 0.0));
            }
        }
    }

    void baseline() {
        const int seeds = quick ? 3 : 20;
        for (int s = 0; s < seeds; ++s) {
            const auto b = random_baseline(random_set(quick ? 20000 : 100000, 0.3, 1000 + s));
            const double p = b.delta * b.delta;
            check("baseline", check_le("seed " + std::to_string(1000 + s) + " |pooled - delta^2| / se",
                                       std::abs(b.pooled_ratio - p) / b.standard_error, 3.0));
        }
    }
};

// ---------------------------------------------------------------------------
// subcommands

inline void emit(const Context& ctx, const RunReport& rep, std::ostream& out) {
    const std::string text = rep.to_json(!ctx.global.no_timestamp).dump(2) + "\n";
    if (ctx.global.output.empty() || ctx.global.output == "-") {
        out << text;
    } else {
        std::ofstream f(ctx.global.output, std::ios::binary);
        if (!f) throw ParseError("cannot write " + ctx.global.output);
        f << text;
    }
    if (!ctx.global.csv.empty() && ctx.table) {
        std::ofstream f(ctx.global.csv, std::ios::binary);
        if (!f) throw ParseError("cannot write " + ctx.global.csv);
        ctx.table->write(f);
    }
}

struct CountArgs {
    std::string set;
    std::int64_t n = 0;
    std::optional<std::int64_t> t, lambda, mu;
    bool varnavides = false;
};

inline RunReport do_count(Context& ctx, const CountArgs& a) {
    const SetSpec spec = parse_set_spec(a.set, a.n);
    RunReport rep("count", json{{"set", a.set}, {"n", a.n}, {"t", a.t ? json(*a.t) : json(nullptr)},
                                {"lambda", a.lambda ? json(*a.lambda) : json(nullptr)},
                                {"mu", a.mu ? json(*a.mu) : json(nullptr)}, {"varnavides", a.varnavides}},
                  ctx.cal);
    const auto set = realize(spec);
    auto& res = rep.results();
    res["size"] = set.size();
    res["density"] = set.density();
    if (a.t) {
        if (*a.t < 1) throw PreconditionError("count: t must be >= 1");
        res["intersect_count"] = intersect_count(set, *a.t);
    }
    if (a.lambda || a.mu) {
        if (!a.lambda || !a.mu) throw PreconditionError("count: --lambda and --mu go together");
        res["average_count"] = average_count(set, *a.lambda, *a.mu);
        ctx.table.emplace(std::vector<std::string>{"t", "count"});
        for (std::int64_t t = *a.lambda + 1; t <= *a.lambda + *a.mu; ++t) ctx.table->row(t, intersect_count(set, t));
    }
    if (a.varnavides) {
        const auto v = varnavides_sum(set);
        res["varnavides_sum"] = v;
        double expect = 0.0;
        for (std::int64_t t = 1; t * t <= set.n(); ++t) expect += static_cast<double>(set.n() - t * t);
        res["random_model"] = set.density() * set.density() * expect;
    }
    return rep;
}

struct WeylArgs {
    std::int64_t lambda = 0, mu = 0, q = 1;
    double alpha = 0.0;
    bool scan = false, calibrate = false;
    double eta = 0.5;
    std::uint64_t grid = 0;
    std::vector<std::int64_t> lambdas{200, 500, 1000};
    std::vector<double> etas{0.4, 0.2, 0.1};
};

inline RunReport do_weyl(Context& ctx, const WeylArgs& a) {
    const std::string mode = a.calibrate ? "calibrate" : (a.scan ? "scan" : "eval");
    RunReport rep("weyl", json{{"mode", mode}, {"lambda", a.lambda}, {"mu", a.mu}, {"q", a.q}, {"alpha", a.alpha},
                               {"eta", a.eta}, {"grid", a.grid}, {"lambdas", a.lambdas}, {"etas", a.etas}},
                  ctx.cal);
    auto& res = rep.results();
    if (a.calibrate) {
        ctx.table.emplace(std::vector<std::string>{"lambda", "eta", "grid", "sup", "sup_refined", "sup_over_eta", "stability", "vacuous"});
        double c1 = 0.0;
        json runs = json::array();
        for (auto l : a.lambdas) {
            for (double e : a.etas) {
                const WeylParams p(l, l);
                const EtaParams eta(e);
                const std::uint64_t g = a.grid ? a.grid : default_grid(static_cast<double>(l));
                json run{{"lambda", l}, {"eta", e}, {"grid", g}};
                MinorArcScan s1;
                try {
                    s1 = minor_arc_sup(p, eta, g);
                } catch (const ResolutionError&) {
                    s1.minor_points = 0;  // major arcs cover the circle
                }
                if (s1.minor_points == 0) {
                    run["vacuous"] = true;
                    ctx.table->row(l, e, g, 0.0, 0.0, 0.0, 0.0, 1);
                    runs.push_back(run);
                    continue;
                }
                const auto s2 = minor_arc_sup(p, eta, 2 * g);
                const double stab = std::abs(s2.sup - s1.sup) / std::max(s1.sup, s2.sup);
                const double ratio = std::max(s1.sup, s2.sup) / e;
                c1 = std::max(c1, ratio);
                run["vacuous"] = false;
                run["scan"] = s1;
                run["refined"] = s2;
                run["stability"] = stab;
                runs.push_back(run);
                ctx.table->row(l, e, g, s1.sup, s2.sup, ratio, stab, 0);
                const std::string tag = "lambda=mu=" + std::to_string(l) + " eta=" + Table::cell_str(e) + " ";
                rep.record(check_le(tag + "grid refinement change", stab, 0.05));
                rep.record(check_le(tag + "sup / eta <= c1", ratio, ctx.cal.c1));
            }
        }
        res["runs"] = runs;
        res["c1_estimate"] = c1;
        return rep;
    }
    const WeylParams p(a.lambda, a.mu, a.q);
    if (a.scan) {
        const auto s = minor_arc_sup(p, EtaParams(a.eta), a.grid);
        res["scan"] = s;
        if (s.minor_points > 0) rep.record(check_le("minor-arc sup <= c1 eta", s.sup, ctx.cal.c1 * s.eta));
        return rep;
    }
    const TorusPoint alpha(a.alpha);
    const auto w = weyl_sum_q(p, alpha);
    res["value"] = {{"re", w.value.real()}, {"im", w.value.imag()}};
    res["abs"] = std::abs(w.value);
    res["terms"] = w.terms;
    res["empty_sum"] = w.empty_sum;
    if (a.q > 1 && a.lambda % a.q == 0 && a.mu % a.q == 0) {
        const double err = weyl_rescale_check(p, alpha);
        res["rescale_error"] = err;
        rep.record(check_le("rescaling identity error", err, 1e-10));
    }
    return rep;
}

struct MollifierArgs {
    std::int64_t q = 1;
    double L = 8.0;
    std::string profile = "FEJER";
    int samples = 10000;
    std::uint64_t seed = 1;
    std::optional<std::int64_t> t;
};

inline RunReport do_mollifier(Context& ctx, const MollifierArgs& a) {
    RunReport rep("mollifier", json{{"q", a.q}, {"L", a.L}, {"profile", a.profile}, {"samples", a.samples}, {"seed", a.seed},
                                    {"t", a.t ? json(*a.t) : json(nullptr)}},
                  ctx.cal);
    const auto kind = parse_profile_kind(a.profile);
    const DiscreteMollifier m(make_profile(kind), a.q, a.L);
    auto& res = rep.results();
    res["kernel"] = mollifier_config(m);
    res["mass"] = m.mass();
    res["untruncated_mass"] = m.untruncated_mass();
    res["tail_bound"] = m.tail_bound(m.truncation_radius());
    res["support_radius"] = 1.0 / (a.L * a.L);
    const double Q = static_cast<double>(m.Q());
    const double r = 1.0 / (a.L * a.L);
    if (!(r < 0.5 / Q)) throw PreconditionError("mollifier: support check needs L^2 > 2 q^2");
    std::mt19937_64 g(a.seed);
    double worst_out = 0.0;
    int drawn = 0;
    while (drawn < a.samples) {
        const auto c = std::uniform_int_distribution<std::int64_t>(0, m.Q() - 1)(g);
        const double off = std::uniform_real_distribution<double>(r, 0.5 / Q)(g);
        if (!(off > r)) continue;
        const double sign = (g() & 1) ? 1.0 : -1.0;
        worst_out = std::max(worst_out, std::abs(m.hat_periodized(TorusPoint(static_cast<double>(c) / Q + sign * off))));
        ++drawn;
    }
    double worst_center = 0.0;
    const std::int64_t centers = std::min<std::int64_t>(m.Q(), 100000);
    for (std::int64_t c = 0; c < centers; ++c)
        worst_center = std::max(worst_center, std::abs(m.hat(TorusPoint(static_cast<double>(c) / Q)) - 1.0));
    res["max_abs_hat_outside"] = worst_out;
    res["max_center_deviation"] = worst_center;
    res["centers_checked"] = centers;
    rep.record(check_le("max |hat| outside M_{q,L}", worst_out, kind == ProfileKind::Fejer ? 0.0 : 1e-12));
    rep.record(check_le("max |hat(a/q^2) - 1|", worst_center, a.L * a.L * 0x1p-52));
    rep.record(check_le("|mass - 1|", std::abs(m.mass() - 1.0), 1e-6));
    if (a.t) {
        const auto f = translation_flatness(m, *a.t);
        res["flatness"] = {{"t", *a.t}, {"value", f.value}, {"tail_bound", f.tail_bound}, {"extent", f.extent}};
    }
    return rep;
}

struct LambdaArgs {
    std::string set, set2;
    std::int64_t n = 0, lambda = 0, mu = 0, q = 1;
};

inline RunReport do_lambda(Context& ctx, const LambdaArgs& a) {
    RunReport rep("lambda", json{{"set", a.set}, {"set2", a.set2}, {"n", a.n}, {"lambda", a.lambda}, {"mu", a.mu}, {"q", a.q}},
                  ctx.cal);
    const auto A = realize(parse_set_spec(a.set, a.n));
    const auto B = a.set2.empty() ? A : realize(parse_set_spec(a.set2, a.n));
    const WeylParams p(a.lambda, a.mu, a.q);
    const auto g = A.indicator(), h = B.indicator();
    const auto direct = lambda_direct(g, h, p);
    const double four = lambda_fourier(g, h, p);
    auto& res = rep.results();
    res["direct"] = direct;
    res["fourier"] = four;
    const double rel = std::abs(direct.value - four) / std::max(1.0, std::abs(direct.value));
    res["relative_difference"] = rel;
    rep.record(check_le("|direct - fourier| / max(1, |direct|)", rel, 1e-8));
    ctx.table.emplace(std::vector<std::string>{"t", "term"});
    for (const auto& [t, v] : direct.per_t) ctx.table->row(t, v);
    return rep;
}

inline std::int64_t default_scale(const EpsilonRegime& r) {
    const EtaParams eta = r.working_eta();
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(r.mu_factor * static_cast<double>(eta.q_checked()) / eta.eta() - 1e-9)));
}

inline RunReport do_dichotomy(Context& ctx, const RunConfig& c) {
    RunReport rep("dichotomy", c.to_json(), ctx.cal);
    const auto regime = c.regime(ctx.cal);
    const std::int64_t lam = c.lambda > 0 ? c.lambda : default_scale(regime);
    const std::int64_t mu = c.mu > 0 ? c.mu : lam;
    DichotomyOptions opt{c.enforce, c.cross_check};
    json runs = json::array();
    ctx.table.emplace(std::vector<std::string>{"seed", "t", "count", "threshold"});
    for (const auto& [seed, spec] : c.specs()) {
        const auto a = realize(spec);
        const auto o = dichotomy_test(a, regime, lam, mu, opt);
        record_outcome(rep, o, a, run_label(seed), c.enforce);
        runs.push_back({{"seed", seed ? json(*seed) : json(nullptr)}, {"set", spec}, {"outcome", o}});
        for (const auto& [t, cnt] : o.counts) ctx.table->row(seed.value_or(0), t, cnt, (o.delta * o.delta - o.epsilon) * static_cast<double>(o.n));
    }
    rep.results()["runs"] = runs;
    return rep;
}

inline RunReport do_iterate(Context& ctx, const RunConfig& c) {
    RunReport rep("iterate", c.to_json(), ctx.cal);
    const auto regime = c.regime(ctx.cal);
    DichotomyOptions opt{c.enforce, c.cross_check};
    json runs = json::array();
    ctx.table.emplace(std::vector<std::string>{"seed", "scale_index", "lambda", "energy", "branch", "witness_t"});
    for (const auto& [seed, spec] : c.specs()) {
        const auto a = realize(spec);
        const auto it = scale_iteration(a, regime, c.j_max, opt);
        const std::string pre = run_label(seed);
        rep.record(relabel(it.plancherel, pre));
        rep.record(check_le(pre + "annulus overlaps (exact)", it.disjoint_exact ? 0.0 : 1.0, 0.0));
        for (const auto& o : it.outcomes) record_outcome(rep, o, a, pre + "[lambda " + std::to_string(o.lambda) + "] ", c.enforce);
        rep.record(check_ge(pre + "random-branch witness found", it.witness ? 1.0 : 0.0, 1.0, true));
        runs.push_back({{"seed", seed ? json(*seed) : json(nullptr)}, {"set", spec}, {"iteration", it}});
        for (std::size_t j = 0; j < it.scales.size(); ++j) {
            const auto& o = it.outcomes[j];
            ctx.table->row(seed.value_or(0), j, it.scales[j], it.energies[j], std::string(to_string(o.branch)),
                           o.witness_t.value_or(0));
        }
    }
    rep.results()["runs"] = runs;
    return rep;
}

struct CensusArgs {
    std::string set;
    std::int64_t n = 0, m = 20;
    int pairs = 100;
    std::uint64_t seed = 1;
};

inline RunReport do_census(Context& ctx, const CensusArgs& a) {
    RunReport rep("census", json{{"set", a.set}, {"n", a.n}, {"m", a.m}, {"pairs", a.pairs}, {"seed", a.seed}}, ctx.cal);
    const auto set = realize(parse_set_spec(a.set, a.n));
    const auto c = good_progressions(set, a.m);
    auto& res = rep.results();
    res["census"] = c;
    if (!c.degenerate) rep.record(check_ge("good progressions >= (delta N)^{3/2} / M", static_cast<double>(c.good_count), c.target, true));
    const auto lim = ProgressionLimits::from(set.n(), set.density(), a.m);
    std::mt19937_64 g(a.seed);
    std::int64_t worst = 0;
    int done = 0;
    const std::int64_t smax = isqrt(set.n() - 1);
    if (smax >= 1 && a.pairs > 0) {
        ctx.table.emplace(std::vector<std::string>{"n0", "s", "overcount"});
        while (done < a.pairs) {
            const auto s = std::uniform_int_distribution<std::int64_t>(1, smax)(g);
            if (s * s >= set.n()) continue;
            const auto n0 = std::uniform_int_distribution<std::int64_t>(1, set.n() - s * s)(g);
            const auto k = overcount_bound_check(n0, s, lim);
            worst = std::max(worst, k);
            ctx.table->row(n0, s, k);
            ++done;
        }
        rep.record(check_le("max overcount <= M^2", static_cast<double>(worst), static_cast<double>(a.m * a.m)));
    }
    res["overcount_max"] = worst;
    res["overcount_pairs"] = done;
    return rep;
}

inline RunReport do_verify(Context& ctx, bool quick, const std::string& vectors_path) {
    const std::filesystem::path vp = vectors_path.empty() ? data_dir() / "vectors.json" : std::filesystem::path(vectors_path);
    std::ifstream in(vp);
    if (!in) throw ParseError("cannot open test vectors " + vp.string());
    json vectors;
    try {
        vectors = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("test vectors " + vp.string() + ": " + e.what());
    }
    RunReport rep("verify", json{{"quick", quick}, {"vectors", vp.filename().string()}}, ctx.cal);
    Verifier v{rep, quick};
    v.vectors(vectors);
    v.fourier();
    v.counting();
    v.mollifier();
    v.weyl(ctx.cal);
    v.decomposition();
    v.iteration(vectors);
    v.baseline();
    rep.results() = v.results;
    return rep;
}

// ---------------------------------------------------------------------------

inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Square-difference density toolkit"};
    app.name("sqdf");
    app.require_subcommand(1);
    Context ctx;
    app.add_option("-o,--output", ctx.global.output, "Write the JSON report here instead of stdout");
    app.add_option("--csv", ctx.global.csv, "Write the tabular projection as CSV");
    app.add_option("--calibration", ctx.global.calibration, "Calibration sidecar (overrides SQDF_CALIBRATION)");
    app.add_flag("--no-timestamp", ctx.global.no_timestamp, "Omit timestamp and timings");

    std::function<RunReport()> action;

    CountArgs ca;
    auto* count = app.add_subcommand("count", "Intersection counts |A cap (A + t^2)|, averages and Varnavides sums");
    count->add_option("--set", ca.set, "Set spec")->required();
    count->add_option("--n", ca.n, "Ambient size N")->required()->check(CLI::PositiveNumber);
    count->add_option("--t", ca.t, "Shift root t");
    count->add_option("--lambda", ca.lambda, "Window start for the average over t in (lambda, lambda+mu]");
    count->add_option("--mu", ca.mu, "Window length");
    count->add_flag("--varnavides", ca.varnavides, "Sum over t <= sqrt(N)");
    count->callback([&] { action = [&] { return do_count(ctx, ca); }; });

    WeylArgs wa;
    auto* weyl = app.add_subcommand("weyl", "Weyl sums, minor-arc scans and c1 calibration");
    weyl->add_option("--lambda", wa.lambda, "lambda");
    weyl->add_option("--mu", wa.mu, "mu");
    weyl->add_option("--q", wa.q, "Restrict to q | t")->capture_default_str();
    weyl->add_option("--alpha", wa.alpha, "Frequency in [0, 1)")->capture_default_str();
    weyl->add_flag("--scan", wa.scan, "Sup over grid points off the major arcs");
    weyl->add_flag("--calibrate", wa.calibrate, "Run the lambda x eta calibration grid");
    weyl->add_option("--eta", wa.eta, "eta for --scan")->capture_default_str();
    weyl->add_option("--grid", wa.grid, "Grid size (default max(10 mu^2, 1e6))");
    weyl->add_option("--lambdas", wa.lambdas, "Calibration lambda = mu values")->capture_default_str();
    weyl->add_option("--etas", wa.etas, "Calibration eta values")->capture_default_str();
    weyl->callback([&] {
        if (!wa.calibrate && (wa.lambda < 1 || wa.mu < 1))
            throw CLI::ValidationError("weyl", "--lambda and --mu are required unless --calibrate");
        action = [&] { return do_weyl(ctx, wa); };
    });

    MollifierArgs ma;
    auto* moll = app.add_subcommand("mollifier", "Kernel mass, transform support and center checks");
    moll->add_option("--q", ma.q, "q")->required();
    moll->add_option("--L", ma.L, "L")->required();
    moll->add_option("--profile", ma.profile, "FEJER or SMOOTH_BUMP")->capture_default_str();
    moll->add_option("--samples", ma.samples, "Sampled points outside the support")->capture_default_str();
    moll->add_option("--seed", ma.seed, "Sampling seed")->capture_default_str();
    moll->add_option("--t", ma.t, "Also report translation flatness at this t");
    moll->callback([&] { action = [&] { return do_mollifier(ctx, ma); }; });

    LambdaArgs la;
    auto* lam = app.add_subcommand("lambda", "Lambda_q(g, h) by direct counting and by Fourier");
    lam->add_option("--set", la.set, "Set spec for g")->required();
    lam->add_option("--set2", la.set2, "Set spec for h (default: same as g)");
    lam->add_option("--n", la.n, "Ambient size N")->required()->check(CLI::PositiveNumber);
    lam->add_option("--lambda", la.lambda, "lambda")->required();
    lam->add_option("--mu", la.mu, "mu")->required();
    lam->add_option("--q", la.q, "q")->capture_default_str();
    lam->callback([&] { action = [&] { return do_lambda(ctx, la); }; });

    auto add_run_options = [](CLI::App* sub, RunConfig& c, std::string& config_path, std::string& profile) {
        sub->add_option("--config", config_path, "JSON config; flags given explicitly override it");
        sub->add_option("--set", c.set_spec, "Set spec");
        sub->add_option("--n", c.n, "Ambient size N");
        sub->add_option("--epsilon", c.epsilon, "epsilon");
        sub->add_option("--eta", c.eta_override, "Working eta (default: eta_eps, or 1/2 when unmaterializable)");
        sub->add_option("--mu-factor", c.mu_factor, "Slack in mu >= mu_factor q / eta");
        sub->add_option("--n-factor", c.n_factor, "Slack in N >= n_factor lambda^2 / eta^2");
        sub->add_option("--profile", profile, "FEJER or SMOOTH_BUMP");
        sub->add_option("--seeds", c.seeds, "Seeds substituted into a random set spec");
        sub->add_flag("--no-enforce", "Report failed preconditions instead of refusing to run");
        sub->add_flag("--cross-check", c.cross_check, "Also integrate annulus energy over explicit arcs");
    };
    // merge a --config file under the explicitly given flags
    auto resolve = [](CLI::App* sub, RunConfig& c, const std::string& config_path, const std::string& profile) {
        RunConfig merged = c;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw ParseError("cannot open config " + config_path);
            json j;
            try {
                j = json::parse(in);
            } catch (const json::exception& e) {
                throw ParseError("config " + config_path + ": " + e.what());
            }
            merged = RunConfig::from_json(j);
            auto given = [&](const char* name) {
                const auto* o = sub->get_option_no_throw(name);
                return o != nullptr && o->count() > 0;
            };
            if (given("--set")) merged.set_spec = c.set_spec;
            if (given("--n")) merged.n = c.n;
            if (given("--epsilon")) merged.epsilon = c.epsilon;
            if (given("--eta")) merged.eta_override = c.eta_override;
            if (given("--mu-factor")) merged.mu_factor = c.mu_factor;
            if (given("--n-factor")) merged.n_factor = c.n_factor;
            if (given("--seeds")) merged.seeds = c.seeds;
            if (given("--lambda")) merged.lambda = c.lambda;
            if (given("--mu")) merged.mu = c.mu;
            if (given("--j-max")) merged.j_max = c.j_max;
            merged.cross_check = c.cross_check;
        }
        if (!profile.empty()) merged.profile = parse_profile_kind(profile);
        if (sub->count("--no-enforce") > 0) merged.enforce = false;
        return merged;
    };

    RunConfig dc;
    std::string dconf, dprof;
    auto* dich = app.add_subcommand("dichotomy", "Single dichotomy test at one scale");
    add_run_options(dich, dc, dconf, dprof);
    dich->add_option("--lambda", dc.lambda, "lambda (default: smallest admissible)");
    dich->add_option("--mu", dc.mu, "mu (default: lambda)");
    dich->callback([&] {
        const RunConfig c = resolve(dich, dc, dconf, dprof);
        action = [&ctx, c] { return do_dichotomy(ctx, c); };
    });

    RunConfig ic;
    std::string iconf, iprof;
    auto* iter = app.add_subcommand("iterate", "Scale iteration with lambda_j = mu_j");
    add_run_options(iter, ic, iconf, iprof);
    iter->add_option("--j-max", ic.j_max, "Maximum number of scales")->capture_default_str();
    iter->callback([&] {
        const RunConfig c = resolve(iter, ic, iconf, iprof);
        action = [&ctx, c] { return do_iterate(ctx, c); };
    });

    CensusArgs cs;
    auto* cen = app.add_subcommand("census", "Good progressions and the overcount check");
    cen->add_option("--set", cs.set, "Set spec")->required();
    cen->add_option("--n", cs.n, "Ambient size N")->required()->check(CLI::PositiveNumber);
    cen->add_option("--m", cs.m, "Progression length M")->capture_default_str();
    cen->add_option("--pairs", cs.pairs, "Random pairs for the overcount check")->capture_default_str();
    cen->add_option("--seed", cs.seed, "Seed for the pairs")->capture_default_str();
    cen->callback([&] { action = [&] { return do_census(ctx, cs); }; });

    bool quick = false;
    std::string vectors;
    auto* ver = app.add_subcommand("verify", "Invariant suite on the bundled test vectors");
    ver->add_flag("--quick", quick, "Smaller case counts");
    ver->add_option("--vectors", vectors, "Test vector file (default: data/vectors.json)");
    ver->callback([&] { action = [&] { return do_verify(ctx, quick, vectors); }; });

    for (auto* sub : app.get_subcommands([](const CLI::App*) { return true; })) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    } catch (const Error& e) {
        err << "sqdf: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (!ctx.global.calibration.empty()) ctx.cal = load_calibration(ctx.global.calibration);
        else ctx.cal = calibration_from_env();
        const RunReport rep = action();
        emit(ctx, rep, out);
        return rep.exit_code();
    } catch (const PreconditionError& e) {
        err << "sqdf: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ParseError& e) {
        err << "sqdf: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "sqdf: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace sqdf::cli
