#pragma once

// JSON encodings of the library types, the calibration sidecar and the run
// report envelope.

#include "sqdf/calibration.hpp"
#include "sqdf/counting.hpp"
#include "sqdf/dichotomy.hpp"
#include "sqdf/fourier.hpp"
#include "sqdf/mollifier.hpp"
#include "sqdf/sets.hpp"
#include "sqdf/weyl.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>

namespace sqdf {

using json = nlohmann::json;

inline void to_json(json& j, const IntegerFunction& f) {
    j = json{{"start", f.is_zero_repr() ? 0 : f.start()}, {"values", f.values()}};
}

inline void from_json(const json& j, IntegerFunction& f) {
    f = IntegerFunction(j.at("start").get<std::int64_t>(), j.at("values").get<std::vector<double>>());
}

inline void to_json(json& j, const ArcSystem& a) {
    j = json::array();
    for (const auto& arc : a.arcs()) j.push_back({arc.lo, arc.hi});
}

inline void from_json(const json& j, ArcSystem& a) {
    std::vector<Arc> arcs;
    for (const auto& e : j) arcs.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    a = ArcSystem(std::move(arcs));
}

inline void to_json(json& j, const Inequality& c) {
    j = json{{"name", c.name}, {"lhs", c.lhs}, {"rhs", c.rhs}, {"holds", c.holds}, {"asymptotic", c.asymptotic}};
}

inline void to_json(json& j, const CalibrationConstants& c) {
    j = json{{"c1", c.c1}, {"c2", c.c2}, {"c_eta", c.c_eta}, {"c_flat", c.c_flat}, {"c_strength", c.c_strength}};
}

inline void from_json(const json& j, CalibrationConstants& c) {
    c = CalibrationConstants{};
    if (j.contains("c1")) c.c1 = j.at("c1").get<double>();
    if (j.contains("c2")) c.c2 = j.at("c2").get<double>();
    if (j.contains("c_eta")) c.c_eta = j.at("c_eta").get<double>();
    if (j.contains("c_flat")) c.c_flat = j.at("c_flat").get<double>();
    if (j.contains("c_strength")) c.c_strength = j.at("c_strength").get<double>();
}

inline CalibrationConstants load_calibration(const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw ParseError("cannot open calibration file " + p.string());
    try {
        const json j = json::parse(in);
        return j.get<CalibrationConstants>();
    } catch (const json::exception& e) {
        throw ParseError("calibration file " + p.string() + ": " + e.what());
    }
}

/// Sidecar named by SQDF_CALIBRATION when set, otherwise the frozen values.
inline CalibrationConstants calibration_from_env() {
    if (const char* p = std::getenv("SQDF_CALIBRATION"); p != nullptr && *p != '\0') return load_calibration(p);
    return frozen_calibration();
}

inline json mollifier_config(const DiscreteMollifier& m) {
    return json{{"profile", to_string(m.profile().kind())},
                {"q", m.q()},
                {"L", m.L()},
                {"h", m.h()},
                {"truncation_radius", m.truncation_radius()}};
}

inline void to_json(json& j, const MinorArcScan& s) {
    j = json{{"eta", s.eta}, {"lambda", s.lambda}, {"mu", s.mu}, {"grid_size", s.grid_size},
             {"minor_points", s.minor_points}, {"sup", s.sup}, {"sup_over_eta", s.sup / s.eta},
             {"argmax", s.argmax}};
}

inline void to_json(json& j, const LambdaResult& r) {
    json per = json::object();
    for (const auto& [t, v] : r.per_t) per[std::to_string(t)] = v;
    j = json{{"value", r.value}, {"t_count", r.t_count}, {"empty", r.empty}, {"per_t", per}};
}

inline void to_json(json& j, const StructuredEnergy& s) {
    j = json{{"smooth", s.smooth}, {"annulus", s.annulus}, {"hole", s.hole}, {"r0", s.r0},
             {"inner", s.inner}, {"outer", s.outer}, {"q", s.q},
             {"arc_cross_check", s.arc_cross_check ? json(*s.arc_cross_check) : json(nullptr)},
             {"checks", json::array({s.split, s.contract, s.implication})}};
}

inline void to_json(json& j, const DichotomyOutcome& o) {
    json counts = json::object();
    for (const auto& [t, c] : o.counts) counts[std::to_string(t)] = c;
    j = json{{"branch", to_string(o.branch)},
             {"witness_t", o.witness_t ? json(*o.witness_t) : json(nullptr)},
             {"witness_count", o.witness_count ? json(*o.witness_count) : json(nullptr)},
             {"annulus_energy", o.annulus_energy ? json(*o.annulus_energy) : json(nullptr)},
             {"threshold_used", o.threshold_used},
             {"pass", o.pass},
             {"delta", o.delta},
             {"epsilon", o.epsilon},
             {"eta", o.eta},
             {"eta_surrogate", o.eta_surrogate},
             {"q", o.q},
             {"lambda", o.lambda},
             {"mu", o.mu},
             {"n", o.n},
             {"preconditions", o.preconditions},
             {"counts", counts},
             {"strengthened_q", o.strengthened_q},
             {"strengthened_all", o.strengthened_all},
             {"strength", o.strength},
             {"structured", o.structured ? json(*o.structured) : json(nullptr)}};
}

inline void to_json(json& j, const ScaleIteration& s) {
    j = json{{"witness", s.witness ? json{{"t", s.witness->t}, {"count", s.witness->count},
                                          {"scale_index", s.witness->scale_index}}
                                   : json(nullptr)},
             {"scales", s.scales},
             {"energies", s.energies},
             {"energy_sum", s.energy_sum},
             {"ceiling", s.ceiling},
             {"plancherel", s.plancherel},
             {"disjoint_exact", s.disjoint_exact},
             {"max_overlap_measure", s.max_overlap_measure},
             {"j_cap", s.j_cap},
             {"outcomes", s.outcomes}};
}

inline void to_json(json& j, const CensusResult& c) {
    j = json{{"good_count", c.good_count}, {"eligible", c.eligible}, {"threshold", c.threshold},
             {"target", c.target},         {"delta", c.delta},       {"t_max", c.t_max},
             {"n_max", c.n_max},           {"degenerate", c.degenerate},
             {"meets_target", static_cast<double>(c.good_count) >= c.target}};
}

inline void to_json(json& j, const RandomBaseline& b) {
    j = json{{"delta", b.delta}, {"literal_mean", b.literal_mean}, {"pooled_ratio", b.pooled_ratio},
             {"pairs", b.pairs}, {"standard_error", b.standard_error}};
}

inline void to_json(json& j, const MainTermReport& r) {
    j = json{{"exact", r.exact},       {"windowed", r.windowed}, {"window_bound", r.window_bound},
             {"delta", r.delta},       {"target", r.target},     {"flatness", r.flatness},
             {"preconditions", r.preconditions}, {"windowed_agreement", r.windowed_agreement},
             {"inequality", r.inequality}, {"preconditions_hold", r.preconditions_hold}};
}

inline void to_json(json& j, const ErrorTermSup& r) {
    j = json{{"sup", r.sup}, {"coarse_sup", r.coarse_sup}, {"argmax", r.argmax}, {"grid", r.grid},
             {"q_prime", r.q_prime}, {"l2_prime", r.l2_prime}, {"eta", r.eta}, {"eta_prime", r.eta_prime}};
}

inline void to_json(json& j, const EtaSelection& r) {
    j = json{{"eta", r.eta}, {"eta_prime", r.eta_prime}, {"j", r.j}, {"j_bound", r.j_bound},
             {"sups", r.sups}, {"q_used", r.q_used}, {"q_capped", r.q_capped},
             {"implied_c_prime", r.implied_c_prime}, {"checks", r.checks}};
}

inline void to_json(json& j, const SetSpec& s) {
    j = json{{"kind", to_string(s.kind)}, {"n", s.n}, {"spec", to_string(s)}};
}

// ---------------------------------------------------------------------------
// run report

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

/// Envelope shared by every subcommand: config echo, calibration, results,
/// the inequality ledger and (optionally) timing data.
class RunReport {
public:
    RunReport(std::string command, json config, const CalibrationConstants& cal)
        : command_(std::move(command)), config_(std::move(config)), cal_(cal),
          start_(std::chrono::steady_clock::now()) {}

    json& results() { return results_; }

    void record(const Inequality& c) { ledger_.push_back(c); }
    void record(const std::vector<Inequality>& cs) {
        for (const auto& c : cs) record(c);
    }

    /// 0 when every non-asymptotic inequality holds, 1 when one fails, 2 when
    /// only asymptotic ones fail.
    int exit_code() const {
        bool hard = false, soft = false;
        for (const auto& c : ledger_) {
            if (c.holds) continue;
            (c.asymptotic ? soft : hard) = true;
        }
        return hard ? 1 : (soft ? 2 : 0);
    }

    json to_json(bool with_timestamp) const {
        json j{{"tool", "sqdf"},
               {"version", "1.0.0"},
               {"command", command_},
               {"config", config_},
               {"calibration", cal_},
               {"results", results_},
               {"invariants", ledger_},
               {"exit_code", exit_code()}};
        if (with_timestamp) {
            j["timestamp"] = utc_timestamp();
            j["timings"] = {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count()}};
        }
        return j;
    }

private:
    std::string command_;
    json config_;
    CalibrationConstants cal_;
    json results_ = json::object();
    std::vector<Inequality> ledger_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace sqdf
