#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using sqdf::json;

namespace {

struct Run {
    int code;
    std::string out;
    std::string err;
    json report() const { return json::parse(out); }
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "sqdf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = sqdf::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string data(const std::string& rel) { return std::string(SQDF_SOURCE_DIR) + "/data/" + rel; }

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sqdf_cli_" + std::to_string(::getpid()) + "_" + name);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST(Cli, CountExample) {
    const auto r = run({"count", "--set", "congruence:3:0", "--n", "100", "--t", "3", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.report();
    EXPECT_EQ(j["results"]["intersect_count"], 30);
    EXPECT_EQ(j["command"], "count");
    EXPECT_FALSE(j.contains("timestamp"));
}

TEST(Cli, CountAverageAndVarnavides) {
    const auto r = run({"count", "--set", "interval:1:100", "--n", "100", "--lambda", "2", "--mu", "2", "--varnavides",
                        "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_DOUBLE_EQ(r.report()["results"]["average_count"].get<double>(), 87.5);
    EXPECT_EQ(r.report()["results"]["varnavides_sum"], 615);
}

TEST(Cli, WeylExample) {
    const auto r = run({"weyl", "--lambda", "10", "--mu", "5", "--alpha", "0", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NEAR(r.report()["results"]["abs"].get<double>(), 1.0, 1e-15);
}

TEST(Cli, WeylRescaleRecorded) {
    const auto r = run({"weyl", "--lambda", "60", "--mu", "30", "--q", "6", "--alpha", "0.3", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LT(r.report()["results"]["rescale_error"].get<double>(), 1e-10);
}

TEST(Cli, UsageErrorsExit64) {
    EXPECT_EQ(run({"count", "--bogus"}).code, 64);
    EXPECT_EQ(run({"count", "--n", "10"}).code, 64);
    EXPECT_EQ(run({}).code, 64);
    EXPECT_EQ(run({"frobnicate"}).code, 64);
    EXPECT_EQ(run({"weyl", "--alpha", "0.1"}).code, 64);
}

TEST(Cli, PreconditionAndParseErrorsExit64) {
    const auto r = run({"count", "--set", "random:1.5:1", "--n", "10"});
    EXPECT_EQ(r.code, 64);
    EXPECT_NE(r.err.find("density"), std::string::npos);
    EXPECT_EQ(run({"count", "--set", "file:/nonexistent/x.txt", "--n", "10"}).code, 64);
    EXPECT_EQ(run({"count", "--set", "interval:1:200", "--n", "100", "--lambda", "10", "--mu", "5"}).code, 64);
    EXPECT_EQ(run({"dichotomy", "--set", "random:0.5:1", "--n", "100000", "--eta", "0.5", "--lambda", "10", "--mu", "10"}).code, 64);
}

TEST(Cli, HelpOnEveryLevel) {
    for (const char* sub : {"count", "weyl", "mollifier", "lambda", "dichotomy", "iterate", "census", "verify"}) {
        const auto r = run({sub, "--help"});
        EXPECT_EQ(r.code, 0) << sub;
        EXPECT_NE(r.out.find("Usage"), std::string::npos) << sub;
    }
    const auto top = run({"--help"});
    EXPECT_EQ(top.code, 0);
    EXPECT_NE(top.out.find("census"), std::string::npos);
}

TEST(Cli, SetFiles) {
    const auto t = run({"count", "--set", "file:" + data("sets/mod7.txt"), "--n", "1000", "--no-timestamp"});
    const auto b = run({"count", "--set", "file:" + data("sets/mod7.bin"), "--n", "1000", "--no-timestamp"});
    ASSERT_EQ(t.code, 0) << t.err;
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(t.report()["results"], b.report()["results"]);
    EXPECT_EQ(t.report()["results"]["size"], 285);
}

TEST(Cli, MollifierChecks) {
    const auto r = run({"mollifier", "--q", "2", "--L", "20", "--samples", "2000", "--t", "4", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.report();
    EXPECT_EQ(j["results"]["max_abs_hat_outside"].get<double>(), 0.0);
    EXPECT_EQ(j["invariants"].size(), 3u);
    EXPECT_EQ(run({"mollifier", "--q", "4", "--L", "4"}).code, 64);
}

TEST(Cli, LambdaPathsAgree) {
    const auto r = run({"lambda", "--set", "random:0.4:3", "--set2", "congruence:2:0", "--n", "800", "--lambda", "12",
                        "--mu", "12", "--q", "3", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LT(r.report()["results"]["relative_difference"].get<double>(), 1e-8);
}

TEST(Cli, DichotomyConfigAndOverride) {
    const auto r = run({"dichotomy", "--config", data("configs/dichotomy_desk.json"), "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto j = r.report();
    ASSERT_EQ(j["results"]["runs"].size(), 3u);
    for (const auto& run : j["results"]["runs"]) EXPECT_EQ(run["outcome"]["branch"], "RANDOM");
    const auto o = run({"dichotomy", "--config", data("configs/dichotomy_desk.json"), "--seeds", "9", "--no-timestamp"});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_EQ(o.report()["results"]["runs"].size(), 1u);
    EXPECT_EQ(o.report()["config"]["seeds"], json::array({9}));
}

TEST(Cli, UnenforcedPreconditionsExit2) {
    // eps = 0.1 > delta^2 = 0.09: reported, run retained
    const auto r = run({"dichotomy", "--set", "random:0.3:5", "--n", "100000", "--epsilon", "0.1", "--eta", "0.5",
                        "--mu-factor", "2", "--n-factor", "1", "--no-enforce", "--no-timestamp"});
    EXPECT_EQ(r.code, 2) << r.err;
    bool found = false;
    const auto j = r.report();
    for (const auto& c : j["invariants"])
        if (c["name"] == "eps <= delta^2") {
            found = true;
            EXPECT_FALSE(c["holds"].get<bool>());
            EXPECT_TRUE(c["asymptotic"].get<bool>());
        }
    EXPECT_TRUE(found);
    const auto strict = run({"dichotomy", "--set", "random:0.3:5", "--n", "100000", "--epsilon", "0.1", "--eta", "0.5",
                             "--mu-factor", "2", "--n-factor", "1"});
    EXPECT_EQ(strict.code, 64);
}

TEST(Cli, InvariantFailureExit1) {
    const auto cal = temp_path("cal.json");
    {
        std::ofstream f(cal);
        f << R"({"c1": 0.01})";
    }
    const auto r = run({"weyl", "--lambda", "200", "--mu", "200", "--scan", "--eta", "0.4", "--calibration", cal.string(),
                        "--no-timestamp"});
    EXPECT_EQ(r.code, 1) << r.err;
    EXPECT_EQ(r.report()["calibration"]["c1"], 0.01);
    std::filesystem::remove(cal);
}

TEST(Cli, IterateWritesCsv) {
    const auto csv = temp_path("it.csv");
    const auto r = run({"iterate", "--config", data("configs/iterate_desk.json"), "--seeds", "3", "--csv", csv.string(),
                        "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = slurp(csv);
    EXPECT_EQ(text.rfind("seed,scale_index,lambda,energy,branch,witness_t\n", 0), 0u);
    EXPECT_NE(text.find("3,0,48,"), std::string::npos);
    EXPECT_NE(text.find("3,1,192,"), std::string::npos);
    const auto j = r.report();
    EXPECT_TRUE(j["results"]["runs"][0]["iteration"]["disjoint_exact"].get<bool>());
    std::filesystem::remove(csv);
}

TEST(Cli, CensusRun) {
    const auto r = run({"census", "--set", "random:0.4:1", "--n", "20000", "--m", "10", "--pairs", "50", "--no-timestamp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_LE(r.report()["results"]["overcount_max"].get<int>(), 100);
}

TEST(Cli, DeterministicReports) {
    const std::vector<std::string> args{"dichotomy", "--config", data("configs/dichotomy_desk.json"), "--no-timestamp"};
    const auto a = run(args), b = run(args);
    EXPECT_EQ(a.out, b.out);
    const auto t = run({"count", "--set", "congruence:3:0", "--n", "100", "--t", "3"});
    EXPECT_TRUE(t.report().contains("timestamp"));
    EXPECT_TRUE(t.report().contains("timings"));
}

TEST(Cli, OutputFile) {
    const auto p = temp_path("out.json");
    const auto r = run({"count", "--set", "congruence:3:0", "--n", "100", "--t", "3", "--no-timestamp", "-o", p.string()});
    ASSERT_EQ(r.code, 0);
    EXPECT_TRUE(r.out.empty());
    EXPECT_EQ(json::parse(slurp(p))["results"]["intersect_count"], 30);
    std::filesystem::remove(p);
}

TEST(Cli, VerifyQuick) {
    const auto r = run({"verify", "--quick", "--vectors", data("vectors.json"), "--no-timestamp"});
    EXPECT_EQ(r.code, 0) << r.out.substr(0, 2000);
    const auto j = r.report();
    for (const auto& c : j["invariants"]) EXPECT_TRUE(c["holds"].get<bool>()) << c.dump();
    EXPECT_EQ(run({"verify", "--vectors", "/nonexistent.json"}).code, 64);
}
