#include "sqdf/io/json.hpp"
#include "sqdf/sets.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

using namespace sqdf;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("sqdf_test_" + std::to_string(::getpid()) + "_" + name);
}

SetSpec random_spec(std::mt19937_64& g, std::int64_t n, int depth = 0) {
    std::uniform_int_distribution<int> kind(0, depth == 0 ? 3 : 2);
    SetSpec s;
    s.n = n;
    switch (kind(g)) {
        case 0:
            s.kind = SetKind::Random;
            s.density = std::uniform_real_distribution<double>(0.0, 1.0)(g);
            s.seed = g() % 100000;
            break;
        case 1: {
            s.kind = SetKind::Congruence;
            const auto m = std::uniform_int_distribution<std::int64_t>(1, 20)(g);
            s.modulus = m;
            s.residue = std::uniform_int_distribution<std::int64_t>(0, m - 1)(g);
            break;
        }
        case 2: {
            s.kind = SetKind::Interval;
            auto lo = std::uniform_int_distribution<std::int64_t>(1, n)(g);
            auto hi = std::uniform_int_distribution<std::int64_t>(1, n)(g);
            if (lo > hi) std::swap(lo, hi);
            s.bounds = std::make_pair(lo, hi);
            break;
        }
        default: {
            s.kind = SetKind::Union;
            const int k = std::uniform_int_distribution<int>(1, 3)(g);
            for (int i = 0; i < k; ++i) s.parts.push_back(random_spec(g, n, 1));
        }
    }
    return s;
}

}  // namespace

TEST(SetSpec, CongruenceExample) {
    const auto a = realize(parse_set_spec("congruence:3:0", 10));
    EXPECT_EQ(a.members(), (std::vector<std::int64_t>{3, 6, 9}));
    const auto b = realize(parse_set_spec("congruence:3:1", 10));
    EXPECT_EQ(b.members(), (std::vector<std::int64_t>{1, 4, 7, 10}));
}

TEST(SetSpec, IntervalAndUnion) {
    EXPECT_EQ(realize(parse_set_spec("interval:2:4", 10)).members(), (std::vector<std::int64_t>{2, 3, 4}));
    EXPECT_EQ(realize(parse_set_spec("union:interval:1:2;congruence:5:0", 10)).members(),
              (std::vector<std::int64_t>{1, 2, 5, 10}));
}

TEST(SetSpec, RandomIsDeterministic) {
    const auto s = parse_set_spec("random:0.5:7", 100000);
    const auto a = realize(s), b = realize(s);
    EXPECT_EQ(a, b);
    EXPECT_NEAR(a.density(), 0.5, 0.01);
    EXPECT_NE(a, realize(parse_set_spec("random:0.5:8", 100000)));
}

TEST(SetSpec, RandomCoinRule) {
    // one draw per element, in order
    std::mt19937_64 rng(42);
    std::vector<std::int64_t> want;
    for (std::int64_t x = 1; x <= 50; ++x)
        if (static_cast<double>(rng() >> 11) * 0x1.0p-53 < 0.3) want.push_back(x);
    EXPECT_EQ(realize(parse_set_spec("random:0.3:42", 50)).members(), want);
    EXPECT_EQ(realize(parse_set_spec("random:0:1", 50)).size(), 0);
    EXPECT_EQ(realize(parse_set_spec("random:1:1", 50)).size(), 50);
}

TEST(SetSpec, Errors) {
    EXPECT_THROW(parse_set_spec("random:1.5:1", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("random:-0.1:1", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("congruence:0:0", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("congruence:3:3", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("interval:5:4", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("interval:1:11", 10), PreconditionError);
    EXPECT_THROW(parse_set_spec("bogus:1", 10), ParseError);
    EXPECT_THROW(parse_set_spec("congruence", 10), ParseError);
    EXPECT_THROW(parse_set_spec("congruence:x:1", 10), ParseError);
}

TEST(SetSpec, StringRoundTrip) {
    std::mt19937_64 g(2024);
    for (int i = 0; i < 100; ++i) {
        const auto s = random_spec(g, 1 + static_cast<std::int64_t>(g() % 2000));
        const auto back = parse_set_spec(to_string(s), s.n);
        EXPECT_EQ(to_string(back), to_string(s));
        EXPECT_EQ(realize(back), realize(s));
    }
}

TEST(SetFile, TextAndBinaryRoundTrip) {
    std::mt19937_64 g(99);
    for (int i = 0; i < 100; ++i) {
        const auto a = realize(random_spec(g, 1 + static_cast<std::int64_t>(g() % 3000)));
        std::stringstream t, b;
        write_text(t, a);
        write_binary(b, a);
        EXPECT_EQ(read_text(t), a);
        EXPECT_EQ(read_binary(b), a);
    }
}

TEST(SetFile, FileSniffing) {
    const auto a = realize(parse_set_spec("congruence:7:2", 1000));
    const auto pt = temp_path("a.txt"), pb = temp_path("a.bin");
    save_set_file(pt, a, false);
    save_set_file(pb, a, true);
    EXPECT_EQ(load_set_file(pt), a);
    EXPECT_EQ(load_set_file(pb), a);
    EXPECT_EQ(std::filesystem::file_size(pb), 4u + 8u + 125u);
    EXPECT_EQ(realize(parse_set_spec("file:" + pb.string(), 1000)), a);
    EXPECT_THROW(realize(parse_set_spec("file:" + pb.string(), 999)), ParseError);
    std::filesystem::remove(pt);
    std::filesystem::remove(pb);
    EXPECT_THROW(load_set_file(pt), ParseError);
}

TEST(SetFile, BinaryLayout) {
    IndicatorSet a(9);
    a.insert(1);
    a.insert(9);
    std::stringstream b;
    write_binary(b, a);
    const std::string s = b.str();
    ASSERT_EQ(s.size(), 14u);
    EXPECT_EQ(s.substr(0, 4), "SQDF");
    EXPECT_EQ(static_cast<unsigned char>(s[4]), 9);
    EXPECT_EQ(static_cast<unsigned char>(s[12]), 1);
    EXPECT_EQ(static_cast<unsigned char>(s[13]), 1);
}

TEST(SetFile, TextParseErrors) {
    auto msg = [](const std::string& text) {
        std::istringstream in(text);
        try {
            read_text(in);
        } catch (const ParseError& e) {
            return std::string(e.what());
        }
        return std::string("no error");
    };
    EXPECT_NE(msg("N 10\n3\nfoo\n").find("line 3"), std::string::npos);
    EXPECT_NE(msg("# c\n\nN 10\n11\n").find("line 4"), std::string::npos);
    EXPECT_NE(msg("5\n").find("line 1"), std::string::npos);
    EXPECT_NE(msg("# only comments\n").find("missing header"), std::string::npos);
    std::istringstream ok("# header\nN 5\n\n  2 \n# x\n5\r\n");
    EXPECT_EQ(read_text(ok).members(), (std::vector<std::int64_t>{2, 5}));
}

TEST(SetFile, BinaryParseErrors) {
    std::istringstream bad_magic(std::string("SQDX") + std::string(9, '\0'));
    EXPECT_THROW(read_binary(bad_magic), ParseError);
    std::string trunc = "SQDF";
    trunc += std::string("\x10\0\0\0\0\0\0\0", 8);
    trunc += '\x01';
    std::istringstream t(trunc);
    EXPECT_THROW(read_binary(t), ParseError);
    std::string extra = "SQDF";
    extra += std::string("\x03\0\0\0\0\0\0\0", 8);
    extra += '\x08';
    std::istringstream e(extra);
    EXPECT_THROW(read_binary(e), ParseError);
}

TEST(Json, CalibrationSidecar) {
    const auto p = temp_path("cal.json");
    {
        std::ofstream out(p);
        out << R"({"c1": 2.5, "c_flat": 4})";
    }
    const auto c = load_calibration(p);
    EXPECT_EQ(c.c1, 2.5);
    EXPECT_EQ(c.c_flat, 4.0);
    EXPECT_EQ(c.c2, CalibrationConstants{}.c2);
    {
        std::ofstream out(p);
        out << "{not json";
    }
    EXPECT_THROW(load_calibration(p), ParseError);
    std::filesystem::remove(p);
}

TEST(Json, RunReportExitCodes) {
    RunReport r("x", json::object(), frozen_calibration());
    EXPECT_EQ(r.exit_code(), 0);
    r.record(check_le("soft", 2, 1, true));
    EXPECT_EQ(r.exit_code(), 2);
    r.record(check_le("hard", 2, 1));
    EXPECT_EQ(r.exit_code(), 1);
    const auto j = r.to_json(false);
    EXPECT_FALSE(j.contains("timestamp"));
    EXPECT_FALSE(j.contains("timings"));
    EXPECT_EQ(j["invariants"].size(), 2u);
    EXPECT_TRUE(r.to_json(true).contains("timestamp"));
}

TEST(Json, IntegerFunctionRoundTrip) {
    const IntegerFunction f(-3, {1.0, 0.5, -2.0});
    const json j = f;
    const auto g = j.get<IntegerFunction>();
    EXPECT_EQ(g.start(), -3);
    EXPECT_EQ(g(-1), -2.0);
}
