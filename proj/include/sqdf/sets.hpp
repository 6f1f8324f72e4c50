#pragma once

// Set specifications, their realization, and the text/binary set formats.
//
// Spec grammar (n is supplied separately):
//     random:<density>:<seed>
//     congruence:<modulus>:<residue>
//     interval:<lo>:<hi>
//     union:<spec>;<spec>;...
//     file:<path>
//
// RANDOM realization: std::mt19937_64 seeded with <seed>; for x = 1..n in
// order draw one 64-bit word w, u = (w >> 11) * 2^-53, and x is a member iff
// u < density.
//
// Text format: a header line "N <n>", then one member per line.  Blank lines
// and lines starting with '#' are ignored.
// Binary format: "SQDF", n as 8 bytes little endian, then ceil(n/8) bytes of
// membership bits, element x at bit (x-1) % 8 of byte (x-1) / 8.

#include "sqdf/counting.hpp"
#include "sqdf/error.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace sqdf {

enum class SetKind { Random, Congruence, Interval, Union, File };

inline const char* to_string(SetKind k) {
    switch (k) {
        case SetKind::Random: return "RANDOM";
        case SetKind::Congruence: return "CONGRUENCE";
        case SetKind::Interval: return "INTERVAL";
        case SetKind::Union: return "UNION";
        case SetKind::File: return "FILE";
    }
    return "?";
}

struct SetSpec {
    SetKind kind = SetKind::Interval;
    std::int64_t n = 0;
    std::optional<double> density;
    std::optional<std::int64_t> modulus;
    std::optional<std::int64_t> residue;
    std::optional<std::pair<std::int64_t, std::int64_t>> bounds;
    std::optional<std::string> path;
    std::optional<std::uint64_t> seed;
    std::vector<SetSpec> parts;  // UNION

    /// Checks the field invariants for this kind.
    void validate() const {
        switch (kind) {
            case SetKind::Random:
                if (!density || !seed) throw PreconditionError("random set needs density and seed");
                if (!(*density >= 0.0 && *density <= 1.0)) throw PreconditionError("density outside [0,1]");
                break;
            case SetKind::Congruence:
                if (!modulus || !residue) throw PreconditionError("congruence set needs modulus and residue");
                if (*modulus <= 0) throw PreconditionError("congruence modulus must be > 0");
                if (*residue < 0 || *residue >= *modulus) throw PreconditionError("congruence residue must be in [0, modulus)");
                break;
            case SetKind::Interval:
                if (!bounds) throw PreconditionError("interval set needs bounds");
                if (bounds->first < 1 || bounds->first > bounds->second || bounds->second > n)
                    throw PreconditionError("interval needs 1 <= lo <= hi <= n");
                break;
            case SetKind::Union:
                if (parts.empty()) throw PreconditionError("union needs at least one part");
                for (const auto& p : parts) p.validate();
                break;
            case SetKind::File:
                if (!path || path->empty()) throw PreconditionError("file set needs a path");
                break;
        }
        if (kind != SetKind::File && n < 1) throw PreconditionError("set size n must be >= 1");
    }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    while (true) {
        const auto next = s.find(sep, pos);
        out.push_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

template <class T>
T parse_number(std::string_view s, const char* what) {
    T v{};
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) throw ParseError(std::string("bad ") + what + ": '" + std::string(s) + "'");
    return v;
}

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace detail

inline SetSpec parse_set_spec(std::string_view text, std::int64_t n) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) throw ParseError("set spec needs a kind prefix: '" + std::string(text) + "'");
    const auto kind = text.substr(0, colon);
    const auto rest = text.substr(colon + 1);
    SetSpec s;
    s.n = n;
    if (kind == "random") {
        const auto f = detail::split(rest, ':');
        if (f.size() != 2) throw ParseError("random spec is random:<density>:<seed>");
        s.kind = SetKind::Random;
        s.density = detail::parse_number<double>(f[0], "density");
        s.seed = detail::parse_number<std::uint64_t>(f[1], "seed");
    } else if (kind == "congruence") {
        const auto f = detail::split(rest, ':');
        if (f.size() != 2) throw ParseError("congruence spec is congruence:<modulus>:<residue>");
        s.kind = SetKind::Congruence;
        s.modulus = detail::parse_number<std::int64_t>(f[0], "modulus");
        s.residue = detail::parse_number<std::int64_t>(f[1], "residue");
    } else if (kind == "interval") {
        const auto f = detail::split(rest, ':');
        if (f.size() != 2) throw ParseError("interval spec is interval:<lo>:<hi>");
        s.kind = SetKind::Interval;
        s.bounds = std::pair{detail::parse_number<std::int64_t>(f[0], "lo"), detail::parse_number<std::int64_t>(f[1], "hi")};
    } else if (kind == "union") {
        s.kind = SetKind::Union;
        for (auto part : detail::split(rest, ';')) s.parts.push_back(parse_set_spec(part, n));
    } else if (kind == "file") {
        s.kind = SetKind::File;
        s.path = std::string(rest);
    } else {
        throw ParseError("unknown set kind '" + std::string(kind) + "'");
    }
    s.validate();
    return s;
}

inline std::string to_string(const SetSpec& s) {
    switch (s.kind) {
        case SetKind::Random: return "random:" + detail::format_double(*s.density) + ":" + std::to_string(*s.seed);
        case SetKind::Congruence: return "congruence:" + std::to_string(*s.modulus) + ":" + std::to_string(*s.residue);
        case SetKind::Interval:
            return "interval:" + std::to_string(s.bounds->first) + ":" + std::to_string(s.bounds->second);
        case SetKind::Union: {
            std::string out = "union:";
            for (std::size_t i = 0; i < s.parts.size(); ++i) out += (i ? ";" : "") + to_string(s.parts[i]);
            return out;
        }
        case SetKind::File: return "file:" + *s.path;
    }
    return {};
}

/// Coin rule for RANDOM sets: u = (w >> 11) 2^-53 < density.
inline bool random_coin(std::mt19937_64& rng, double density) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return u < density;
}

// ---------------------------------------------------------------------------
// file formats

inline void write_text(std::ostream& os, const IndicatorSet& a) {
    os << "N " << a.n() << '\n';
    for (std::int64_t x = 1; x <= a.n(); ++x)
        if (a.contains(x)) os << x << '\n';
}

inline IndicatorSet read_text(std::istream& is) {
    std::string line;
    std::int64_t lineno = 0;
    std::optional<IndicatorSet> a;
    auto fail = [&](const std::string& msg) { throw ParseError("line " + std::to_string(lineno) + ": " + msg); };
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        std::string_view v(line);
        v.remove_prefix(first);
        while (!v.empty() && (v.back() == ' ' || v.back() == '\t')) v.remove_suffix(1);
        if (!a) {
            if (v.size() < 2 || v[0] != 'N' || (v[1] != ' ' && v[1] != '\t')) fail("expected header 'N <value>'");
            v.remove_prefix(2);
            while (!v.empty() && (v.front() == ' ' || v.front() == '\t')) v.remove_prefix(1);
            std::int64_t n = 0;
            try {
                n = detail::parse_number<std::int64_t>(v, "N");
            } catch (const ParseError& e) {
                fail(e.what());
            }
            if (n < 1) fail("N must be >= 1");
            a.emplace(n);
            continue;
        }
        std::int64_t x = 0;
        try {
            x = detail::parse_number<std::int64_t>(v, "member");
        } catch (const ParseError& e) {
            fail(e.what());
        }
        if (x < 1 || x > a->n()) fail("member " + std::to_string(x) + " outside [1, N]");
        a->insert(x);
    }
    if (!a) throw ParseError("line " + std::to_string(lineno) + ": missing header 'N <value>'");
    return std::move(*a);
}

inline void write_binary(std::ostream& os, const IndicatorSet& a) {
    os.write("SQDF", 4);
    const auto n = static_cast<std::uint64_t>(a.n());
    for (int i = 0; i < 8; ++i) os.put(static_cast<char>((n >> (8 * i)) & 0xff));
    const std::size_t bytes = static_cast<std::size_t>((a.n() + 7) / 8);
    std::vector<unsigned char> buf(bytes, 0);
    for (std::int64_t x = 1; x <= a.n(); ++x)
        if (a.contains(x)) buf[static_cast<std::size_t>((x - 1) / 8)] |= static_cast<unsigned char>(1u << ((x - 1) % 8));
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

inline IndicatorSet read_binary(std::istream& is) {
    char magic[4];
    if (!is.read(magic, 4) || std::string_view(magic, 4) != "SQDF") throw ParseError("binary set: bad magic");
    unsigned char nb[8];
    if (!is.read(reinterpret_cast<char*>(nb), 8)) throw ParseError("binary set: truncated header");
    std::uint64_t n = 0;
    for (int i = 0; i < 8; ++i) n |= static_cast<std::uint64_t>(nb[i]) << (8 * i);
    if (n < 1 || n > (1ULL << 40)) throw ParseError("binary set: N out of range");
    const std::size_t bytes = static_cast<std::size_t>((n + 7) / 8);
    std::vector<unsigned char> buf(bytes);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes)))
        throw ParseError("binary set: truncated body");
    IndicatorSet a(static_cast<std::int64_t>(n));
    for (std::uint64_t i = 0; i < n; ++i)
        if (buf[i / 8] & (1u << (i % 8))) a.insert(static_cast<std::int64_t>(i + 1));
    if (n % 8 != 0 && (buf.back() >> (n % 8)) != 0) throw ParseError("binary set: bits set beyond N");
    return a;
}

/// Reads a set file, choosing the format from its first bytes.
inline IndicatorSet load_set_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ParseError("cannot open set file " + p.string());
    char head[4] = {0, 0, 0, 0};
    in.read(head, 4);
    in.clear();
    in.seekg(0);
    if (std::string_view(head, 4) == "SQDF") return read_binary(in);
    return read_text(in);
}

inline void save_set_file(const std::filesystem::path& p, const IndicatorSet& a, bool binary) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ParseError("cannot write set file " + p.string());
    if (binary) write_binary(out, a);
    else write_text(out, a);
}

// ---------------------------------------------------------------------------
// realization

inline IndicatorSet realize(const SetSpec& s) {
    s.validate();
    switch (s.kind) {
        case SetKind::Random: {
            IndicatorSet a(s.n);
            std::mt19937_64 rng(*s.seed);
            for (std::int64_t x = 1; x <= s.n; ++x)
                if (random_coin(rng, *s.density)) a.insert(x);
            return a;
        }
        case SetKind::Congruence: {
            IndicatorSet a(s.n);
            const std::int64_t first = *s.residue == 0 ? *s.modulus : *s.residue;
            for (std::int64_t x = first; x <= s.n; x += *s.modulus) a.insert(x);
            return a;
        }
        case SetKind::Interval: {
            IndicatorSet a(s.n);
            for (std::int64_t x = s.bounds->first; x <= s.bounds->second; ++x) a.insert(x);
            return a;
        }
        case SetKind::Union: {
            IndicatorSet a(s.n);
            for (const auto& p : s.parts) {
                const auto b = realize(p);
                for (auto x : b.members()) a.insert(x);
            }
            return a;
        }
        case SetKind::File: {
            auto a = load_set_file(*s.path);
            if (s.n > 0 && a.n() != s.n)
                throw ParseError("set file " + *s.path + " has N=" + std::to_string(a.n()) + ", expected " +
                                 std::to_string(s.n));
            return a;
        }
    }
    throw PreconditionError("realize: unknown kind");
}

}  // namespace sqdf
