#pragma once

// Cutoff profiles psi with compactly supported transform psi~ (supp psi~ in [-1,1]),
// and the discrete kernels
//
//     psi_{q,L}(x) = (q/L)^2 psi(q^2 l / L^2)   if x = q^2 l,   0 otherwise,
//
// whose transform is the bump train  sum_l psi~(L^2 (alpha - l/q^2)).

#include "sqdf/error.hpp"
#include "sqdf/fourier.hpp"
#include "sqdf/periodic.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace sqdf {

enum class ProfileKind { Fejer, SmoothBump };

inline const char* to_string(ProfileKind k) { return k == ProfileKind::Fejer ? "FEJER" : "SMOOTH_BUMP"; }

inline ProfileKind parse_profile_kind(const std::string& s) {
    if (s == "FEJER" || s == "fejer") return ProfileKind::Fejer;
    if (s == "SMOOTH_BUMP" || s == "smooth_bump" || s == "bump") return ProfileKind::SmoothBump;
    throw ParseError("unknown profile kind: " + s);
}

namespace detail {

// chi(xi) = exp(-1/(1 - 4 xi^2)) on (-1/2, 1/2)
inline double bump_chi(double xi) {
    const double u = 1.0 - 4.0 * xi * xi;
    return u > 0.0 ? std::exp(-1.0 / u) : 0.0;
}

template <class F>
double panel_integrate(F&& f, double a, double b, int panels) {
    using GL = boost::math::quadrature::gauss<double, 20>;
    const double w = (b - a) / panels;
    double s = 0.0;
    for (int i = 0; i < panels; ++i) s += GL::integrate(f, a + i * w, a + (i + 1) * w);
    return s;
}

inline double bump_chi_sq_norm() {
    static const double v = panel_integrate([](double x) { double c = bump_chi(x); return c * c; }, -0.5, 0.5, 64);
    return v;
}

/// Tabulated psi(x) = chi_check(x)^2 / ||chi||^2 on x = k*step, 0 <= k < count.
struct BumpTable {
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kPerUnit = 256;
    static constexpr double kExtent = 64.0;

    double step = 1.0 / kPerUnit;
    std::vector<double> values;

    static std::size_t expected_count() { return static_cast<std::size_t>(kExtent * kPerUnit) + 1; }

    static BumpTable compute() {
        BumpTable t;
        const std::size_t n = expected_count();
        t.values.resize(n);
        const double norm = bump_chi_sq_norm();
        for (std::size_t k = 0; k < n; ++k) {
            const double x = static_cast<double>(k) * t.step;
            // chi_check(x) = 2 int_0^{1/2} chi(xi) cos(2 pi x xi) d xi
            const double c = 2.0 * panel_integrate(
                                       [x](double xi) { return bump_chi(xi) * std::cos(kTwoPi * x * xi); }, 0.0,
                                       0.5, 64);
            t.values[k] = c * c / norm;
        }
        return t;
    }

    // Layout: "SQBT", uint32 version, uint64 count, double step, count doubles (little endian).
    bool save(const std::filesystem::path& p) const {
        std::ofstream os(p, std::ios::binary);
        if (!os) return false;
        os.write("SQBT", 4);
        write_le(os, kVersion);
        write_le(os, static_cast<std::uint64_t>(values.size()));
        write_le(os, std::bit_cast<std::uint64_t>(step));
        for (double v : values) write_le(os, std::bit_cast<std::uint64_t>(v));
        return static_cast<bool>(os);
    }

    static std::optional<BumpTable> load(const std::filesystem::path& p) {
        std::ifstream is(p, std::ios::binary);
        if (!is) return std::nullopt;
        char magic[4];
        is.read(magic, 4);
        if (!is || std::memcmp(magic, "SQBT", 4) != 0) return std::nullopt;
        std::uint32_t ver = 0;
        std::uint64_t count = 0, step_bits = 0;
        if (!read_le(is, ver) || !read_le(is, count) || !read_le(is, step_bits)) return std::nullopt;
        BumpTable t;
        t.step = std::bit_cast<double>(step_bits);
        if (ver != kVersion || count != expected_count() || t.step != 1.0 / kPerUnit) return std::nullopt;
        t.values.resize(count);
        for (auto& v : t.values) {
            std::uint64_t bits = 0;
            if (!read_le(is, bits)) return std::nullopt;
            v = std::bit_cast<double>(bits);
            if (!std::isfinite(v)) return std::nullopt;
        }
        return t;
    }

    double eval(double x) const {
        x = std::abs(x);
        const double pos = x / step;
        if (pos >= static_cast<double>(values.size() - 2)) return 0.0;
        const auto i = static_cast<std::int64_t>(std::floor(pos));
        const double u = pos - static_cast<double>(i);
        auto at = [&](std::int64_t k) { return values[static_cast<std::size_t>(k < 0 ? -k : k)]; };
        // cubic Lagrange through i-1 .. i+2 (psi is even, so negative indices mirror)
        const double y0 = at(i - 1), y1 = at(i), y2 = at(i + 1), y3 = at(i + 2);
        const double c1 = -y0 / 3.0 - 0.5 * y1 + y2 - y3 / 6.0;
        const double c2 = 0.5 * (y0 + y2) - y1;
        const double c3 = (y3 - y0) / 6.0 + 0.5 * (y1 - y2);
        return y1 + u * (c1 + u * (c2 + u * c3));
    }

private:
    template <class T>
    static void write_le(std::ostream& os, T v) {
        unsigned char b[sizeof(T)];
        for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
        os.write(reinterpret_cast<const char*>(b), sizeof(T));
    }
    template <class T>
    static bool read_le(std::istream& is, T& v) {
        unsigned char b[sizeof(T)];
        is.read(reinterpret_cast<char*>(b), sizeof(T));
        if (!is) return false;
        v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(b[i]) << (8 * i);
        return true;
    }
};

inline std::filesystem::path bump_cache_path() {
    const std::string name = "sqdf_bump_" + std::to_string(BumpTable::kPerUnit) + ".bin";
    if (const char* dir = std::getenv("SQDF_CACHE_DIR"); dir != nullptr && *dir != '\0')
        return std::filesystem::path(dir) / name;
    std::error_code ec;
    auto tmp = std::filesystem::temp_directory_path(ec);
    if (ec) tmp = ".";
    return tmp / name;
}

inline std::shared_ptr<const BumpTable> shared_bump_table() {
    static std::once_flag once;
    static std::shared_ptr<const BumpTable> table;
    std::call_once(once, [] {
        const auto path = bump_cache_path();
        if (auto t = BumpTable::load(path)) {
            table = std::make_shared<const BumpTable>(std::move(*t));
            return;
        }
        auto t = BumpTable::compute();
        t.save(path);  // best effort
        table = std::make_shared<const BumpTable>(std::move(t));
    });
    return table;
}

}  // namespace detail

class CutoffProfile {
public:
    static CutoffProfile make(ProfileKind kind) {
        CutoffProfile p;
        p.kind_ = kind;
        if (kind == ProfileKind::SmoothBump) p.table_ = detail::shared_bump_table();
        return p;
    }

    ProfileKind kind() const { return kind_; }

    double psi(double x) const {
        if (kind_ == ProfileKind::Fejer) {
            if (x == 0.0) return 1.0;
            const double r = x - std::nearbyint(x);  // sin^2(pi x) = sin^2(pi r)
            const double s = std::sin(kPi * r) / (kPi * x);
            return s * s;
        }
        return table_->eval(x);
    }

    double psi_tilde(double xi) const {
        const double a = std::abs(xi);
        if (a >= 1.0) return 0.0;
        if (kind_ == ProfileKind::Fejer) return 1.0 - a;
        const double lo = std::max(-0.5, a - 0.5), hi = std::min(0.5, a + 0.5);
        if (!(hi > lo)) return 0.0;
        const double conv = detail::panel_integrate(
            [a](double s) { return detail::bump_chi(s) * detail::bump_chi(a - s); }, lo, hi, 32);
        return std::clamp(conv / detail::bump_chi_sq_norm(), 0.0, 1.0);
    }

    /// |x| beyond which psi is treated as 0 (infinite for FEJER).
    double psi_extent() const {
        return kind_ == ProfileKind::Fejer ? std::numeric_limits<double>::infinity() : detail::BumpTable::kExtent;
    }

private:
    ProfileKind kind_ = ProfileKind::Fejer;
    std::shared_ptr<const detail::BumpTable> table_;
};

inline CutoffProfile make_profile(ProfileKind kind) { return CutoffProfile::make(kind); }

/// psi_{q,L} with a truncation radius in lattice units l = n/q^2.
class DiscreteMollifier {
public:
    DiscreteMollifier(CutoffProfile profile, std::int64_t q, double L, std::int64_t truncation_radius = 0,
                      double tail_tol = 1e-8)
        : profile_(std::move(profile)), q_(q), L_(L) {
        if (q < 1) throw PreconditionError("DiscreteMollifier: q must be >= 1");
        if (q > 3'000'000) throw PreconditionError("DiscreteMollifier: q^2 overflows");
        if (!(L > 0.0) || !std::isfinite(L)) throw PreconditionError("DiscreteMollifier: L must be positive");
        Q_ = q * q;
        h_ = static_cast<double>(Q_) / (L * L);
        R_ = truncation_radius > 0 ? truncation_radius : default_radius(tail_tol);
    }

    const CutoffProfile& profile() const { return profile_; }
    std::int64_t q() const { return q_; }
    std::int64_t Q() const { return Q_; }
    double L() const { return L_; }
    /// Lattice step in psi's argument: q^2/L^2.
    double h() const { return h_; }
    std::int64_t truncation_radius() const { return R_; }

    /// h psi(h l), ignoring truncation.
    double weight(std::int64_t l) const { return h_ * profile_.psi(h_ * static_cast<double>(l)); }

    double eval(std::int64_t n) const {
        if (n % Q_ != 0) return 0.0;
        const std::int64_t l = n / Q_;
        if (l > R_ || l < -R_) return 0.0;
        return weight(l);
    }

    /// sum_k psi~(k L^2 / q^2): mass of the untruncated kernel (Poisson summation).
    double untruncated_mass() const {
        double s = profile_.psi_tilde(0.0);
        for (std::int64_t k = 1; static_cast<double>(k) < h_; ++k) s += 2.0 * profile_.psi_tilde(static_cast<double>(k) / h_);
        return s;
    }

    /// sum_{|l| > R} h psi(h l).
    double tail_mass(std::int64_t R) const {
        if (profile_.kind() == ProfileKind::Fejer) {
            constexpr std::int64_t kDirect = 1'000'000;
            // (1/(pi^2 h)) sum_{l>R} (1 - cos(2 pi h l))/l^2, direct then trigamma for the rest
            double s = 0.0;
            for (std::int64_t l = R + kDirect; l > R; --l) s += 2.0 * weight(l);
            s += boost::math::trigamma(static_cast<double>(R + kDirect + 1)) / (kPi * kPi * h_);
            return s;
        }
        const auto lmax = static_cast<std::int64_t>(std::ceil(profile_.psi_extent() / h_)) + 1;
        double s = 0.0;
        for (std::int64_t l = lmax; l > R; --l) s += 2.0 * weight(l);
        return s;
    }

    /// Rigorous upper bound on tail_mass(R).
    double tail_bound(std::int64_t R) const {
        if (profile_.kind() == ProfileKind::Fejer) return 2.0 / (kPi * kPi * h_ * static_cast<double>(R));
        return tail_mass(R);
    }

    /// Mass of the kernel as truncated at the stored radius.
    double mass() const { return untruncated_mass() - tail_mass(R_); }

    /// Single-term transform psi~(L^2 (alpha - a/q^2)), a/q^2 the nearest center.
    double hat(TorusPoint alpha) const {
        if (!(L_ * L_ > 2.0 * static_cast<double>(Q_))) throw PreconditionError("periodization terms overlap");
        const double d = phase_frac(Q_, alpha.value()) / static_cast<double>(Q_);
        return profile_.psi_tilde(L_ * L_ * d);
    }

    /// sum_l psi~(L^2 (alpha - l/q^2)) with every overlapping term.
    double hat_periodized(TorusPoint alpha) const {
        const double Qd = static_cast<double>(Q_);
        const double theta = phase_frac(Q_, alpha.value());  // Q alpha mod 1 in [-1/2, 1/2]
        const double width = h_;                             // support half-width in theta units
        double s = 0.0;
        const auto kmax = static_cast<std::int64_t>(std::ceil(width)) + 1;
        for (std::int64_t k = -kmax; k <= kmax; ++k) s += profile_.psi_tilde(L_ * L_ * (theta - static_cast<double>(k)) / Qd);
        return s;
    }

    /// Exact periodic weight of the (untruncated) transform in u = q^2 alpha coordinates.
    PeriodicWeight hat_weight() const {
        if (profile_.kind() != ProfileKind::Fejer)
            throw PreconditionError("hat_weight: piecewise structure requires the FEJER profile");
        return PeriodicWeight::triangle_train(h_);
    }

    /// M_{q,L} = {alpha : |alpha - a/q^2| <= 1/L^2 for some a}.
    ArcSystem support_arcs() const {
        const double r = 1.0 / (L_ * L_);
        if (2.0 * r >= 1.0 / static_cast<double>(Q_)) return ArcSystem::full();
        if (Q_ > 4'000'000) throw PreconditionError("support_arcs: q^2 beyond desk scale");
        std::vector<Arc> arcs;
        arcs.reserve(static_cast<std::size_t>(Q_));
        for (std::int64_t a = 0; a < Q_; ++a) {
            const double c = static_cast<double>(a) / static_cast<double>(Q_);
            arcs.push_back({c - r, c + r});
        }
        return ArcSystem(std::move(arcs)).normalized();
    }

private:
    std::int64_t default_radius(double tol) const {
        if (!(tol > 0.0)) throw PreconditionError("DiscreteMollifier: tail tolerance must be positive");
        if (profile_.kind() == ProfileKind::Fejer) {
            const double r = std::ceil(2.0 / (kPi * kPi * h_ * tol));
            if (r > 4e18) throw PreconditionError("DiscreteMollifier: truncation radius overflows");
            return std::max<std::int64_t>(1, static_cast<std::int64_t>(r));
        }
        const auto lmax = static_cast<std::int64_t>(std::ceil(profile_.psi_extent() / h_)) + 1;
        double tail = 0.0;
        for (std::int64_t l = lmax; l >= 1; --l) {
            const double next = tail + 2.0 * weight(l);
            if (next >= tol) return l;
            tail = next;
        }
        return 1;
    }

    CutoffProfile profile_;
    std::int64_t q_ = 1;
    std::int64_t Q_ = 1;
    double L_ = 1.0;
    double h_ = 1.0;
    std::int64_t R_ = 1;
};

/// Default smoothing window half-width in n: min(q^2 R, 64 L^2).
inline std::int64_t default_smoothing_pad(const DiscreteMollifier& m) {
    const double cap = 64.0 * m.L() * m.L();
    const double full = static_cast<double>(m.Q()) * static_cast<double>(m.truncation_radius());
    return static_cast<std::int64_t>(std::ceil(std::min(cap, full)));
}

/// (f * psi_{q,L})(n) for n in [f.start - pad, f.end + pad), exact for the
/// truncated kernel.  pad < 0 selects default_smoothing_pad.
inline IntegerFunction smooth_convolve(const IntegerFunction& f, const DiscreteMollifier& m, std::int64_t pad = -1) {
    if (f.is_zero_repr()) return {};
    if (pad < 0) pad = default_smoothing_pad(m);
    const std::int64_t Q = m.Q();
    const std::int64_t lo = f.start() - pad;
    const std::int64_t hi = f.end() + pad;
    const auto len = static_cast<std::int64_t>(f.size());
    const std::int64_t rw = std::min<std::int64_t>(m.truncation_radius(), (pad + len - 1) / Q);
    std::vector<double> kernel(static_cast<std::size_t>(2 * rw + 1));
    for (std::int64_t l = -rw; l <= rw; ++l) kernel[static_cast<std::size_t>(l + rw)] = m.weight(l);

    std::vector<double> out(static_cast<std::size_t>(hi - lo), 0.0);
    std::vector<double> sub;
    for (std::int64_t rho = 0; rho < std::min(Q, len); ++rho) {
        sub.clear();
        for (std::int64_t j = f.start() + rho; j < f.end(); j += Q) sub.push_back(f(j));
        if (std::all_of(sub.begin(), sub.end(), [](double v) { return v == 0.0; })) continue;
        const auto conv = detail::linear_convolution(sub, kernel);
        const std::int64_t base = f.start() + rho - rw * Q;
        for (std::size_t i = 0; i < conv.size(); ++i) {
            const std::int64_t n = base + static_cast<std::int64_t>(i) * Q;
            if (n >= lo && n < hi) out[static_cast<std::size_t>(n - lo)] += conv[i];
        }
    }
    return IntegerFunction(lo, std::move(out));
}

/// (q^2/L^2) sum_l |psi((q^2 l - t^2)/L^2) - psi(q^2 l / L^2)|.
struct FlatnessResult {
    double value = 0.0;
    double tail_bound = 0.0;  // bound on the omitted |x| > extent part
    double extent = 0.0;
};

inline FlatnessResult translation_flatness(const DiscreteMollifier& m, std::int64_t t) {
    if (t < 1) throw PreconditionError("translation_flatness: t must be >= 1");
    if (t % m.q() != 0) throw PreconditionError("shift not aligned to kernel lattice");
    const std::int64_t s = (t / m.q()) * (t / m.q());  // lattice shift t^2/q^2
    const double h = m.h();
    const double sigma = h * static_cast<double>(s);
    double extent = m.profile().psi_extent();
    if (!std::isfinite(extent)) extent = std::min(16384.0, std::max(1024.0, 1e7 * h));
    const auto lmax = static_cast<std::int64_t>(std::ceil(extent / h)) + s + 1;
    double sum = 0.0, comp = 0.0;
    for (std::int64_t l = -lmax; l <= lmax + s; ++l) {
        const double term = h * std::abs(m.profile().psi(h * static_cast<double>(l - s)) -
                                         m.profile().psi(h * static_cast<double>(l)));
        const double y = term - comp;
        const double z = sum + y;
        comp = (z - sum) - y;
        sum = z;
    }
    FlatnessResult r;
    r.value = sum;
    r.extent = extent;
    // |psi'(x)| <= 1/(pi x^2) + 2/(pi^2 |x|^3) beyond the window (FEJER); bump table is exactly 0 there
    if (m.profile().kind() == ProfileKind::Fejer) {
        const double X = static_cast<double>(lmax) * h - sigma;
        r.tail_bound = 2.0 * sigma * (1.0 / (kPi * X) + 1.0 / (kPi * kPi * X * X)) + 2.0 * h * sigma / (X * X);
    }
    return r;
}

}  // namespace sqdf
