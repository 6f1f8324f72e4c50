#include "sqdf/fourier.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace sqdf;

namespace {

IntegerFunction random_function(std::mt19937_64& rng, std::int64_t start, std::size_t len) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(len);
    for (auto& x : v) x = u(rng);
    return IntegerFunction(start, std::move(v));
}

// long double summation, no fma tricks
std::complex<long double> naive_transform(const IntegerFunction& f, long double alpha) {
    std::complex<long double> s{};
    const long double two_pi = 6.283185307179586476925286766559L;
    for (std::int64_t n = f.start(); n < f.end(); ++n) {
        const long double ph = -two_pi * static_cast<long double>(n) * alpha;
        s += static_cast<long double>(f(n)) * std::complex<long double>(std::cos(ph), std::sin(ph));
    }
    return s;
}

}  // namespace

TEST(FourierEval, PointMassAtZero) {
    const auto f = IntegerFunction::point_mass(0);
    for (double a : {0.0, 0.1, 0.37, 0.9}) {
        const cplx v = fourier_eval(f, TorusPoint(a));
        EXPECT_DOUBLE_EQ(v.real(), 1.0);
        EXPECT_DOUBLE_EQ(v.imag(), 0.0);
    }
}

TEST(FourierEval, TwoPointCancellation) {
    const auto f = IntegerFunction::interval(0, 1);
    EXPECT_NEAR(std::abs(fourier_eval(f, TorusPoint(0.5))), 0.0, 1e-15);
}

TEST(FourierEval, IntervalAtOneThirdMatchesExtendedPrecision) {
    const auto f = IntegerFunction::interval(1, 16);
    const cplx v = fourier_eval(f, TorusPoint(1.0 / 3.0));
    const auto ref = naive_transform(f, 1.0L / 3.0L);
    EXPECT_NEAR(v.real(), static_cast<double>(ref.real()), 1e-12);
    EXPECT_NEAR(v.imag(), static_cast<double>(ref.imag()), 1e-12);
    // closed form: 16 = 5*3 + 1, so the sum collapses to the n = 16 term
    EXPECT_NEAR(v.real(), std::cos(-kTwoPi * 16.0 / 3.0), 1e-12);
}

TEST(FourierEval, MagnitudeBound) {
    std::mt19937_64 rng(7);
    const auto f = random_function(rng, -40, 300);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) EXPECT_LE(std::abs(fourier_eval(f, TorusPoint(u(rng)))), f.l1_norm() + 1e-12);
}

TEST(TorusPoint, Reduction) {
    EXPECT_DOUBLE_EQ(TorusPoint(1.25).value(), 0.25);
    EXPECT_DOUBLE_EQ(TorusPoint(-0.25).value(), 0.75);
    EXPECT_DOUBLE_EQ(TorusPoint(3.0).value(), 0.0);
    EXPECT_LT(TorusPoint(-1e-300).value(), 1.0);
}

TEST(IntegerFunction, RejectsNonFinite) {
    EXPECT_THROW(IntegerFunction(0, {1.0, std::nan("")}), PreconditionError);
    EXPECT_THROW(IntegerFunction(0, {INFINITY}), PreconditionError);
    EXPECT_TRUE(IntegerFunction(5, {}).is_zero_repr());
}

TEST(DftGrid, PointMass) {
    const auto v = dft_grid(IntegerFunction::point_mass(0), 4);
    for (const auto& z : v) EXPECT_NEAR(std::abs(z - cplx{1.0, 0.0}), 0.0, 1e-15);
}

TEST(DftGrid, TwoPoint) {
    const auto v = dft_grid(IntegerFunction::interval(0, 1), 4);
    for (int k = 0; k < 4; ++k) {
        const cplx want = 1.0 + std::exp(cplx{0.0, -kPi * k / 2.0});
        EXPECT_NEAR(std::abs(v[static_cast<std::size_t>(k)] - want), 0.0, 1e-14);
    }
}

TEST(DftGrid, MatchesPointwiseWithOffsetSupport) {
    std::mt19937_64 rng(11);
    for (std::int64_t start : {0LL, 17LL, -300LL, 1000003LL}) {
        const auto f = random_function(rng, start, 256);
        const auto v = dft_grid(f, 1024);
        double worst = 0.0;
        for (std::size_t k = 0; k < 1024; ++k) {
            const cplx ref = fourier_eval(f, TorusPoint(static_cast<double>(k) / 1024.0));
            worst = std::max(worst, std::abs(v[k] - ref) / (1.0 + std::abs(ref)));
        }
        EXPECT_LT(worst, 1e-9) << "start=" << start;
    }
}

TEST(DftGrid, TooCoarse) {
    EXPECT_THROW(dft_grid(IntegerFunction::interval(0, 9), 8), ResolutionError);
}

TEST(Convolve, Identity) {
    std::mt19937_64 rng(3);
    const auto f = random_function(rng, 4, 30);
    const auto g = convolve(f, IntegerFunction::point_mass(0));
    ASSERT_EQ(g.start(), f.start());
    ASSERT_EQ(g.size(), f.size());
    for (std::int64_t n = f.start(); n < f.end(); ++n) EXPECT_DOUBLE_EQ(g(n), f(n));
}

TEST(Convolve, HandComputed) {
    const auto c = convolve(IntegerFunction::interval(0, 1), IntegerFunction::interval(0, 1));
    EXPECT_EQ(c.start(), 0);
    ASSERT_EQ(c.size(), 3u);
    EXPECT_EQ(c(0), 1.0);
    EXPECT_EQ(c(1), 2.0);
    EXPECT_EQ(c(2), 1.0);
}

TEST(Convolve, ConvolutionTheoremAndYoung) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto f = random_function(rng, -10, 50);
    const auto g = random_function(rng, 33, 70);
    const auto c = convolve(f, g);
    EXPECT_EQ(c.start(), f.start() + g.start());
    EXPECT_LE(c.l1_norm(), f.l1_norm() * g.l1_norm() + 1e-9);
    for (int i = 0; i < 100; ++i) {
        const TorusPoint a(u(rng));
        const cplx lhs = fourier_eval(c, a);
        const cplx rhs = fourier_eval(f, a) * fourier_eval(g, a);
        EXPECT_LT(std::abs(lhs - rhs), 1e-9 * (1.0 + f.l1_norm() * g.l1_norm()));
    }
}

TEST(Convolve, FftPathAgreesWithDirect) {
    std::mt19937_64 rng(9);
    const auto f = random_function(rng, 0, 3000);
    const auto g = random_function(rng, 0, 2000);
    const auto fast = detail::fft_convolution(f.values(), g.values());
    const auto slow = detail::direct_convolution(f.values(), g.values());
    ASSERT_EQ(fast.size(), slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast[i], slow[i], 1e-8 * (1.0 + slow[i]));
}

TEST(Autocorrelation, HandComputed) {
    const auto r = autocorrelation(IntegerFunction::interval(0, 1));
    EXPECT_EQ(r(0), 2.0);
    EXPECT_EQ(r(1), 1.0);
    EXPECT_EQ(r(-1), 1.0);
    EXPECT_EQ(r(2), 0.0);
    const auto p = autocorrelation(IntegerFunction::point_mass(7, 3.0));
    EXPECT_EQ(p(0), 9.0);
    EXPECT_EQ(p(1), 0.0);
}

TEST(Autocorrelation, ZeroLagIsSumOfSquaresAndEven) {
    std::mt19937_64 rng(13);
    for (std::size_t len : {128u, 1000u}) {
        const auto f = random_function(rng, 3, len);
        const auto r = autocorrelation(f);
        EXPECT_NEAR(r(0), f.sum_squares(), 1e-12 * (1.0 + f.sum_squares()));
        for (std::int64_t m = 1; m < 50; ++m) EXPECT_EQ(r(m), r(-m));
        double direct = 0.0;
        for (std::int64_t n = f.start(); n < f.end(); ++n) direct += f(n) * f(n - 17);
        EXPECT_NEAR(r(17), direct, 1e-9 * (1.0 + direct));
    }
}

TEST(Autocorrelation, IntegralInputsGiveIntegers) {
    std::mt19937_64 rng(17);
    std::vector<double> v(700);
    for (auto& x : v) x = static_cast<double>(rng() & 1u);
    const auto r = autocorrelation(IntegerFunction(1, v));
    for (double x : r.values()) EXPECT_EQ(x, std::nearbyint(x));
}

TEST(ArcSystem, Normalization) {
    ArcSystem s({{0.9, 1.1}, {0.05, 0.2}, {0.15, 0.3}});
    const auto n = s.normalized();
    ASSERT_EQ(n.arcs().size(), 2u);
    EXPECT_DOUBLE_EQ(n.arcs()[0].lo, 0.0);
    EXPECT_NEAR(n.arcs()[0].hi, 0.3, 1e-15);
    EXPECT_DOUBLE_EQ(n.arcs()[1].lo, 0.9);
    EXPECT_DOUBLE_EQ(n.arcs()[1].hi, 1.0);
    EXPECT_NEAR(n.measure(), 0.4, 1e-12);
    EXPECT_TRUE(n.contains(0.0));
    EXPECT_TRUE(n.contains(0.3));
    EXPECT_FALSE(n.contains(0.5));
    EXPECT_TRUE(ArcSystem({{0.0, 0.6}, {0.5, 1.0}}).normalized().is_full());
    EXPECT_THROW(ArcSystem({{0.5, 0.2}}), PreconditionError);
    EXPECT_THROW(ArcSystem({{0.0, 1.5}}), PreconditionError);
}

TEST(IntegrateEnergy, FullAndEmpty) {
    std::mt19937_64 rng(19);
    const auto f = random_function(rng, -5, 200);
    EXPECT_NEAR(integrate_energy(f, ArcSystem::full()), f.sum_squares(), 1e-12);
    EXPECT_EQ(integrate_energy(f, ArcSystem().normalized()), 0.0);
    EXPECT_THROW(integrate_energy(f, ArcSystem({{0.1, 0.2}})), PreconditionError);
    // whole circle given as an arc that does not trigger the full shortcut
    const ArcSystem halves = ArcSystem({{0.0, 0.5}}).normalized();
    const ArcSystem other = ArcSystem({{0.5, 1.0}}).normalized();
    EXPECT_NEAR(integrate_energy(f, halves) + integrate_energy(f, other), f.sum_squares(),
                1e-10 * (1.0 + f.sum_squares()));
}

TEST(IntegrateEnergy, HalfCircleMatchesQuadrature) {
    std::mt19937_64 rng(23);
    std::vector<double> v(512);
    for (auto& x : v) x = static_cast<double>(rng() & 1u);
    const IntegerFunction f(1, v);
    const double exact = integrate_energy(f, ArcSystem({{0.0, 0.5}}).normalized());
    // composite Gauss-Legendre (5 nodes) on 8192 panels: |f^|^2 has degree < 1024
    static const double x5[] = {0.0, 0.5384693101056831, 0.9061798459386640};
    static const double w5[] = {0.5688888888888889, 0.4786286704993665, 0.2369268850561891};
    const int panels = 8192;
    const double h = 0.5 / panels;
    long double acc = 0.0L;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h;
        for (int j = 0; j < 3; ++j) {
            for (int sgn : {-1, 1}) {
                if (j == 0 && sgn == 1) continue;
                const double x = mid + sgn * x5[j] * h / 2;
                acc += w5[j] * h / 2 * std::norm(fourier_eval(f, TorusPoint(x)));
            }
        }
    }
    EXPECT_NEAR(exact, static_cast<double>(acc), 1e-8 * (1.0 + exact));
    EXPECT_GE(exact, 0.0);
    EXPECT_LE(exact, f.sum_squares());
}

TEST(IntegrateEnergy, Additivity) {
    std::mt19937_64 rng(29);
    const auto f = random_function(rng, 0, 400);
    const ArcSystem a({{0.1, 0.17}, {0.6, 0.65}});
    const ArcSystem b({{0.2, 0.31}, {0.9, 1.05}});
    const double ea = integrate_energy(f, a.normalized());
    const double eb = integrate_energy(f, b.normalized());
    const double eu = integrate_energy(f, unite(a, b));
    EXPECT_NEAR(ea + eb, eu, 1e-10 * (1.0 + eu));
}

TEST(PhaseFrac, LargeProducts) {
    // n*alpha far beyond 2^30 still reduces exactly for dyadic alpha
    EXPECT_EQ(phase_frac(1LL << 40, 0.375), 0.0);
    EXPECT_NEAR(phase_frac(3, 1.0 / 3.0), 0.0, 1e-16);
    EXPECT_NEAR(std::abs(phase_frac(1000000007LL, 0.5)), 0.5, 0.0);
}
