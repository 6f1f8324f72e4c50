#pragma once

// Square-difference counting.
//
//   |A cap (A + t^2)|                       shifted bitset AND + popcount
//   Lambda_q(g,h) = (q/mu) sum_{t in (lambda,lambda+mu], q|t} sum_n g(n) h(n - t^2)
//   Lambda_q(g,h) = int g^ conj(h^) S_{lambda,mu,q}      (exact on a DFT grid)
//
// plus the Varnavides sum and the good-progression census.

#include "sqdf/error.hpp"
#include "sqdf/fft.hpp"
#include "sqdf/fourier.hpp"
#include "sqdf/weyl.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace sqdf {

inline std::int64_t isqrt(std::int64_t n) {
    if (n < 0) throw PreconditionError("isqrt: negative argument");
    auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(n)));
    while (r * r > n) --r;
    while ((r + 1) * (r + 1) <= n) ++r;
    return r;
}

/// A subset of [1, N] as a packed bitset; bit i of word w is the element 64w + i + 1.
class IndicatorSet {
public:
    IndicatorSet() = default;

    explicit IndicatorSet(std::int64_t n) : n_(n) {
        if (n < 1) throw PreconditionError("IndicatorSet: N must be >= 1");
        words_.assign(static_cast<std::size_t>((n + 63) / 64), 0);
    }

    static IndicatorSet from_members(std::int64_t n, const std::vector<std::int64_t>& members) {
        IndicatorSet s(n);
        for (auto x : members) s.insert(x);
        return s;
    }

    std::int64_t n() const { return n_; }
    const std::vector<std::uint64_t>& words() const { return words_; }

    bool contains(std::int64_t x) const {
        if (x < 1 || x > n_) return false;
        const auto p = static_cast<std::uint64_t>(x - 1);
        return (words_[p >> 6] >> (p & 63)) & 1u;
    }

    void insert(std::int64_t x) {
        if (x < 1 || x > n_)
            throw PreconditionError("IndicatorSet: element " + std::to_string(x) + " outside [1, " +
                                    std::to_string(n_) + "]");
        const auto p = static_cast<std::uint64_t>(x - 1);
        words_[p >> 6] |= std::uint64_t{1} << (p & 63);
    }

    std::int64_t size() const {
        std::int64_t c = 0;
        for (auto w : words_) c += std::popcount(w);
        return c;
    }

    double density() const { return n_ > 0 ? static_cast<double>(size()) / static_cast<double>(n_) : 0.0; }

    std::vector<std::int64_t> members() const {
        std::vector<std::int64_t> out;
        out.reserve(static_cast<std::size_t>(size()));
        for (std::size_t w = 0; w < words_.size(); ++w) {
            std::uint64_t bits = words_[w];
            while (bits != 0) {
                const int b = std::countr_zero(bits);
                out.push_back(static_cast<std::int64_t>(w * 64 + static_cast<std::size_t>(b)) + 1);
                bits &= bits - 1;
            }
        }
        return out;
    }

    /// 1_A as a function supported on [1, N].
    IntegerFunction indicator() const {
        std::vector<double> v(static_cast<std::size_t>(n_), 0.0);
        for (auto x : members()) v[static_cast<std::size_t>(x - 1)] = 1.0;
        return IntegerFunction(1, std::move(v));
    }

    /// {N + 1 - a : a in A}
    IndicatorSet reversed() const {
        IndicatorSet r(n_);
        for (auto x : members()) r.insert(n_ + 1 - x);
        return r;
    }

    friend bool operator==(const IndicatorSet& a, const IndicatorSet& b) {
        return a.n_ == b.n_ && a.words_ == b.words_;
    }

private:
    std::int64_t n_ = 0;
    std::vector<std::uint64_t> words_;
};

/// #{n : n in A and n - s in A} for a shift s >= 1.
inline std::int64_t shifted_overlap(const IndicatorSet& a, std::int64_t s) {
    if (s < 1) throw PreconditionError("shifted_overlap: shift must be >= 1");
    if (s >= a.n()) return 0;
    const auto& w = a.words();
    const auto ws = static_cast<std::size_t>(s >> 6);
    const auto bs = static_cast<unsigned>(s & 63);
    std::int64_t count = 0;
    for (std::size_t i = ws; i < w.size(); ++i) {
        std::uint64_t shifted = w[i - ws] << bs;
        if (bs != 0 && i > ws) shifted |= w[i - ws - 1] >> (64 - bs);
        count += std::popcount(w[i] & shifted);
    }
    return count;
}

/// |A cap (A + t^2)|
inline std::int64_t intersect_count(const IndicatorSet& a, std::int64_t t) {
    if (t < 1) throw PreconditionError("intersect_count: t must be >= 1");
    if (t > 3'037'000'499LL || t * t >= a.n()) return 0;
    return shifted_overlap(a, t * t);
}

/// (1/mu) sum_{t=lambda+1}^{lambda+mu} |A cap (A + t^2)|
inline double average_count(const IndicatorSet& a, std::int64_t lambda, std::int64_t mu) {
    if (mu < 1) throw PreconditionError("1 <= mu violated");
    if (mu > lambda) throw PreconditionError("mu <= lambda violated");
    if (4 * lambda * lambda > a.n()) throw PreconditionError("lambda^2 <= N/4 violated");
    std::int64_t total = 0;
    for (std::int64_t t = lambda + 1; t <= lambda + mu; ++t) total += intersect_count(a, t);
    return static_cast<double>(total) / static_cast<double>(mu);
}

struct LambdaResult {
    double value = 0.0;
    std::int64_t t_count = 0;
    bool empty = false;
    std::map<std::int64_t, double> per_t;
};

/// sum_n g(n) h(n - s)
inline double shifted_product_sum(const IntegerFunction& g, const IntegerFunction& h, std::int64_t s) {
    if (g.is_zero_repr() || h.is_zero_repr()) return 0.0;
    const std::int64_t lo = std::max(g.start(), h.start() + s);
    const std::int64_t hi = std::min(g.end(), h.end() + s);
    double acc = 0.0, comp = 0.0;
    for (std::int64_t n = lo; n < hi; ++n) {
        const double y = g(n) * h(n - s) - comp;
        const double z = acc + y;
        comp = (z - acc) - y;
        acc = z;
    }
    return acc;
}

inline LambdaResult lambda_direct(const IntegerFunction& g, const IntegerFunction& h, const WeylParams& p,
                                  bool keep_per_t = true) {
    LambdaResult r;
    const auto ts = p.admissible_t();
    r.t_count = static_cast<std::int64_t>(ts.size());
    r.empty = ts.empty();
    double total = 0.0;
    for (auto t : ts) {
        const double c = shifted_product_sum(g, h, t * t);
        if (keep_per_t) r.per_t[t] = c;
        total += c;
    }
    r.value = p.scale() * total;
    return r;
}

/// Lambda_q(1_A, 1_A) with per-t entries from intersect_count.
inline LambdaResult lambda_direct(const IndicatorSet& a, const WeylParams& p, bool keep_per_t = true) {
    LambdaResult r;
    const auto ts = p.admissible_t();
    r.t_count = static_cast<std::int64_t>(ts.size());
    r.empty = ts.empty();
    std::int64_t total = 0;
    for (auto t : ts) {
        const auto c = intersect_count(a, t);
        if (keep_per_t) r.per_t[t] = static_cast<double>(c);
        total += c;
    }
    r.value = p.scale() * static_cast<double>(total);
    return r;
}

/// Smallest grid on which the Lambda integrand has no aliased frequencies.
inline std::size_t lambda_bandwidth(const IntegerFunction& g, const IntegerFunction& h, const WeylParams& p) {
    const auto ts = p.admissible_t();
    if (ts.empty() || g.is_zero_repr() || h.is_zero_repr()) return 1;
    const std::int64_t m_min = g.start() - (h.end() - 1);
    const std::int64_t m_max = (g.end() - 1) - h.start();
    const std::int64_t s_min = ts.front() * ts.front();
    const std::int64_t s_max = ts.back() * ts.back();
    const std::int64_t b = std::max(std::abs(m_max - s_min), std::abs(s_max - m_min));
    return static_cast<std::size_t>(std::max<std::int64_t>(b + 1, 1));
}

/// int_T g^(alpha) conj(h^(alpha)) S_{lambda,mu,q}(alpha) d alpha, as an exact
/// average over a DFT grid of size M (0 selects the default power of two).
inline double lambda_fourier(const IntegerFunction& g, const IntegerFunction& h, const WeylParams& p,
                             std::size_t grid = 0) {
    const auto ts = p.admissible_t();
    if (ts.empty() || g.is_zero_repr() || h.is_zero_repr()) return 0.0;
    const std::size_t need = std::max({lambda_bandwidth(g, h, p), g.size(), h.size()});
    if (grid == 0) grid = fft::next_pow2(need);
    if (grid < need) throw ResolutionError("aliasing: grid must exceed bandwidth");
    const auto G = dft_grid(g, grid);
    const auto H = dft_grid(h, grid);
    std::vector<cplx> hist(grid);
    for (auto t : ts) {
        const auto s = static_cast<unsigned __int128>(t) * static_cast<unsigned __int128>(t);
        hist[static_cast<std::size_t>(s % grid)] += 1.0;
    }
    const auto S = fft::transform(std::span<const cplx>(hist), grid, fft::Direction::Backward);
    double acc = 0.0;
    for (std::size_t k = 0; k < grid; ++k) acc += (G[k] * std::conj(H[k]) * S[k]).real();
    return p.scale() * acc / static_cast<double>(grid);
}

/// sum_{t=1}^{floor(sqrt N)} |A cap (A + t^2)|
inline std::int64_t varnavides_sum(const IndicatorSet& a) {
    std::int64_t total = 0;
    const std::int64_t tmax = isqrt(a.n());
    for (std::int64_t t = 1; t <= tmax; ++t) total += intersect_count(a, t);
    return total;
}

/// Parameter ranges of the appendix census: t^2 <= delta N / M^2, n <= N (1 - delta/M).
struct ProgressionLimits {
    std::int64_t n_ambient = 0;
    double delta = 0.0;
    std::int64_t m_len = 2;
    std::int64_t t_max = 0;
    std::int64_t n_max = 0;

    static ProgressionLimits from(std::int64_t n, double delta, std::int64_t m_len) {
        if (m_len < 2) throw PreconditionError("good_progressions: m_len must be >= 2");
        ProgressionLimits l;
        l.n_ambient = n;
        l.delta = delta;
        l.m_len = m_len;
        const double tt = delta * static_cast<double>(n) / static_cast<double>(m_len * m_len);
        l.t_max = tt >= 1.0 ? isqrt(static_cast<std::int64_t>(std::floor(tt + 1e-9))) : 0;
        l.n_max = static_cast<std::int64_t>(std::floor(static_cast<double>(n) * (1.0 - delta / static_cast<double>(m_len)) + 1e-9));
        return l;
    }

    /// Largest admissible n for gap s: n <= n_max and n + (M-1) s <= N.
    std::int64_t n_limit(std::int64_t s) const { return std::min(n_max, n_ambient - (m_len - 1) * s); }
};

struct CensusResult {
    std::int64_t good_count = 0;
    std::int64_t eligible = 0;
    double threshold = 0.0;  // |A cap P| >= delta M / 2
    double target = 0.0;     // (delta N)^{3/2} / M
    double delta = 0.0;
    std::int64_t t_max = 0;
    std::int64_t n_max = 0;
    bool degenerate = false;
};

inline CensusResult good_progressions(const IndicatorSet& a, std::int64_t m_len) {
    const double delta = a.density();
    const auto lim = ProgressionLimits::from(a.n(), delta, m_len);
    CensusResult r;
    r.delta = delta;
    r.threshold = delta * static_cast<double>(m_len) / 2.0;
    r.target = std::pow(delta * static_cast<double>(a.n()), 1.5) / static_cast<double>(m_len);
    r.t_max = lim.t_max;
    r.n_max = lim.n_max;
    if (lim.t_max < 1 || lim.n_max < 1) {
        r.degenerate = true;
        return r;
    }
    for (std::int64_t t = 1; t <= lim.t_max; ++t) {
        const std::int64_t s = t * t;
        const std::int64_t nl = lim.n_limit(s);
        if (nl < 1) continue;
        r.eligible += nl;
        // window sums along each residue class mod s
        std::vector<std::int64_t> win(static_cast<std::size_t>(nl) + 1, 0);
        for (std::int64_t n = 1; n <= nl; ++n) {
            std::int64_t c;
            if (n > s) {
                c = win[static_cast<std::size_t>(n - s)] - (a.contains(n - s) ? 1 : 0) +
                    (a.contains(n + (m_len - 1) * s) ? 1 : 0);
            } else {
                c = 0;
                for (std::int64_t i = 0; i < m_len; ++i) c += a.contains(n + i * s) ? 1 : 0;
            }
            win[static_cast<std::size_t>(n)] = c;
            if (static_cast<double>(c) >= r.threshold) ++r.good_count;
        }
    }
    return r;
}

/// Number of progressions P_{n,t} within the census ranges containing both n0 and n0 + s^2.
inline std::int64_t overcount_bound_check(std::int64_t n0, std::int64_t s, const ProgressionLimits& lim) {
    if (s < 1) throw PreconditionError("overcount_bound_check: s must be >= 1");
    if (n0 < 1 || n0 + s * s > lim.n_ambient)
        throw PreconditionError("overcount_bound_check: pair {n0, n0+s^2} must lie in [1, N]");
    std::int64_t count = 0;
    for (std::int64_t t = 1; t <= lim.t_max; ++t) {
        if (s % t != 0) continue;
        const std::int64_t d = (s / t) * (s / t);  // index gap j - i
        if (d > lim.m_len - 1) continue;
        const std::int64_t g = t * t;
        const std::int64_t nl = lim.n_limit(g);
        for (std::int64_t i = 0; i + d <= lim.m_len - 1; ++i) {
            const std::int64_t n = n0 - i * g;
            if (n >= 1 && n <= nl) ++count;
        }
    }
    return count;
}

/// Pair counts against the random model over t <= sqrt(N).
struct RandomBaseline {
    double delta = 0.0;
    double literal_mean = 0.0;  // mean over t of count_t / N
    double pooled_ratio = 0.0;  // sum count_t / sum (N - t^2)
    double pairs = 0.0;         // sum (N - t^2)
    double standard_error = 0.0;
};

inline RandomBaseline random_baseline(const IndicatorSet& a) {
    RandomBaseline b;
    b.delta = a.density();
    const std::int64_t tmax = isqrt(a.n() - 1);
    if (tmax < 1) return b;
    double sum_ratio = 0.0, counts = 0.0;
    for (std::int64_t t = 1; t <= tmax; ++t) {
        const auto c = static_cast<double>(intersect_count(a, t));
        sum_ratio += c / static_cast<double>(a.n());
        counts += c;
        b.pairs += static_cast<double>(a.n() - t * t);
    }
    b.literal_mean = sum_ratio / static_cast<double>(tmax);
    b.pooled_ratio = counts / b.pairs;
    const double p = b.delta * b.delta;
    b.standard_error = std::sqrt(p * (1.0 - p) / b.pairs);
    return b;
}

}  // namespace sqdf
