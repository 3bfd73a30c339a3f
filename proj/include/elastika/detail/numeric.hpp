#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace elastika {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;
using Index = Eigen::Index;

namespace detail {

/// Evenly spaced grid on [0,1] with both endpoints exact.
inline Vector uniform_grid(Index m) {
    Vector t(m);
    if (m == 1) {
        t(0) = 0.0;
        return t;
    }
    for (Index j = 0; j < m; ++j) t(j) = static_cast<double>(j) / static_cast<double>(m - 1);
    t(m - 1) = 1.0;
    return t;
}

inline double grid_step(Index m) { return 1.0 / static_cast<double>(m - 1); }

/// Trapezoid weights for an evenly spaced grid of m points on [0,1].
inline Vector trapezoid_weights(Index m) {
    const double h = grid_step(m);
    Vector w = Vector::Constant(m, h);
    w(0) = 0.5 * h;
    w(m - 1) = 0.5 * h;
    return w;
}

/// Central differences in the interior, second-order one-sided at the ends.
/// Requires at least three samples; two samples fall back to the chord slope.
inline RowVector derivative(const Eigen::Ref<const RowVector>& f, double h) {
    const Index m = f.size();
    RowVector d(m);
    if (m == 2) {
        d.setConstant((f(1) - f(0)) / h);
        return d;
    }
    for (Index k = 1; k + 1 < m; ++k) d(k) = (f(k + 1) - f(k - 1)) / (2.0 * h);
    d(0) = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * h);
    d(m - 1) = (3.0 * f(m - 1) - 4.0 * f(m - 2) + f(m - 3)) / (2.0 * h);
    return d;
}

/// Exact inverse of `derivative`: trapezoid over the first cell, then the
/// two-step midpoint rule f[k+1] = f[k-1] + 2h d[k]. The last sample of d is
/// not needed.
inline RowVector staggered_integral(const Eigen::Ref<const RowVector>& d, double h, double f0) {
    const Index m = d.size();
    RowVector f(m);
    f(0) = f0;
    if (m == 1) return f;
    f(1) = f0 + 0.5 * h * (d(0) + d(1));
    for (Index k = 1; k + 1 < m; ++k) f(k + 1) = f(k - 1) + 2.0 * h * d(k);
    return f;
}

/// Cumulative trapezoid rule starting at f0.
inline RowVector cumulative_trapezoid(const Eigen::Ref<const RowVector>& g, double h, double f0) {
    const Index m = g.size();
    RowVector f(m);
    f(0) = f0;
    for (Index k = 1; k < m; ++k) f(k) = f(k - 1) + 0.5 * h * (g(k - 1) + g(k));
    return f;
}

/// Linear interpolation of samples on the uniform [0,1] grid at abscissa x.
/// x is clamped to [0,1].
inline double interp_uniform(const Eigen::Ref<const RowVector>& values, double x) {
    const Index m = values.size();
    if (m == 1) return values(0);
    const double pos = std::clamp(x, 0.0, 1.0) * static_cast<double>(m - 1);
    Index i = static_cast<Index>(std::floor(pos));
    if (i >= m - 1) i = m - 2;
    if (i < 0) i = 0;
    const double frac = pos - static_cast<double>(i);
    return (1.0 - frac) * values(i) + frac * values(i + 1);
}

/// Linear interpolation through (xs[k], ys[k]) with xs strictly increasing.
/// Values outside [xs.front(), xs.back()] are clamped to the end values.
inline double interp_sorted(const Eigen::Ref<const Vector>& xs, const Eigen::Ref<const Vector>& ys, double x) {
    const Index m = xs.size();
    if (x <= xs(0)) return ys(0);
    if (x >= xs(m - 1)) return ys(m - 1);
    const double* begin = xs.data();
    const double* it = std::upper_bound(begin, begin + m, x);
    const Index hi = static_cast<Index>(it - begin);
    const Index lo = hi - 1;
    const double span = xs(hi) - xs(lo);
    const double frac = span > 0.0 ? (x - xs(lo)) / span : 0.0;
    return (1.0 - frac) * ys(lo) + frac * ys(hi);
}

/// SplitMix64 step, used to derive independent per-task seeds from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) {
    return splitmix64(splitmix64(splitmix64(seed) ^ stream) ^ index);
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// handled exactly once; the first exception is rethrown on the caller.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(threads, 1), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next.store(n);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

} // namespace detail
} // namespace elastika
