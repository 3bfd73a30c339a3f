#pragma once

#include "elastika/detail/numeric.hpp"

#include <algorithm>
#include <cmath>

namespace elastika::sphere {

/// Geometry of the unit sphere in L2([0,1]) under trapezoid quadrature.
/// Points are sample vectors; `w` holds the quadrature weights.

inline double inner(const Vector& a, const Vector& b, const Vector& w) { return (a.cwiseProduct(b)).dot(w); }

inline double norm(const Vector& a, const Vector& w) { return std::sqrt(std::max(inner(a, a, w), 0.0)); }

inline double distance(const Vector& a, const Vector& b, const Vector& w) {
    return std::acos(std::clamp(inner(a, b, w), -1.0, 1.0));
}

/// Tangent vector at `base` pointing to `p` with length equal to the geodesic distance.
inline Vector log_map(const Vector& base, const Vector& p, const Vector& w) {
    const double c = std::clamp(inner(base, p, w), -1.0, 1.0);
    const double theta = std::acos(c);
    if (theta < 1e-14) return Vector::Zero(base.size());
    return theta / std::sin(theta) * (p - c * base);
}

inline Vector exp_map(const Vector& base, const Vector& v, const Vector& w) {
    const double n = norm(v, w);
    if (n < 1e-14) return base;
    Vector out = std::cos(n) * base + std::sin(n) / n * v;
    return out / norm(out, w);
}

/// Intrinsic mean of the columns of `points` by fixed-point iteration on the tangent mean.
inline Vector karcher_mean(const Matrix& points, const Vector& w, int max_iters = 500, double tol = 1e-12) {
    const Index n = points.cols();
    Vector mu = points.rowwise().mean();
    const double mn = norm(mu, w);
    mu = mn > 1e-14 ? Vector(mu / mn) : Vector(points.col(0));
    for (int it = 0; it < max_iters; ++it) {
        Vector v = Vector::Zero(mu.size());
        for (Index i = 0; i < n; ++i) v += log_map(mu, points.col(i), w);
        v /= static_cast<double>(n);
        if (norm(v, w) < tol) break;
        mu = exp_map(mu, v, w);
    }
    return mu;
}

} // namespace elastika::sphere
