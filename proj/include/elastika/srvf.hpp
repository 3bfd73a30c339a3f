#pragma once

#include "elastika/curves.hpp"
#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace elastika {

inline constexpr double kDerivativeTolerance = 1e-9;

/// How multichannel curves are mapped to square-root velocity form.
/// joint: q = f'/sqrt(|f'|) with the Euclidean norm across channels.
/// per_channel: q_c = sign(f_c') sqrt(|f_c'|) for each channel separately.
enum class SrvfMode { joint, per_channel };

/// Square-root velocity samples, (num_channels x grid length).
class SrvfCurve {
public:
    SrvfCurve() = default;
    SrvfCurve(std::vector<std::string> channels, Matrix values)
        : channels_(std::move(channels)), values_(std::move(values)) {
        if (values_.cols() < 2) throw InvariantViolation("SRVF needs at least two grid points");
        if (static_cast<std::size_t>(values_.rows()) != channels_.size())
            throw InvariantViolation("SRVF channel count does not match value rows");
        if (!values_.allFinite()) throw InvariantViolation("SRVF contains non-finite values");
        grid_ = detail::uniform_grid(values_.cols());
    }

    const std::vector<std::string>& channels() const { return channels_; }
    const Vector& grid() const { return grid_; }
    const Matrix& values() const { return values_; }
    Index grid_length() const { return values_.cols(); }
    Index num_channels() const { return values_.rows(); }

private:
    std::vector<std::string> channels_;
    Vector grid_;
    Matrix values_;
};

/// Sampled warping function gamma on the uniform grid of [0,1].
/// Endpoints are snapped to exactly 0 and 1; values must be strictly increasing.
class Warp {
public:
    Warp() = default;
    explicit Warp(Vector gamma) : gamma_(std::move(gamma)) {
        const Index m = gamma_.size();
        if (m < 2) throw NonMonotoneWarp("warp needs at least two samples");
        if (!gamma_.allFinite()) throw NonMonotoneWarp("warp contains non-finite values");
        if (std::abs(gamma_(0)) > 1e-12 || std::abs(gamma_(m - 1) - 1.0) > 1e-12)
            throw NonMonotoneWarp("warp must start at 0 and end at 1");
        gamma_(0) = 0.0;
        gamma_(m - 1) = 1.0;
        for (Index k = 0; k + 1 < m; ++k)
            if (!(gamma_(k + 1) > gamma_(k))) throw NonMonotoneWarp("warp is not strictly increasing");
    }

    static Warp identity(Index m) { return Warp(detail::uniform_grid(m)); }

    const Vector& gamma() const { return gamma_; }
    Vector grid() const { return detail::uniform_grid(gamma_.size()); }
    Index size() const { return gamma_.size(); }

    /// Linear interpolation of the warp at t in [0,1].
    double operator()(double t) const { return detail::interp_uniform(gamma_.transpose(), t); }

private:
    Vector gamma_;
};

/// psi = sqrt(gamma') normalized to unit L2 norm on [0,1].
struct WarpSphericalRep {
    Vector psi;
};

namespace detail {

inline Matrix srvf_values(const Matrix& f, SrvfMode mode, double tol = kDerivativeTolerance) {
    const Index c = f.rows();
    const Index m = f.cols();
    const double h = grid_step(m);
    Matrix d(c, m);
    for (Index r = 0; r < c; ++r) d.row(r) = derivative(f.row(r), h);
    Matrix q(c, m);
    if (mode == SrvfMode::per_channel) {
        for (Index r = 0; r < c; ++r)
            for (Index k = 0; k < m; ++k) {
                const double v = d(r, k);
                q(r, k) = std::abs(v) < tol ? 0.0 : (v > 0 ? 1.0 : -1.0) * std::sqrt(std::abs(v));
            }
        return q;
    }
    for (Index k = 0; k < m; ++k) {
        const double n = d.col(k).norm();
        q.col(k) = n < tol ? Vector::Zero(c) : Vector(d.col(k) / std::sqrt(n));
    }
    return q;
}

inline Matrix srvf_inverse_values(const Matrix& q, const Eigen::Ref<const Vector>& f0, SrvfMode mode) {
    const Index c = q.rows();
    const Index m = q.cols();
    const double h = grid_step(m);
    Matrix d(c, m);
    if (mode == SrvfMode::per_channel) {
        d = q.cwiseProduct(q.cwiseAbs());
    } else {
        for (Index k = 0; k < m; ++k) d.col(k) = q.col(k) * q.col(k).norm();
    }
    Matrix f(c, m);
    for (Index r = 0; r < c; ++r) f.row(r) = staggered_integral(d.row(r), h, f0(r));
    return f;
}

/// Nonnegative derivative of a warp by central differences (one-sided at the ends).
inline Vector warp_derivative(const Vector& gamma) {
    const double h = grid_step(gamma.size());
    return derivative(gamma.transpose(), h).transpose().cwiseMax(0.0);
}

/// (q o gamma) * sqrt(gamma') on the uniform grid.
inline Matrix warp_action_values(const Matrix& q, const Vector& gamma) {
    const Index m = q.cols();
    const Vector root = warp_derivative(gamma).cwiseSqrt();
    Matrix out(q.rows(), m);
    for (Index r = 0; r < q.rows(); ++r)
        for (Index k = 0; k < m; ++k) out(r, k) = interp_uniform(q.row(r), gamma(k)) * root(k);
    return out;
}

/// f o gamma on the uniform grid.
inline Matrix compose_values(const Matrix& f, const Vector& gamma) {
    Matrix out(f.rows(), gamma.size());
    for (Index r = 0; r < f.rows(); ++r)
        for (Index k = 0; k < gamma.size(); ++k) out(r, k) = interp_uniform(f.row(r), gamma(k));
    return out;
}

inline double l2_norm_squared(const Matrix& q) {
    const Vector w = trapezoid_weights(q.cols());
    return q.colwise().squaredNorm() * w;
}

} // namespace detail

/// Square-root velocity transform of a curve.
inline SrvfCurve to_srvf(const Curve& curve, SrvfMode mode = SrvfMode::joint, double tol = kDerivativeTolerance) {
    return SrvfCurve(curve.channels(), detail::srvf_values(curve.values(), mode, tol));
}

/// Inverse transform: f = f0 + integral of q|q| (or q||q|| in joint mode).
/// The integral uses the exact inverse of the differentiation stencil so that
/// from_srvf(to_srvf(f), f(0)) reproduces f wherever f' is resolved.
inline Curve from_srvf(const SrvfCurve& q, const Eigen::Ref<const Vector>& f0, SrvfMode mode = SrvfMode::joint,
                       std::string trial_id = "mean", std::string subject_id = "") {
    if (f0.size() != q.num_channels()) throw SizeMismatch("from_srvf: start value count differs from channel count");
    return Curve(std::move(trial_id), std::move(subject_id), q.channels(),
                 detail::srvf_inverse_values(q.values(), f0, mode));
}

inline void check_same_grid(Index a, Index b, const char* what) {
    if (a != b) throw GridMismatch(std::string(what) + ": grid lengths " + std::to_string(a) + " and " + std::to_string(b));
}

/// Group action of a warp on an SRVF: (q o gamma) sqrt(gamma').
inline SrvfCurve warp_action(const SrvfCurve& q, const Warp& w) {
    check_same_grid(q.grid_length(), w.size(), "warp_action");
    return SrvfCurve(q.channels(), detail::warp_action_values(q.values(), w.gamma()));
}

/// f o gamma for every channel of a curve.
inline Curve apply_warp(const Curve& f, const Warp& w) {
    check_same_grid(f.grid_length(), w.size(), "apply_warp");
    return Curve(f.trial_id(), f.subject_id(), f.channels(), detail::compose_values(f.values(), w.gamma()));
}

/// (w1 o w2)(t) = w1(w2(t)).
inline Warp warp_compose(const Warp& w1, const Warp& w2) {
    check_same_grid(w1.size(), w2.size(), "warp_compose");
    Vector g(w2.size());
    for (Index k = 0; k < g.size(); ++k) g(k) = w1(w2.gamma()(k));
    return Warp(std::move(g));
}

/// Inverse of the piecewise-linear warp, sampled on the grid.
inline Warp warp_invert(const Warp& w) {
    const Vector grid = w.grid();
    Vector g(w.size());
    for (Index k = 0; k < g.size(); ++k) g(k) = detail::interp_sorted(w.gamma(), grid, grid(k));
    return Warp(std::move(g));
}

inline WarpSphericalRep warp_to_sphere(const Warp& w) {
    Vector psi = detail::warp_derivative(w.gamma()).cwiseSqrt();
    const double norm = std::sqrt(detail::l2_norm_squared(psi.transpose()));
    if (norm > 0.0) psi /= norm;
    return {std::move(psi)};
}

/// gamma(t) = integral of psi^2, rescaled so gamma(1) = 1. Uses the exact
/// inverse of the differentiation stencil, falling back to the cumulative
/// trapezoid rule if that is not strictly increasing.
inline Warp sphere_to_warp(const WarpSphericalRep& rep) {
    const Vector& psi = rep.psi;
    if (psi.size() < 2) throw NonMonotoneWarp("psi needs at least two samples");
    if (psi.minCoeff() < -1e-12) throw NegativePsi("psi has negative entries");
    const RowVector d = psi.cwiseMax(0.0).cwiseAbs2().transpose();
    const double h = detail::grid_step(psi.size());
    auto finish = [](RowVector g) -> Vector {
        const double end = g(g.size() - 1);
        if (!(end > 0.0)) throw NonMonotoneWarp("psi integrates to zero");
        g /= end;
        g(0) = 0.0;
        g(g.size() - 1) = 1.0;
        return g.transpose();
    };
    Vector g = finish(detail::staggered_integral(d, h, 0.0));
    bool increasing = true;
    for (Index k = 0; k + 1 < g.size(); ++k) increasing = increasing && g(k + 1) > g(k);
    if (!increasing) g = finish(detail::cumulative_trapezoid(d, h, 0.0));
    return Warp(std::move(g));
}

/// Trapezoid L2 norm on [0,1] over all channels.
inline double l2_norm(const SrvfCurve& q) { return std::sqrt(detail::l2_norm_squared(q.values())); }

inline double l2_distance(const SrvfCurve& a, const SrvfCurve& b) {
    check_same_grid(a.grid_length(), b.grid_length(), "l2_distance");
    return std::sqrt(detail::l2_norm_squared(a.values() - b.values()));
}

} // namespace elastika
