#pragma once

#include "elastika/curves.hpp"
#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"
#include "elastika/features.hpp"
#include "elastika/srvf.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace elastika {

// ---------------------------------------------------------------------------
// Amplitude PCA

struct PcaDecomposition {
    std::string channel;
    Vector mean;                 ///< length M
    Matrix components;           ///< M x k, orthonormal columns
    Matrix scores;               ///< n x k
    Vector explained_variance;   ///< length k, nonincreasing
    double total_variance = 0.0; ///< sum of all component variances
    int requested_components = 0;
    bool clamped = false;        ///< fewer components than requested were available

    Index num_components() const { return components.cols(); }
};

/// PCA of the rows of `data` (n x M) via SVD of the centered matrix.
/// Each component is signed so that its largest-magnitude entry is positive.
inline PcaDecomposition pca(const Matrix& data, int num_components) {
    const Index n = data.rows();
    const Index m = data.cols();
    if (n < 1) throw EmptyDataset("pca needs at least one row");
    if (num_components < 0) throw ConfigError("num_components must be nonnegative");
    PcaDecomposition out;
    out.requested_components = num_components;
    out.mean = data.colwise().mean().transpose();
    const Matrix centered = data.rowwise() - out.mean.transpose();
    const Index available = std::min<Index>(n - 1, m);
    const Index k = std::min<Index>(num_components, available);
    out.clamped = k < num_components;
    const double dof = static_cast<double>(std::max<Index>(n - 1, 1));
    if (available <= 0) {
        out.components = Matrix::Zero(m, 0);
        out.scores = Matrix::Zero(n, 0);
        out.explained_variance = Vector::Zero(0);
        return out;
    }
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector& s = svd.singularValues();
    out.total_variance = s.squaredNorm() / dof;
    out.components = svd.matrixV().leftCols(k);
    out.explained_variance = s.head(k).cwiseAbs2() / dof;
    for (Index j = 0; j < k; ++j) {
        Index arg = 0;
        out.components.col(j).cwiseAbs().maxCoeff(&arg);
        if (out.components(arg, j) < 0.0) out.components.col(j) *= -1.0;
    }
    out.scores = centered * out.components;
    return out;
}

/// PCA of one channel of a collection of (aligned) curves.
inline PcaDecomposition amplitude_pca(const std::vector<Curve>& curves, const std::string& channel, int num_components) {
    if (curves.empty()) throw EmptyDataset("amplitude_pca needs at least one curve");
    const Index m = curves.front().grid_length();
    Matrix data(static_cast<Index>(curves.size()), m);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].grid_length() != m) throw GridMismatch("amplitude_pca: curves differ in grid length");
        data.row(static_cast<Index>(i)) = curves[i].channel(channel);
    }
    PcaDecomposition out = pca(data, num_components);
    out.channel = channel;
    return out;
}

/// Rows reconstructed from the leading `k` components.
inline Matrix pca_reconstruct(const PcaDecomposition& p, Index k) {
    k = std::min(k, p.num_components());
    Matrix out = p.scores.leftCols(k) * p.components.leftCols(k).transpose();
    return out.rowwise() + p.mean.transpose();
}

// ---------------------------------------------------------------------------
// Great-sphere principal nested spheres

struct PnsOptions {
    int restarts = 10;
    std::uint64_t seed = 0;
    int max_iters = 200;
};

/// Backward nested-sphere decomposition with every subsphere a great sphere.
/// Column j of `residuals` is the signed geodesic residual of mode j + 1
/// (column 0 is the final circle, i.e. the dominant mode).
struct PnsDecomposition {
    Matrix span;                  ///< D x r orthonormal basis of the working subspace
    std::vector<Vector> axes;     ///< fitted axes, from the largest sphere down; axes[l] has r - l entries
    std::vector<Matrix> bases;    ///< bases[l]: (r - l) x (r - l - 1) coordinates of the axis complement
    Vector radii;                 ///< per mode, all pi/2
    Matrix residuals;             ///< n x (r - 1), all modes
    double circle_mean_angle = 0.0;
    Vector pole;                  ///< ambient coordinates of the final point
    int num_levels = 0;           ///< modes requested by the caller
    std::vector<double> level_objectives;  ///< sum of squared residuals per fitted level, fitting order

    Index total_modes() const { return residuals.cols(); }
    Matrix signed_residuals() const { return residuals.leftCols(std::min<Index>(num_levels, residuals.cols())); }
};

namespace detail {

inline double axis_objective(const Matrix& y, const Vector& a) {
    const Vector p = (y * a).cwiseMax(-1.0).cwiseMin(1.0);
    double s = 0.0;
    for (Index i = 0; i < p.size(); ++i) {
        const double r = std::asin(p(i));
        s += r * r;
    }
    return s;
}

/// Levenberg-Marquardt on the unit sphere for the axis minimizing the sum of
/// squared geodesic distances of the rows of y to the great subsphere a-perp.
inline Vector refine_axis(const Matrix& y, Vector a, int max_iters) {
    a.normalize();
    double f = axis_objective(y, a);
    double mu = 1e-6;
    for (int it = 0; it < max_iters; ++it) {
        const Vector p = (y * a).cwiseMax(-1.0 + 1e-15).cwiseMin(1.0 - 1e-15);
        Vector r(p.size()), g(p.size());
        for (Index i = 0; i < p.size(); ++i) {
            r(i) = std::asin(p(i));
            g(i) = 1.0 / std::sqrt(1.0 - p(i) * p(i));
        }
        Matrix jac = g.asDiagonal() * y;
        jac -= g.cwiseProduct(p) * a.transpose();
        const Vector grad = jac.transpose() * r;
        const Matrix hess = jac.transpose() * jac;
        bool improved = false;
        for (int tries = 0; tries < 30; ++tries) {
            Matrix sys = hess;
            sys.diagonal().array() += mu * (1.0 + hess.diagonal().maxCoeff());
            const Vector step = sys.ldlt().solve(-grad);
            Vector cand = a + step - a.dot(step) * a;
            cand.normalize();
            const double fc = axis_objective(y, cand);
            if (fc < f) {
                const double gain = f - fc;
                a = cand;
                f = fc;
                mu = std::max(mu / 4.0, 1e-15);
                improved = true;
                if (gain <= 1e-15 * (1.0 + f) || step.norm() < 1e-13) return a;
                break;
            }
            mu *= 8.0;
            if (mu > 1e12) break;
        }
        if (!improved) break;
    }
    return a;
}

/// Best great-subsphere axis: smallest eigenvector start plus random restarts.
inline Vector fit_great_axis(const Matrix& y, const PnsOptions& opt, std::mt19937_64& rng) {
    const Index d = y.cols();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(y.transpose() * y);
    Vector best = refine_axis(y, eig.eigenvectors().col(0), opt.max_iters);
    double best_f = axis_objective(y, best);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int k = 0; k < opt.restarts; ++k) {
        Vector a(d);
        for (Index j = 0; j < d; ++j) a(j) = z(rng);
        a = refine_axis(y, a, opt.max_iters);
        const double f = axis_objective(y, a);
        if (f < best_f - 1e-15) {
            best_f = f;
            best = a;
        }
    }
    Index arg = 0;
    best.cwiseAbs().maxCoeff(&arg);
    if (best(arg) < 0.0) best = -best;
    return best;
}

/// Columns: orthonormal basis of the complement of unit vector a (Householder).
inline Matrix complement_basis(const Vector& a) {
    const Index d = a.size();
    Vector v = a;
    v(d - 1) -= 1.0;
    Matrix h = Matrix::Identity(d, d);
    const double vv = v.squaredNorm();
    if (vv > 1e-30) h -= 2.0 / vv * v * v.transpose();
    return h.leftCols(d - 1);
}

inline double wrap_angle(double x) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    x = std::fmod(x + std::numbers::pi, two_pi);
    if (x < 0) x += two_pi;
    return x - std::numbers::pi;
}

/// Intrinsic mean on the circle, searching all unwrapping candidates.
inline double circle_mean(const std::vector<double>& theta) {
    const auto n = theta.size();
    std::vector<double> t(theta);
    constexpr double two_pi = 2.0 * std::numbers::pi;
    for (auto& x : t) {
        x = std::fmod(x, two_pi);
        if (x < 0) x += two_pi;
    }
    std::sort(t.begin(), t.end());
    double acc = 0.0;
    for (double x : t) acc += x;
    double best = 0.0;
    double best_f = std::numeric_limits<double>::infinity();
    // Candidate k treats the k smallest angles as shifted up by 2 pi.
    for (std::size_t k = 0; k < n; ++k) {
        const double c = acc / static_cast<double>(n);
        double f = 0.0;
        for (double x : t) {
            const double r = wrap_angle(x - c);
            f += r * r;
        }
        if (f < best_f - 1e-14) {
            best_f = f;
            best = c;
        }
        acc += two_pi;
    }
    // Polish: residuals relative to the best candidate average to zero at a minimum.
    double shift = 0.0;
    for (double x : t) shift += wrap_angle(x - best);
    best += shift / static_cast<double>(n);
    return wrap_angle(best);
}

} // namespace detail

/// Great-sphere PNS of unit vectors stored as the rows of `points`.
inline PnsDecomposition pns_great_sphere(const Matrix& points, int num_levels, const PnsOptions& options = {}) {
    const Index n = points.rows();
    const Index dim = points.cols();
    if (n < 3) throw EmptyDataset("phase PNS needs at least three points");
    if (num_levels < 1 || num_levels > std::min<Index>(n - 1, dim - 1))
        throw IndexOutOfRange("num_levels must lie in [1, min(points - 1, dimension - 1)]");

    PnsDecomposition out;
    out.num_levels = num_levels;

    // Work in the span of the data, padded so every requested level exists.
    Eigen::BDCSVD<Matrix> svd(points.transpose(), Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Index rank = 0;
    for (Index j = 0; j < sv.size(); ++j)
        if (sv(j) > 1e-10 * std::max(1.0, sv(0))) ++rank;
    const Index r = std::min<Index>(dim, std::max<Index>(rank, num_levels + 1));
    Matrix span(dim, r);
    span.leftCols(std::min(rank, r)) = svd.matrixU().leftCols(std::min(rank, r));
    for (Index j = rank; j < r; ++j) {
        // Complete the basis with coordinate directions orthogonalized against it.
        Vector e = Vector::Zero(dim);
        for (Index c = 0; c < dim; ++c) {
            e.setZero();
            e(c) = 1.0;
            e -= span.leftCols(j) * (span.leftCols(j).transpose() * e);
            if (e.norm() > 1e-6) break;
        }
        span.col(j) = e.normalized();
    }
    out.span = span;
    Matrix y = points * span;
    for (Index i = 0; i < n; ++i) y.row(i).normalize();

    std::mt19937_64 rng(detail::derive_seed(options.seed, 11));
    const Index fitted = r - 2;
    out.residuals = Matrix::Zero(n, r - 1);
    for (Index l = 0; l < fitted; ++l) {
        const Vector a = detail::fit_great_axis(y, options, rng);
        const Matrix basis = detail::complement_basis(a);
        const Vector p = (y * a).cwiseMax(-1.0).cwiseMin(1.0);
        double obj = 0.0;
        Matrix next(n, y.cols() - 1);
        for (Index i = 0; i < n; ++i) {
            const double xi = -std::asin(p(i));
            out.residuals(i, fitted - l) = xi;
            obj += xi * xi;
            Vector proj = y.row(i).transpose() - p(i) * a;
            const double pn = proj.norm();
            if (pn > 1e-15)
                proj /= pn;
            else
                proj = basis.col(0);
            next.row(i) = (basis.transpose() * proj).transpose();
            next.row(i).normalize();
        }
        out.axes.push_back(a);
        out.bases.push_back(basis);
        out.level_objectives.push_back(obj);
        y = std::move(next);
    }

    std::vector<double> theta(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) theta[static_cast<std::size_t>(i)] = std::atan2(y(i, 1), y(i, 0));
    out.circle_mean_angle = detail::circle_mean(theta);
    for (Index i = 0; i < n; ++i)
        out.residuals(i, 0) = detail::wrap_angle(theta[static_cast<std::size_t>(i)] - out.circle_mean_angle);
    out.radii = Vector::Constant(r - 1, std::numbers::pi / 2.0);

    Vector z(2);
    z << std::cos(out.circle_mean_angle), std::sin(out.circle_mean_angle);
    for (Index l = fitted - 1; l >= 0; --l) z = out.bases[static_cast<std::size_t>(l)] * z;
    out.pole = span * z;
    return out;
}

/// Maps mode scores (entry j = residual of mode j + 1; missing entries are 0)
/// back to a unit vector in the ambient space.
inline Vector pns_inverse(const PnsDecomposition& d, const Vector& scores) {
    const Index modes = d.total_modes();
    if (scores.size() > modes) throw IndexOutOfRange("more scores than PNS modes");
    auto score = [&](Index j) { return j < scores.size() ? scores(j) : 0.0; };
    const double th = d.circle_mean_angle + score(0);
    Vector z(2);
    z << std::cos(th), std::sin(th);
    const auto fitted = static_cast<Index>(d.axes.size());
    for (Index l = fitted - 1; l >= 0; --l) {
        const double xi = score(fitted - l);
        z = std::cos(xi) * (d.bases[static_cast<std::size_t>(l)] * z) - std::sin(xi) * d.axes[static_cast<std::size_t>(l)];
    }
    return d.span * z;
}

/// Spherical coordinates of warps: rows are sqrt(w) * psi_i (unit Euclidean norm).
inline Matrix warps_to_points(const std::vector<Warp>& warps) {
    if (warps.empty()) throw EmptyDataset("no warps");
    const Index m = warps.front().size();
    const Vector sw = detail::trapezoid_weights(m).cwiseSqrt();
    Matrix pts(static_cast<Index>(warps.size()), m);
    for (std::size_t i = 0; i < warps.size(); ++i) {
        if (warps[i].size() != m) throw GridMismatch("warps differ in grid length");
        pts.row(static_cast<Index>(i)) = sw.cwiseProduct(warp_to_sphere(warps[i]).psi).transpose();
    }
    return pts;
}

/// psi samples for a point produced by pns_inverse on phase data.
inline Vector point_to_psi(const Vector& point) {
    return point.cwiseQuotient(detail::trapezoid_weights(point.size()).cwiseSqrt());
}

inline PnsDecomposition phase_pns(const std::vector<Warp>& warps, int num_levels, const PnsOptions& options = {}) {
    return pns_great_sphere(warps_to_points(warps), num_levels, options);
}

// ---------------------------------------------------------------------------
// Mode extremes

struct ModeExtremes {
    int mode_index = 0;  ///< 0-based
    double low_score = 0.0;
    double high_score = 0.0;
    Curve low_curve;
    Curve mean_curve;
    Curve high_curve;
    std::optional<Warp> low_warp;   ///< phase modes: reconstructed warp at the low score
    std::optional<Warp> high_warp;
    std::vector<std::string> warnings;
};

/// Amplitude mode: mean +/- the observed extreme scores along the component
/// (or +/- sigma_scale standard deviations when given).
inline ModeExtremes mode_extremes(const PcaDecomposition& p, int mode_index, std::optional<double> sigma_scale = std::nullopt) {
    if (mode_index < 0 || mode_index >= p.num_components())
        throw IndexOutOfRange("mode index " + std::to_string(mode_index) + " out of range");
    ModeExtremes out;
    out.mode_index = mode_index;
    const Vector comp = p.components.col(mode_index);
    if (sigma_scale) {
        const double sd = std::sqrt(p.explained_variance(mode_index));
        out.low_score = -*sigma_scale * sd;
        out.high_score = *sigma_scale * sd;
    } else {
        out.low_score = p.scores.col(mode_index).minCoeff();
        out.high_score = p.scores.col(mode_index).maxCoeff();
    }
    const std::vector<std::string> ch{p.channel.empty() ? std::string("value") : p.channel};
    auto make = [&](const char* id, double s) {
        return Curve(id, "", ch, Matrix((p.mean + s * comp).transpose()));
    };
    out.low_curve = make("low", out.low_score);
    out.mean_curve = make("mean", 0.0);
    out.high_curve = make("high", out.high_score);
    return out;
}

namespace detail {

inline Warp phase_warp_at(const PnsDecomposition& d, int mode_index, double score, std::vector<std::string>& warnings) {
    Vector s = Vector::Zero(mode_index + 1);
    s(mode_index) = score;
    Vector psi = point_to_psi(pns_inverse(d, s));
    if (psi.sum() < 0.0) psi = -psi;
    if (psi.minCoeff() < -1e-12) {
        warnings.push_back("mode " + std::to_string(mode_index + 1) + ": reconstructed psi has negative entries at score " +
                           std::to_string(score) + "; clamped to zero");
    }
    return sphere_to_warp({psi.cwiseMax(0.0)});
}

} // namespace detail

/// Phase mode: warps reconstructed at the observed (or +/- sigma) score
/// extremes, inverted and applied to the reference curve.
inline ModeExtremes mode_extremes(const PnsDecomposition& d, int mode_index, const Curve& reference,
                                  std::optional<double> sigma_scale = std::nullopt) {
    if (mode_index < 0 || mode_index >= d.total_modes())
        throw IndexOutOfRange("mode index " + std::to_string(mode_index) + " out of range");
    if (reference.grid_length() != d.span.rows()) throw GridMismatch("reference curve grid differs from the warp grid");
    ModeExtremes out;
    out.mode_index = mode_index;
    const Vector col = d.residuals.col(mode_index);
    if (sigma_scale) {
        const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(std::max<Index>(col.size() - 1, 1)));
        out.low_score = -*sigma_scale * sd;
        out.high_score = *sigma_scale * sd;
    } else {
        out.low_score = col.minCoeff();
        out.high_score = col.maxCoeff();
    }
    auto curve_at = [&](double s, const char* id, std::optional<Warp>* keep) {
        try {
            Warp w = detail::phase_warp_at(d, mode_index, s, out.warnings);
            Curve c = apply_warp(reference, warp_invert(w));
            c = Curve(id, reference.subject_id(), c.channels(), c.values());
            if (keep) *keep = std::move(w);
            return c;
        } catch (const NonMonotoneWarp& e) {
            out.warnings.push_back("mode " + std::to_string(mode_index + 1) + ": reconstructed warp at score " +
                                   std::to_string(s) + " is not strictly increasing (" + e.what() + ")");
            return Curve(id, reference.subject_id(), reference.channels(), reference.values());
        }
    };
    out.low_curve = curve_at(out.low_score, "low", &out.low_warp);
    out.mean_curve = curve_at(0.0, "mean", nullptr);
    out.high_curve = curve_at(out.high_score, "high", &out.high_warp);
    return out;
}

/// Feature matrix: <channel>_PC1..k for each amplitude block, then phase_PNS1..k.
inline FeatureMatrix score_table(const std::vector<PcaDecomposition>& amplitude, const PnsDecomposition& phase, int k,
                                 const std::vector<std::string>& subject_ids, const std::vector<std::string>& trial_ids) {
    if (k < 1) throw ConfigError("k must be positive");
    const Index n = phase.residuals.rows();
    if (static_cast<Index>(subject_ids.size()) != n || static_cast<Index>(trial_ids.size()) != n)
        throw SizeMismatch("score_table: id lists do not match the number of curves");
    FeatureMatrix fm;
    fm.subject_ids = subject_ids;
    fm.trial_ids = trial_ids;
    fm.values.resize(n, static_cast<Index>(amplitude.size() + 1) * k);
    Index col = 0;
    for (const auto& p : amplitude) {
        if (p.scores.rows() != n) throw SizeMismatch("score_table: decompositions cover different curve counts");
        if (p.num_components() < k) throw SizeMismatch("score_table: channel '" + p.channel + "' has fewer than k components");
        for (int j = 0; j < k; ++j) {
            fm.columns.push_back(p.channel + "_PC" + std::to_string(j + 1));
            fm.values.col(col++) = p.scores.col(j);
        }
    }
    if (phase.total_modes() < k) throw SizeMismatch("score_table: phase decomposition has fewer than k modes");
    for (int j = 0; j < k; ++j) {
        fm.columns.push_back("phase_PNS" + std::to_string(j + 1));
        fm.values.col(col++) = phase.residuals.col(j);
    }
    return fm;
}

} // namespace elastika
