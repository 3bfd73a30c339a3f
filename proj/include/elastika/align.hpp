#pragma once

#include "elastika/curves.hpp"
#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"
#include "elastika/sphere.hpp"
#include "elastika/srvf.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

namespace elastika {

enum class PenaltyForm {
    squared_second_diff,  ///< sum over path vertices of (second difference / h^2)^2 h
    literal_second_diff,  ///< signed integral of the second derivative
};

struct AlignConfig {
    double lambda = 0.0;
    int grid_bins = 100;
    int slope_window = 3;
    PenaltyForm penalty_form = PenaltyForm::squared_second_diff;
    int max_iters = 20;
    double tol = 1e-4;
    std::size_t threads = 1;
    SrvfMode srvf_mode = SrvfMode::joint;

    void validate() const {
        if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite nonnegative number");
        if (grid_bins < 4) throw ConfigError("grid_bins must be at least 4");
        if (slope_window < 1) throw ConfigError("slope_window must be at least 1");
        if (max_iters < 1) throw ConfigError("max_iters must be positive");
        if (!(tol > 0.0)) throw ConfigError("tol must be positive");
    }
};

struct LatticeStep {
    int di = 1;
    int dj = 1;
    bool operator==(const LatticeStep&) const = default;
};

/// Admissible DP moves: 1 <= di, dj <= window with gcd(di, dj) = 1, ordered by
/// tie-break preference (closest to slope 1 first, then smaller di).
inline std::vector<LatticeStep> lattice_steps(int window) {
    std::vector<LatticeStep> steps;
    for (int a = 1; a <= window; ++a)
        for (int b = 1; b <= window; ++b)
            if (std::gcd(a, b) == 1) steps.push_back({a, b});
    std::stable_sort(steps.begin(), steps.end(), [](const LatticeStep& x, const LatticeStep& y) {
        const double dx = std::abs(std::log(static_cast<double>(x.dj) / x.di));
        const double dy = std::abs(std::log(static_cast<double>(y.dj) / y.di));
        if (dx != dy) return dx < dy;
        return x.di < y.di;
    });
    return steps;
}

/// Output of a single pairwise alignment.
struct DpAlignment {
    Warp warp;                        ///< on the grid of the inputs
    double cost = 0.0;                ///< data_cost + lambda * penalty
    double data_cost = 0.0;
    double penalty = 0.0;             ///< unweighted roughness of the path
    std::vector<LatticeStep> steps;   ///< lattice path from (0,0) to (N,N)
    Matrix warped_target;             ///< target SRVF transported along the path, on the lattice
};

namespace detail {

/// Linear resampling of each row onto bins + 1 evenly spaced points.
inline Matrix resample_rows(const Matrix& q, Index points) {
    if (q.cols() == points) return q;
    const Vector t = uniform_grid(points);
    Matrix out(q.rows(), points);
    for (Index r = 0; r < q.rows(); ++r)
        for (Index k = 0; k < points; ++k) out(r, k) = interp_uniform(q.row(r), t(k));
    return out;
}

/// Value of q (lattice samples) at fractional lattice position y, scaled by s.
inline void lattice_sample(const Matrix& q, double y, double s, Eigen::Ref<Vector> out) {
    const Index last = q.cols() - 1;
    Index y0 = static_cast<Index>(std::floor(y));
    if (y0 >= last) y0 = last - 1;
    if (y0 < 0) y0 = 0;
    const double frac = y - static_cast<double>(y0);
    if (frac == 0.0)
        out = s * q.col(y0);
    else
        out = s * ((1.0 - frac) * q.col(y0) + frac * q.col(y0 + 1));
}

/// Trapezoid cost of matching template columns k..i against the target on
/// the straight segment (k,l) -> (i,j).
inline double segment_cost(const Matrix& q1, const Matrix& q2, int k, int l, int i, int j, double h) {
    const int a = i - k;
    const int b = j - l;
    const double s = std::sqrt(static_cast<double>(b) / a);
    Vector v(q1.rows());
    double sum = 0.0;
    for (int x = k; x <= i; ++x) {
        const double y = x == i ? static_cast<double>(j) : l + static_cast<double>(b) * (x - k) / a;
        lattice_sample(q2, y, s, v);
        const double e = (q1.col(x) - v).squaredNorm();
        sum += (x == k || x == i) ? 0.5 * e : e;
    }
    return h * sum;
}

/// Roughness contributed at a vertex where the slope changes from `in` to `out`.
inline double vertex_penalty(const LatticeStep& in, const LatticeStep& out, PenaltyForm form, int bins) {
    const double d = static_cast<double>(out.dj) / out.di - static_cast<double>(in.dj) / in.di;
    return form == PenaltyForm::squared_second_diff ? d * d * bins : d;
}

/// Lattice path vertices (as fractions of [0,1]) -> warp sampled on `points` grid points.
inline Warp path_to_warp(const std::vector<LatticeStep>& steps, int bins, Index points) {
    Vector px(static_cast<Index>(steps.size()) + 1), py(static_cast<Index>(steps.size()) + 1);
    int i = 0, j = 0;
    px(0) = 0.0;
    py(0) = 0.0;
    for (std::size_t s = 0; s < steps.size(); ++s) {
        i += steps[s].di;
        j += steps[s].dj;
        px(static_cast<Index>(s) + 1) = static_cast<double>(i) / bins;
        py(static_cast<Index>(s) + 1) = static_cast<double>(j) / bins;
    }
    const Vector t = uniform_grid(points);
    Vector g(points);
    for (Index k = 0; k < points; ++k) g(k) = interp_sorted(px, py, t(k));
    g(0) = 0.0;
    g(points - 1) = 1.0;
    return Warp(std::move(g));
}

/// Target transported along the path; shared vertices carry the average of
/// the two adjoining segment values, which is the minimizer of the path cost
/// with respect to the template at that vertex.
inline Matrix transport_target(const Matrix& q2, const std::vector<LatticeStep>& steps) {
    Matrix out = Matrix::Zero(q2.rows(), q2.cols());
    Vector count = Vector::Zero(q2.cols());
    Vector v(q2.rows());
    int k = 0, l = 0;
    for (const auto& st : steps) {
        const int i = k + st.di;
        const int j = l + st.dj;
        const double s = std::sqrt(static_cast<double>(st.dj) / st.di);
        for (int x = k; x <= i; ++x) {
            const double y = x == i ? static_cast<double>(j) : l + static_cast<double>(st.dj) * (x - k) / st.di;
            lattice_sample(q2, y, s, v);
            out.col(x) += v;
            count(x) += 1.0;
        }
        k = i;
        l = j;
    }
    for (Index x = 0; x < out.cols(); ++x) out.col(x) /= count(x);
    return out;
}

/// DP over (node, incoming step) on lattice-sampled SRVFs with bins + 1 columns.
inline DpAlignment dp_align_lattice(const Matrix& q1, const Matrix& q2, const AlignConfig& config, Index output_points) {
    const int n = config.grid_bins;
    const double h = 1.0 / n;
    const auto steps = lattice_steps(config.slope_window);
    const int ns = static_cast<int>(steps.size());
    const int side = n + 1;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> cost(static_cast<std::size_t>(side) * side * ns, inf);
    std::vector<int> back(cost.size(), -1);
    auto at = [&](int i, int j, int s) { return (static_cast<std::size_t>(i) * side + j) * ns + s; };

    std::vector<double> pen(static_cast<std::size_t>(ns) * ns);
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b)
            pen[static_cast<std::size_t>(a) * ns + b] =
                config.lambda == 0.0 ? 0.0 : config.lambda * vertex_penalty(steps[a], steps[b], config.penalty_form, n);

    for (int i = 1; i <= n; ++i) {
        for (int j = 1; j <= n; ++j) {
            for (int s = 0; s < ns; ++s) {
                const int k = i - steps[s].di;
                const int l = j - steps[s].dj;
                if (k < 0 || l < 0) continue;
                double best = inf;
                int arg = -1;
                if (k == 0 && l == 0) {
                    best = 0.0;
                } else {
                    if (k == 0 || l == 0) continue;
                    for (int p = 0; p < ns; ++p) {
                        const double c = cost[at(k, l, p)];
                        if (c == inf) continue;
                        const double v = c + pen[static_cast<std::size_t>(p) * ns + s];
                        if (v < best) {
                            best = v;
                            arg = p;
                        }
                    }
                    if (arg < 0) continue;
                }
                cost[at(i, j, s)] = best + segment_cost(q1, q2, k, l, i, j, h);
                back[at(i, j, s)] = arg;
            }
        }
    }

    int last = -1;
    double best = inf;
    for (int s = 0; s < ns; ++s)
        if (cost[at(n, n, s)] < best) {
            best = cost[at(n, n, s)];
            last = s;
        }
    if (last < 0) throw Error("dp_align: no admissible lattice path");

    DpAlignment out;
    out.cost = best;
    std::vector<int> rev;
    int i = n, j = n, s = last;
    while (s >= 0) {
        rev.push_back(s);
        const int p = back[at(i, j, s)];
        i -= steps[s].di;
        j -= steps[s].dj;
        s = p;
    }
    for (auto it = rev.rbegin(); it != rev.rend(); ++it) out.steps.push_back(steps[*it]);

    int k = 0, l = 0;
    for (std::size_t t = 0; t < out.steps.size(); ++t) {
        const int ii = k + out.steps[t].di;
        const int jj = l + out.steps[t].dj;
        out.data_cost += segment_cost(q1, q2, k, l, ii, jj, h);
        if (t > 0) out.penalty += vertex_penalty(out.steps[t - 1], out.steps[t], config.penalty_form, n);
        k = ii;
        l = jj;
    }
    out.warp = path_to_warp(out.steps, n, output_points);
    out.warped_target = transport_target(q2, out.steps);
    return out;
}

} // namespace detail

/// Penalized alignment of `target` to `templ`: finds the lattice path warp
/// minimizing ||templ - (target o gamma) sqrt(gamma')||^2 + lambda R(gamma).
inline DpAlignment dp_align(const SrvfCurve& templ, const SrvfCurve& target, const AlignConfig& config) {
    config.validate();
    check_same_grid(templ.grid_length(), target.grid_length(), "dp_align");
    if (templ.num_channels() != target.num_channels()) throw GridMismatch("dp_align: channel counts differ");
    const Index points = config.grid_bins + 1;
    return detail::dp_align_lattice(detail::resample_rows(templ.values(), points),
                                    detail::resample_rows(target.values(), points), config, templ.grid_length());
}

struct AlignmentResult {
    SrvfCurve karcher_mean_srvf;
    Curve karcher_mean_curve;
    std::vector<Warp> warps;
    std::vector<Curve> aligned_curves;
    std::vector<SrvfCurve> aligned_srvfs;
    std::vector<double> objective_trace;
    std::vector<std::vector<LatticeStep>> lattice_paths;  ///< DP paths of the final iteration
    AlignConfig config;
    bool converged = false;  ///< false means max_iters was hit; the best iterate is returned
    int iterations = 0;
    std::size_t template_index = 0;  ///< curve used to initialize the template
};

namespace detail {

/// Re-centers warps so that their intrinsic mean on the warp sphere is the identity.
inline void center_warps(std::vector<Warp>& warps, int max_passes = 5, double tol = 1e-3) {
    if (warps.empty()) return;
    const Index m = warps.front().size();
    const Vector w = trapezoid_weights(m);
    const Vector id = uniform_grid(m);
    for (int pass = 0; pass < max_passes; ++pass) {
        Matrix psi(m, static_cast<Index>(warps.size()));
        for (std::size_t i = 0; i < warps.size(); ++i) psi.col(static_cast<Index>(i)) = warp_to_sphere(warps[i]).psi;
        const Warp mean = sphere_to_warp({sphere::karcher_mean(psi, w)});
        if ((mean.gamma() - id).cwiseAbs().maxCoeff() <= tol) return;
        const Warp inv = warp_invert(mean);
        for (auto& g : warps) g = warp_compose(g, inv);
    }
}

} // namespace detail

/// Karcher mean by alternating DP alignment and template averaging, followed
/// by warp centering. One common warp per curve drives all channels.
inline AlignmentResult karcher_mean(const Dataset& dataset, const AlignConfig& config) {
    config.validate();
    if (dataset.size() < 2) throw EmptyDataset("karcher_mean needs at least two curves");
    const std::size_t n = dataset.size();
    const Index m = dataset.grid_length();
    const Index points = config.grid_bins + 1;
    const Vector lw = detail::trapezoid_weights(points);

    std::vector<Matrix> q(n), ql(n);
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = detail::srvf_values(dataset[i].values(), config.srvf_mode);
        ql[i] = detail::resample_rows(q[i], points);
    }

    Matrix cross = Matrix::Zero(ql[0].rows(), points);
    for (const auto& x : ql) cross += x;
    cross /= static_cast<double>(n);
    AlignmentResult result;
    double closest = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double d = (ql[i] - cross).colwise().squaredNorm() * lw;
        if (d < closest) {
            closest = d;
            result.template_index = i;
        }
    }
    Matrix templ = ql[result.template_index];

    std::vector<DpAlignment> fits(n);
    double previous = std::numeric_limits<double>::infinity();
    for (int it = 0; it < config.max_iters; ++it) {
        detail::parallel_for(n, config.threads, [&](std::size_t i) { fits[i] = detail::dp_align_lattice(templ, ql[i], config, m); });
        double total = 0.0;
        for (const auto& f : fits) total += f.cost;
        result.objective_trace.push_back(total);
        result.iterations = it + 1;
        if (std::isfinite(previous) && previous - total <= config.tol * previous) {
            result.converged = true;
            break;
        }
        if (total == 0.0) {
            result.converged = true;
            break;
        }
        previous = total;
        if (it + 1 == config.max_iters) break;
        Matrix next = Matrix::Zero(templ.rows(), templ.cols());
        for (const auto& f : fits) next += f.warped_target;
        templ = next / static_cast<double>(n);
    }

    result.warps.reserve(n);
    for (auto& f : fits) {
        result.warps.push_back(f.warp);
        result.lattice_paths.push_back(std::move(f.steps));
    }
    detail::center_warps(result.warps);

    const auto& channels = dataset.channels();
    Matrix mu = Matrix::Zero(static_cast<Index>(channels.size()), m);
    Vector f0 = Vector::Zero(static_cast<Index>(channels.size()));
    for (std::size_t i = 0; i < n; ++i) {
        result.aligned_curves.push_back(apply_warp(dataset[i], result.warps[i]));
        Matrix qa = detail::warp_action_values(q[i], result.warps[i].gamma());
        mu += qa;
        f0 += dataset[i].values().col(0);
        result.aligned_srvfs.emplace_back(channels, std::move(qa));
    }
    mu /= static_cast<double>(n);
    f0 /= static_cast<double>(n);
    result.karcher_mean_srvf = SrvfCurve(channels, mu);
    result.karcher_mean_curve = from_srvf(result.karcher_mean_srvf, f0, config.srvf_mode, "karcher_mean", "");
    result.config = config;
    return result;
}

/// Sum over curves of squared L2 distances of SRVFs to their cross-sectional mean.
inline double amplitude_spread(const std::vector<Matrix>& srvfs) {
    if (srvfs.empty()) return 0.0;
    Matrix mean = Matrix::Zero(srvfs[0].rows(), srvfs[0].cols());
    for (const auto& s : srvfs) mean += s;
    mean /= static_cast<double>(srvfs.size());
    double total = 0.0;
    for (const auto& s : srvfs) total += detail::l2_norm_squared(s - mean);
    return total;
}

/// Spread of the unaligned SRVFs of a dataset.
inline double amplitude_spread(const Dataset& dataset, SrvfMode mode = SrvfMode::joint) {
    std::vector<Matrix> q;
    for (const auto& c : dataset.curves()) q.push_back(detail::srvf_values(c.values(), mode));
    return amplitude_spread(q);
}

/// Discrete integral of the squared second derivative of a warp.
inline double warp_roughness(const Warp& w) {
    const Vector& g = w.gamma();
    const double h = detail::grid_step(g.size());
    double r = 0.0;
    for (Index k = 1; k + 1 < g.size(); ++k) {
        const double d2 = (g(k + 1) - 2.0 * g(k) + g(k - 1)) / (h * h);
        r += d2 * d2 * h;
    }
    return r;
}

/// Geodesic distance of the warp's spherical representation from psi = 1.
inline double warp_pole_distance(const Warp& w) {
    const Vector weights = detail::trapezoid_weights(w.size());
    return sphere::distance(warp_to_sphere(w).psi, Vector::Ones(w.size()), weights);
}

struct SweepDiagnostics {
    double lambda = 0.0;
    double mean_roughness = 0.0;
    double staircase_score = 0.0;  ///< fraction of lattice steps at the slope window limit
    double warp_spread = 0.0;      ///< mean geodesic distance of psi_i from the pole
    double amplitude_spread = 0.0; ///< sum of squared distances of aligned SRVFs to the mean
    double final_objective = 0.0;
    int iterations = 0;
    bool converged = false;
};

inline SweepDiagnostics diagnose(const AlignmentResult& r) {
    SweepDiagnostics d;
    d.lambda = r.config.lambda;
    const auto n = static_cast<double>(r.warps.size());
    for (const auto& w : r.warps) {
        d.mean_roughness += warp_roughness(w) / n;
        d.warp_spread += warp_pole_distance(w) / n;
    }
    std::size_t total = 0, edge = 0;
    for (const auto& path : r.lattice_paths)
        for (const auto& s : path) {
            ++total;
            if (s.di == r.config.slope_window || s.dj == r.config.slope_window) ++edge;
        }
    // A window of 1 only admits the diagonal step, which is never a staircase.
    d.staircase_score = total == 0 || r.config.slope_window == 1 ? 0.0 : static_cast<double>(edge) / total;
    std::vector<Matrix> aligned;
    for (const auto& s : r.aligned_srvfs) aligned.push_back(s.values());
    d.amplitude_spread = amplitude_spread(aligned);
    d.final_objective = r.objective_trace.empty() ? 0.0 : r.objective_trace.back();
    d.iterations = r.iterations;
    d.converged = r.converged;
    return d;
}

/// Runs karcher_mean once per lambda and reports over-alignment diagnostics.
inline std::vector<SweepDiagnostics> lambda_sweep(const Dataset& dataset, const std::vector<double>& lambdas,
                                                  AlignConfig config) {
    if (lambdas.empty()) throw ConfigError("lambda_sweep needs at least one lambda");
    std::vector<SweepDiagnostics> rows;
    for (double l : lambdas) {
        config.lambda = l;
        rows.push_back(diagnose(karcher_mean(dataset, config)));
    }
    return rows;
}

} // namespace elastika
