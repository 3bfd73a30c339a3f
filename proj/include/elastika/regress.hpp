#pragma once

#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"
#include "elastika/features.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace elastika {

// ---------------------------------------------------------------------------
// Ordinary least squares

struct OlsFit {
    std::vector<std::string> columns;  ///< predictor names (intercept excluded)
    Vector coefficients;               ///< intercept first
    Vector residuals;
    double ssr = 0.0;
    double sst = 0.0;
    double r_squared = 0.0;
    Index n = 0;
    Index num_predictors = 0;          ///< excludes the intercept
    Index rank = 0;
    bool rank_deficient = false;
    bool degenerate_response = false;  ///< zero variance in y; R^2 reported as 0
};

/// Least squares of y on [1, predictors] using a complete orthogonal
/// decomposition (minimum-norm solution when rank deficient).
inline OlsFit fit_ols(const Matrix& predictors, const Vector& y, std::vector<std::string> columns = {}) {
    const Index n = predictors.rows();
    const Index p = predictors.cols();
    if (y.size() != n) throw SizeMismatch("fit_ols: response length differs from design rows");
    if (n <= p + 1) throw ConfigError("fit_ols: need more rows than columns");
    if (!predictors.allFinite() || !y.allFinite()) throw InvariantViolation("fit_ols: non-finite input");
    if (!columns.empty() && static_cast<Index>(columns.size()) != p) throw SizeMismatch("fit_ols: column names do not match");
    Matrix x(n, p + 1);
    x.col(0).setOnes();
    x.rightCols(p) = predictors;
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(x);
    OlsFit fit;
    fit.columns = std::move(columns);
    fit.coefficients = cod.solve(y);
    fit.residuals = y - x * fit.coefficients;
    fit.ssr = fit.residuals.squaredNorm();
    fit.sst = (y.array() - y.mean()).matrix().squaredNorm();
    fit.n = n;
    fit.num_predictors = p;
    fit.rank = cod.rank();
    fit.rank_deficient = fit.rank < p + 1;
    if (fit.sst <= 1e-300 || fit.sst <= 1e-24 * y.squaredNorm()) {
        fit.degenerate_response = true;
        fit.r_squared = 0.0;
    } else {
        fit.r_squared = std::clamp(1.0 - fit.ssr / fit.sst, 0.0, 1.0);
    }
    return fit;
}

/// Nested-model F ratio ((SSR_r - SSR_f) / dp) / (SSR_f / (n - p_f - 1)).
inline double nested_f(const OlsFit& full, const OlsFit& reduced) {
    if (full.n != reduced.n) throw NotNested("nested_f: models were fit on different rows");
    if (!full.columns.empty() || !reduced.columns.empty()) {
        const std::set<std::string> have(full.columns.begin(), full.columns.end());
        for (const auto& c : reduced.columns)
            if (!have.count(c)) throw NotNested("nested_f: column '" + c + "' is not in the full model");
    }
    if (reduced.num_predictors > full.num_predictors) throw NotNested("nested_f: reduced model is larger than the full model");
    const Index dp = full.num_predictors - reduced.num_predictors;
    if (dp == 0) return 0.0;
    const double num = std::max(reduced.ssr - full.ssr, 0.0) / static_cast<double>(dp);
    const double den = full.ssr / static_cast<double>(full.n - full.num_predictors - 1);
    if (den <= 0.0) return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
    return num / den;
}

// ---------------------------------------------------------------------------
// Clustered bootstrap

enum class BootstrapNull {
    imposed,     ///< resample (x, y0) with y0 = y minus the fitted contribution of the tested columns
    percentile,  ///< resample (x, y) as observed and compare the raw resampled F statistics
};

inline BootstrapNull parse_bootstrap_null(const std::string& s) {
    if (s == "imposed") return BootstrapNull::imposed;
    if (s == "percentile") return BootstrapNull::percentile;
    throw ConfigError("unknown bootstrap null '" + s + "' (expected imposed or percentile)");
}

struct BootstrapOptions {
    int n_boot = 1000;
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    BootstrapNull null = BootstrapNull::imposed;
    double max_singular_fraction = 0.1;
};

struct BootstrapResult {
    double f_observed = 0.0;
    double p_value = 1.0;
    int exceedances = 0;
    int n_boot = 0;
    int singular_redraws = 0;
    std::vector<double> f_boot;
};

/// p = #(F* >= F_obs) / B, or 1 / (2B) when nothing reaches the observed value.
inline double bootstrap_p_value(const std::vector<double>& f_boot, double f_observed, int* exceedances = nullptr) {
    if (f_boot.empty()) throw ConfigError("bootstrap needs at least one replicate");
    int count = 0;
    for (double f : f_boot)
        if (f >= f_observed) ++count;
    if (exceedances) *exceedances = count;
    const auto b = static_cast<double>(f_boot.size());
    return count == 0 ? 1.0 / (2.0 * b) : count / b;
}

/// Maps subject labels to dense cluster ids 0..S-1 in order of first appearance.
inline std::vector<int> cluster_ids(const std::vector<std::string>& subjects) {
    std::map<std::string, int> ids;
    std::vector<int> out;
    out.reserve(subjects.size());
    for (const auto& s : subjects) {
        auto [it, inserted] = ids.emplace(s, static_cast<int>(ids.size()));
        out.push_back(it->second);
    }
    return out;
}

namespace detail {

inline Matrix select_columns(const Matrix& x, const std::vector<Index>& cols) {
    Matrix out(x.rows(), static_cast<Index>(cols.size()));
    for (std::size_t j = 0; j < cols.size(); ++j) out.col(static_cast<Index>(j)) = x.col(cols[j]);
    return out;
}

inline std::optional<double> resampled_f(const Matrix& x, const Vector& y, const std::vector<Index>& reduced,
                                         const std::vector<Index>& rows) {
    const auto n = static_cast<Index>(rows.size());
    Matrix xs(n, x.cols());
    Vector ys(n);
    for (Index r = 0; r < n; ++r) {
        xs.row(r) = x.row(rows[static_cast<std::size_t>(r)]);
        ys(r) = y(rows[static_cast<std::size_t>(r)]);
    }
    if (n <= x.cols() + 1) return std::nullopt;
    const OlsFit full = fit_ols(xs, ys);
    if (full.rank_deficient) return std::nullopt;
    const OlsFit red = fit_ols(select_columns(xs, reduced), ys);
    return nested_f(full, red);
}

/// Draws as many clusters as there are, with replacement, and returns the
/// concatenated member rows. `drawn` receives the chosen cluster ids.
inline std::vector<Index> resample_clusters(const std::vector<std::vector<Index>>& members, std::mt19937_64& rng,
                                            std::vector<int>* drawn = nullptr) {
    const int n_clusters = static_cast<int>(members.size());
    std::uniform_int_distribution<int> pick(0, n_clusters - 1);
    std::vector<Index> rows;
    if (drawn) drawn->clear();
    for (int s = 0; s < n_clusters; ++s) {
        const int c = pick(rng);
        if (drawn) drawn->push_back(c);
        const auto& m = members[static_cast<std::size_t>(c)];
        rows.insert(rows.end(), m.begin(), m.end());
    }
    return rows;
}

} // namespace detail

/// Subject-level bootstrap test of the columns of `x` that are not in
/// `reduced` (indices into x's columns; empty means intercept only).
inline BootstrapResult cluster_bootstrap_test(const Matrix& x, const Vector& y, const std::vector<std::string>& subjects,
                                              const std::vector<Index>& reduced, const BootstrapOptions& options) {
    if (options.n_boot < 1) throw ConfigError("n_boot must be at least 1");
    if (static_cast<Index>(subjects.size()) != x.rows() || y.size() != x.rows())
        throw SizeMismatch("cluster_bootstrap_test: rows, response and subject ids differ in length");
    for (Index c : reduced)
        if (c < 0 || c >= x.cols()) throw NotNested("cluster_bootstrap_test: reduced column index out of range");

    const std::vector<int> cid = cluster_ids(subjects);
    const int n_clusters = cid.empty() ? 0 : *std::max_element(cid.begin(), cid.end()) + 1;
    std::vector<std::vector<Index>> members(static_cast<std::size_t>(n_clusters));
    for (std::size_t r = 0; r < cid.size(); ++r) members[static_cast<std::size_t>(cid[r])].push_back(static_cast<Index>(r));

    const OlsFit full = fit_ols(x, y);
    const OlsFit red = fit_ols(detail::select_columns(x, reduced), y);
    BootstrapResult out;
    out.f_observed = nested_f(full, red);
    out.n_boot = options.n_boot;

    Vector y_boot = y;
    if (options.null == BootstrapNull::imposed) {
        std::vector<bool> kept(static_cast<std::size_t>(x.cols()), false);
        for (Index c : reduced) kept[static_cast<std::size_t>(c)] = true;
        for (Index c = 0; c < x.cols(); ++c)
            if (!kept[static_cast<std::size_t>(c)]) y_boot -= full.coefficients(c + 1) * x.col(c);
    }

    out.f_boot.assign(static_cast<std::size_t>(options.n_boot), 0.0);
    std::vector<int> redraws(static_cast<std::size_t>(options.n_boot), 0);
    const int redraw_cap = std::max(1, static_cast<int>(std::ceil(options.max_singular_fraction * options.n_boot))) + 1;
    detail::parallel_for(static_cast<std::size_t>(options.n_boot), options.threads, [&](std::size_t b) {
        std::mt19937_64 rng(detail::derive_seed(options.seed, 0xB007, b));
        for (;;) {
            const std::vector<Index> rows = detail::resample_clusters(members, rng);
            if (auto f = detail::resampled_f(x, y_boot, reduced, rows)) {
                out.f_boot[b] = *f;
                return;
            }
            if (++redraws[b] > redraw_cap) throw SingularResample("too many singular bootstrap resamples");
        }
    });
    for (int r : redraws) out.singular_redraws += r;
    if (out.singular_redraws > options.max_singular_fraction * (options.n_boot + out.singular_redraws))
        throw SingularResample(std::to_string(out.singular_redraws) + " singular bootstrap resamples exceed " +
                               std::to_string(std::lround(options.max_singular_fraction * 100.0)) + "% of all draws");
    out.p_value = bootstrap_p_value(out.f_boot, out.f_observed, &out.exceedances);
    return out;
}

// ---------------------------------------------------------------------------
// Traits

enum class TraitType { continuous, binary, ordinal };

inline const char* to_string(TraitType t) {
    switch (t) {
    case TraitType::continuous: return "continuous";
    case TraitType::binary: return "binary";
    case TraitType::ordinal: return "ordinal";
    }
    return "?";
}

/// Subject-level traits; NaN marks a missing value.
struct TraitTable {
    std::vector<std::string> subject_ids;
    std::vector<std::string> traits;
    std::vector<TraitType> types;
    Matrix values;  ///< subjects x traits
    std::map<std::string, int> imputed_counts;

    std::size_t trait_index(const std::string& name) const {
        for (std::size_t t = 0; t < traits.size(); ++t)
            if (traits[t] == name) return t;
        throw SchemaError("trait '" + name + "' not found");
    }

    std::optional<std::size_t> subject_index(const std::string& id) const {
        for (std::size_t s = 0; s < subject_ids.size(); ++s)
            if (subject_ids[s] == id) return s;
        return std::nullopt;
    }
};

inline TraitType infer_trait_type(const Eigen::Ref<const Vector>& v) {
    std::set<double> distinct;
    bool integral = true;
    for (Index i = 0; i < v.size(); ++i) {
        if (std::isnan(v(i))) continue;
        distinct.insert(v(i));
        integral = integral && v(i) == std::round(v(i));
    }
    if (distinct.size() <= 2 && std::all_of(distinct.begin(), distinct.end(), [](double x) { return x == 0.0 || x == 1.0; }))
        return TraitType::binary;
    if (integral && distinct.size() <= 10) return TraitType::ordinal;
    return TraitType::continuous;
}

inline void validate_traits(TraitTable& table) {
    std::set<std::string> seen(table.traits.begin(), table.traits.end());
    if (seen.size() != table.traits.size()) throw InvariantViolation("trait names must be unique");
    std::set<std::string> subjects(table.subject_ids.begin(), table.subject_ids.end());
    if (subjects.size() != table.subject_ids.size()) throw InvariantViolation("subject ids must be unique in a trait table");
    table.types.clear();
    for (Index t = 0; t < table.values.cols(); ++t) table.types.push_back(infer_trait_type(table.values.col(t)));
}

/// Replaces missing values of the selected traits by the observed mean.
inline TraitTable impute_means(const TraitTable& table, const std::vector<std::string>& selected) {
    TraitTable out = table;
    for (const auto& name : selected) {
        const auto t = static_cast<Index>(table.trait_index(name));
        double sum = 0.0;
        int observed = 0;
        for (Index s = 0; s < table.values.rows(); ++s)
            if (!std::isnan(table.values(s, t))) {
                sum += table.values(s, t);
                ++observed;
            }
        if (observed == 0) throw AllMissingTrait("trait '" + name + "' has no observed values");
        const double mean = sum / observed;
        int count = 0;
        for (Index s = 0; s < out.values.rows(); ++s)
            if (std::isnan(out.values(s, t))) {
                out.values(s, t) = mean;
                ++count;
            }
        out.imputed_counts[name] = count;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Predictor-set comparison

struct ModelReport {
    std::string name;
    std::vector<std::string> columns;
    Vector coefficients;
    double r_squared = 0.0;
    double f_statistic = 0.0;  ///< against the intercept-only model
    double bootstrap_p = 1.0;
    int singular_redraws = 0;
    bool rank_deficient = false;
};

struct NestedReport {
    std::string name;
    double f_statistic = 0.0;
    double bootstrap_p = 1.0;
    int singular_redraws = 0;
};

struct TraitReport {
    std::string trait;
    TraitType type = TraitType::continuous;
    Index n_obs = 0;
    Index n_subjects = 0;
    int n_bootstrap = 0;
    std::uint64_t seed = 0;
    bool degenerate_response = false;
    ModelReport full_curve;
    ModelReport landmark;
    ModelReport combined;
    NestedReport reduced_full_curve;  ///< combined vs full-curve only (do landmarks add?)
    NestedReport reduced_landmark;    ///< combined vs landmark only (does the full curve add?)
};

struct CompareOptions {
    BootstrapOptions bootstrap;
    std::vector<std::string> dependents;  ///< empty means every trait
};

/// For each trait: full-curve, landmark and combined OLS models with
/// subject-level bootstrap p values for both model-vs-null and both nested tests.
inline std::vector<TraitReport> compare_predictor_sets(const FeatureMatrix& curve_features, const FeatureMatrix& landmarks,
                                                       const TraitTable& traits, const CompareOptions& options) {
    const Index n = curve_features.rows();
    if (landmarks.rows() != n) throw SizeMismatch("curve features and landmarks differ in row count");
    std::map<std::pair<std::string, std::string>, Index> landmark_row;
    for (Index r = 0; r < n; ++r)
        landmark_row[{landmarks.subject_ids[static_cast<std::size_t>(r)], landmarks.trial_ids[static_cast<std::size_t>(r)]}] = r;
    Matrix joined(n, curve_features.values.cols() + landmarks.values.cols());
    for (Index r = 0; r < n; ++r) {
        const auto key = std::make_pair(curve_features.subject_ids[static_cast<std::size_t>(r)],
                                        curve_features.trial_ids[static_cast<std::size_t>(r)]);
        const auto it = landmark_row.find(key);
        if (it == landmark_row.end()) throw SizeMismatch("no landmark row for trial '" + key.second + "'");
        joined.row(r) << curve_features.values.row(r), landmarks.values.row(it->second);
    }
    std::vector<std::string> names = curve_features.columns;
    names.insert(names.end(), landmarks.columns.begin(), landmarks.columns.end());
    const auto pc = curve_features.values.cols();
    const auto pl = landmarks.values.cols();
    std::vector<Index> curve_cols(static_cast<std::size_t>(pc)), landmark_cols(static_cast<std::size_t>(pl));
    for (Index j = 0; j < pc; ++j) curve_cols[static_cast<std::size_t>(j)] = j;
    for (Index j = 0; j < pl; ++j) landmark_cols[static_cast<std::size_t>(j)] = pc + j;

    std::vector<std::string> dependents = options.dependents.empty() ? traits.traits : options.dependents;
    std::vector<TraitReport> reports;
    for (std::size_t d = 0; d < dependents.size(); ++d) {
        const auto t = static_cast<Index>(traits.trait_index(dependents[d]));
        std::vector<Index> rows;
        std::vector<double> yv;
        std::vector<std::string> subj;
        for (Index r = 0; r < n; ++r) {
            const auto& sid = curve_features.subject_ids[static_cast<std::size_t>(r)];
            const auto s = traits.subject_index(sid);
            if (!s) continue;
            const double v = traits.values(static_cast<Index>(*s), t);
            if (std::isnan(v)) continue;
            rows.push_back(r);
            yv.push_back(v);
            subj.push_back(sid);
        }
        TraitReport rep;
        rep.trait = dependents[d];
        rep.type = traits.types.empty() ? TraitType::continuous : traits.types[static_cast<std::size_t>(t)];
        rep.n_obs = static_cast<Index>(rows.size());
        rep.n_subjects = static_cast<Index>(std::set<std::string>(subj.begin(), subj.end()).size());
        rep.n_bootstrap = options.bootstrap.n_boot;
        rep.seed = options.bootstrap.seed;
        if (rows.empty()) throw AllMissingTrait("trait '" + rep.trait + "' has no observed rows");
        Matrix x(static_cast<Index>(rows.size()), joined.cols());
        for (std::size_t r = 0; r < rows.size(); ++r) x.row(static_cast<Index>(r)) = joined.row(rows[r]);
        const Vector y = Eigen::Map<const Vector>(yv.data(), static_cast<Index>(yv.size()));

        auto model = [&](const std::string& name, const std::vector<Index>& cols, std::uint64_t stream) {
            ModelReport m;
            m.name = name;
            for (Index c : cols) m.columns.push_back(names[static_cast<std::size_t>(c)]);
            const Matrix xm = detail::select_columns(x, cols);
            const OlsFit fit = fit_ols(xm, y, m.columns);
            m.coefficients = fit.coefficients;
            m.r_squared = fit.r_squared;
            m.rank_deficient = fit.rank_deficient;
            rep.degenerate_response = fit.degenerate_response;
            if (stream == 0 || fit.degenerate_response) {
                m.f_statistic = nested_f(fit, fit_ols(Matrix(xm.rows(), 0), y));
                return m;
            }
            BootstrapOptions bo = options.bootstrap;
            bo.seed = detail::derive_seed(options.bootstrap.seed, d, stream);
            const auto b = cluster_bootstrap_test(xm, y, subj, {}, bo);
            m.f_statistic = b.f_observed;
            m.bootstrap_p = b.p_value;
            m.singular_redraws = b.singular_redraws;
            return m;
        };
        auto nested = [&](const std::string& name, const std::vector<Index>& reduced_cols, std::uint64_t stream) {
            NestedReport nr;
            nr.name = name;
            if (rep.degenerate_response) return nr;
            BootstrapOptions bo = options.bootstrap;
            bo.seed = detail::derive_seed(options.bootstrap.seed, d, stream);
            const auto b = cluster_bootstrap_test(x, y, subj, reduced_cols, bo);
            nr.f_statistic = b.f_observed;
            nr.bootstrap_p = b.p_value;
            nr.singular_redraws = b.singular_redraws;
            return nr;
        };

        std::vector<Index> all_cols(curve_cols);
        all_cols.insert(all_cols.end(), landmark_cols.begin(), landmark_cols.end());
        rep.combined = model("combined", all_cols, 0);
        rep.full_curve = model("full_curve", curve_cols, 1);
        rep.landmark = model("landmark", landmark_cols, 2);
        rep.reduced_full_curve = nested("combined_vs_full_curve", curve_cols, 3);
        rep.reduced_landmark = nested("combined_vs_landmark", landmark_cols, 4);
        reports.push_back(std::move(rep));
    }
    return reports;
}

} // namespace elastika
