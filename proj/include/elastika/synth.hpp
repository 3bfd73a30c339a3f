#pragma once

#include "elastika/curves.hpp"
#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"
#include "elastika/regress.hpp"
#include "elastika/sphere.hpp"
#include "elastika/srvf.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace elastika {

enum class SynthTemplate { two_peak, unimodal, mixed };

inline SynthTemplate parse_synth_template(const std::string& name) {
    if (name == "two_peak") return SynthTemplate::two_peak;
    if (name == "unimodal") return SynthTemplate::unimodal;
    if (name == "mixed") return SynthTemplate::mixed;
    throw ConfigError("unknown template '" + name + "' (expected two_peak, unimodal or mixed)");
}

inline const char* to_string(SynthTemplate t) {
    switch (t) {
    case SynthTemplate::two_peak: return "two_peak";
    case SynthTemplate::unimodal: return "unimodal";
    case SynthTemplate::mixed: return "mixed";
    }
    return "?";
}

struct SynthConfig {
    int n_subjects = 20;
    int trials_per_subject = 3;
    int grid_length = 101;
    SynthTemplate shape = SynthTemplate::two_peak;
    double warp_strength = 0.2;   ///< sup norm of the tangent perturbation of the identity
    double amplitude_sd = 0.05;   ///< sd of per-trial multiplicative amplitude factors
    double noise_sd = 0.01;       ///< sd of smooth additive/multiplicative noise
    double atypical_fraction = 0.05;  ///< share of unimodal subjects under the mixed template (at least one)
    std::uint64_t seed = 1;

    void validate() const {
        if (n_subjects < 1 || trials_per_subject < 1) throw ConfigError("subject and trial counts must be positive");
        if (grid_length < 4) throw ConfigError("grid_length must be at least 4");
        if (warp_strength < 0.0 || amplitude_sd < 0.0 || noise_sd < 0.0)
            throw ConfigError("warp_strength, amplitude_sd and noise_sd must be nonnegative");
        if (atypical_fraction < 0.0 || atypical_fraction > 1.0) throw ConfigError("atypical_fraction must lie in [0,1]");
    }
};

struct GroundTruth {
    Matrix typical_template;   ///< (3 x grid) two-peak template
    Matrix atypical_template;  ///< (3 x grid) unimodal template
    std::vector<Warp> warps;   ///< per trial, in dataset order
    std::vector<double> vertical_factors;
    std::vector<double> shear_factors;
    std::vector<bool> atypical;  ///< per trial
    std::vector<std::string> subject_ids;
};

inline const std::vector<std::string>& grf_channels() {
    static const std::vector<std::string> names{"vGRF", "apGRF", "mlGRF"};
    return names;
}

namespace synth {

/// Raised cosine bump of half-width w centered at c (compact support).
inline double bump(double t, double c, double w) {
    const double u = (t - c) / w;
    return std::abs(u) >= 1.0 ? 0.0 : 0.5 * (1.0 + std::cos(std::numbers::pi * u));
}

/// Gait-like template evaluated at t. Two-peak: peaks about 1.1 near 0.25
/// and 0.75 with a valley of 0.75 at midstance. Unimodal: one broad hump.
inline Vector template_at(double t, bool unimodal) {
    Vector v(3);
    if (unimodal) {
        v(0) = 0.95 * bump(t, 0.5, 0.5);
        v(1) = 0.05 * (-bump(t, 0.25, 0.25) + bump(t, 0.75, 0.25));
    } else {
        v(0) = 0.725 * (bump(t, 0.25, 0.25) + bump(t, 0.75, 0.25)) + 0.75 * bump(t, 0.5, 0.5);
        v(1) = 0.2 * (-bump(t, 0.25, 0.25) + bump(t, 0.75, 0.25));
    }
    v(2) = 0.05 * bump(t, 0.5, 0.5);
    return v;
}

inline Matrix template_curves(Index m, bool unimodal) {
    const Vector t = detail::uniform_grid(m);
    Matrix out(3, m);
    for (Index k = 0; k < m; ++k) out.col(k) = template_at(t(k), unimodal);
    out.col(0).setZero();
    out.col(m - 1).setZero();
    return out;
}

/// Random smooth warp: exponential map at psi = 1 of a cosine-series tangent
/// scaled to sup norm `strength`, integrated and normalized.
inline Warp random_warp(std::mt19937_64& rng, Index m, double strength) {
    if (strength == 0.0) return Warp::identity(m);
    std::normal_distribution<double> z(0.0, 1.0);
    const Vector t = detail::uniform_grid(m);
    const Vector w = detail::trapezoid_weights(m);
    Vector u = Vector::Zero(m);
    for (int k = 1; k <= 3; ++k) {
        const double c = z(rng) / k;
        for (Index j = 0; j < m; ++j) u(j) += c * std::sqrt(2.0) * std::cos(k * std::numbers::pi * t(j));
    }
    const Vector one = Vector::Ones(m);
    u -= sphere::inner(u, one, w) * one;
    const double sup = u.cwiseAbs().maxCoeff();
    if (sup == 0.0) return Warp::identity(m);
    const Vector v = strength / sup * u;
    const Vector psi = sphere::exp_map(one, v, w);
    RowVector g = detail::cumulative_trapezoid(psi.cwiseAbs2().transpose(), detail::grid_step(m), 0.0);
    g /= g(m - 1);
    g(m - 1) = 1.0;
    return Warp(g.transpose());
}

/// Smooth noise vanishing at both ends: tapered sine series.
inline Vector smooth_noise(std::mt19937_64& rng, Index m, double sd) {
    Vector out = Vector::Zero(m);
    if (sd == 0.0) return out;
    std::normal_distribution<double> z(0.0, 1.0);
    const Vector t = detail::uniform_grid(m);
    constexpr int terms = 6;
    for (int k = 1; k <= terms; ++k) {
        const double c = sd * z(rng) * std::sqrt(2.0 / terms);
        for (Index j = 0; j < m; ++j) out(j) += c * std::sin(k * std::numbers::pi * t(j));
    }
    return out;
}

} // namespace synth

/// Synthetic gait-like dataset with known template, warps and amplitude factors.
inline std::pair<Dataset, GroundTruth> generate(const SynthConfig& config) {
    config.validate();
    const Index m = config.grid_length;
    GroundTruth truth;
    truth.typical_template = synth::template_curves(m, false);
    truth.atypical_template = synth::template_curves(m, true);

    std::vector<bool> subject_atypical(static_cast<std::size_t>(config.n_subjects), config.shape == SynthTemplate::unimodal);
    if (config.shape == SynthTemplate::mixed) {
        const int count = std::max(1, static_cast<int>(std::lround(config.atypical_fraction * config.n_subjects)));
        // Spread atypical subjects evenly through the ordering.
        for (int k = 0; k < std::min(count, config.n_subjects); ++k)
            subject_atypical[static_cast<std::size_t>(k * config.n_subjects / count)] = true;
    }

    const Vector t = detail::uniform_grid(m);
    std::vector<Curve> curves;
    for (int s = 0; s < config.n_subjects; ++s) {
        std::mt19937_64 subject_rng(detail::derive_seed(config.seed, 1, static_cast<std::uint64_t>(s)));
        std::normal_distribution<double> z(0.0, 1.0);
        const double subject_vertical = z(subject_rng);
        const double subject_shear = z(subject_rng);
        char sid[32];
        std::snprintf(sid, sizeof sid, "S%03d", s + 1);
        truth.subject_ids.emplace_back(sid);
        const bool atypical = subject_atypical[static_cast<std::size_t>(s)];
        const Matrix& base = atypical ? truth.atypical_template : truth.typical_template;
        for (int r = 0; r < config.trials_per_subject; ++r) {
            std::mt19937_64 rng(detail::derive_seed(config.seed, 2, static_cast<std::uint64_t>(s) * 1000003ULL + r));
            const Warp warp = synth::random_warp(rng, m, config.warp_strength);
            const double fv = 1.0 + config.amplitude_sd * (subject_vertical + z(rng)) / std::sqrt(2.0);
            const double fs = 1.0 + config.amplitude_sd * (subject_shear + z(rng)) / std::sqrt(2.0);
            Matrix values = detail::compose_values(base, warp.gamma());
            values.row(0) *= fv;
            values.row(1) *= fs;
            const Vector nv = synth::smooth_noise(rng, m, config.noise_sd);
            const Vector na = synth::smooth_noise(rng, m, config.noise_sd);
            const Vector nm = synth::smooth_noise(rng, m, config.noise_sd);
            for (Index j = 0; j < m; ++j) {
                values(0, j) = std::max(0.0, values(0, j) * (1.0 + nv(j)));
                values(1, j) += 0.5 * na(j);
                values(2, j) = values(2, j) * (1.0 + nm(j)) + 0.2 * nm(j) * synth::bump(t(j), 0.5, 0.5);
            }
            char tid[48];
            std::snprintf(tid, sizeof tid, "%s_T%02d", sid, r + 1);
            curves.emplace_back(tid, sid, grf_channels(), std::move(values));
            truth.warps.push_back(warp);
            truth.vertical_factors.push_back(fv);
            truth.shear_factors.push_back(fs);
            truth.atypical.push_back(atypical);
        }
    }
    return {Dataset(std::move(curves)), std::move(truth)};
}

/// Raw-trial rendition of a dataset: each curve resampled to a random stance
/// length at `sample_rate` and padded with zeros on both sides.
inline std::vector<RawTrial> to_raw_trials(const Dataset& dataset, std::uint64_t seed, double sample_rate = 480.0) {
    std::vector<RawTrial> out;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Curve& c = dataset[i];
        std::mt19937_64 rng(detail::derive_seed(seed, 3, i));
        std::uniform_int_distribution<int> length(240, 340);
        std::uniform_int_distribution<int> pad(3, 20);
        const int n = length(rng);
        const int before = pad(rng);
        const int after = pad(rng);
        RawTrial t;
        t.trial_id = c.trial_id();
        t.subject_id = c.subject_id();
        t.channels = c.channels();
        t.sample_rate = sample_rate;
        for (Index ch = 0; ch < c.num_channels(); ++ch) {
            std::vector<double> s(static_cast<std::size_t>(before), 0.0);
            for (int k = 0; k < n; ++k)
                s.push_back(detail::interp_uniform(c.values().row(ch), static_cast<double>(k) / (n - 1)));
            s.insert(s.end(), static_cast<std::size_t>(after), 0.0);
            t.samples.push_back(std::move(s));
        }
        out.push_back(std::move(t));
    }
    return out;
}

/// Subject-level synthetic traits driven by the ground truth: mean vertical
/// amplitude factor, mean timing shift of the warps and the atypical flag.
/// "jsw" has missing values (rows dropped), "womac" has missing values meant
/// for mean imputation, "noise" is unrelated to the curves.
inline TraitTable synthetic_traits(const Dataset& dataset, const GroundTruth& truth, std::uint64_t seed) {
    std::map<std::string, std::vector<std::size_t>> rows;
    for (std::size_t i = 0; i < dataset.size(); ++i) rows[dataset[i].subject_id()].push_back(i);
    TraitTable table;
    table.traits = {"loading", "timing", "jsw", "klg", "atypical", "womac", "noise"};
    table.subject_ids = truth.subject_ids;
    table.values.resize(static_cast<Index>(truth.subject_ids.size()), static_cast<Index>(table.traits.size()));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t s = 0; s < truth.subject_ids.size(); ++s) {
        std::mt19937_64 rng(detail::derive_seed(seed, 4, s));
        std::normal_distribution<double> z(0.0, 1.0);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        double factor = 0.0, shift = 0.0;
        bool atypical = false;
        const auto& idx = rows[truth.subject_ids[s]];
        for (std::size_t i : idx) {
            factor += truth.vertical_factors[i] / static_cast<double>(idx.size());
            const Vector& g = truth.warps[i].gamma();
            shift += (g - detail::uniform_grid(g.size())).mean() / static_cast<double>(idx.size());
            atypical = atypical || truth.atypical[i];
        }
        const auto r = static_cast<Index>(s);
        table.values(r, 0) = 10.0 * (factor - 1.0) + 0.3 * z(rng);
        table.values(r, 1) = 20.0 * shift + 0.3 * z(rng);
        const double jsw = 4.0 + 5.0 * (factor - 1.0) + 0.5 * z(rng);
        table.values(r, 2) = u(rng) < 0.25 ? nan : jsw;
        table.values(r, 3) = std::clamp(std::round(2.0 + 20.0 * (factor - 1.0) + z(rng)), 0.0, 4.0);
        table.values(r, 4) = atypical ? 1.0 : 0.0;
        const double womac = 10.0 + 3.0 * z(rng);
        table.values(r, 5) = u(rng) < 0.1 ? nan : womac;
        table.values(r, 6) = z(rng);
    }
    validate_traits(table);
    return table;
}

} // namespace elastika
