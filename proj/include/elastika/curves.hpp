#pragma once

#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace elastika {

inline constexpr std::size_t kDefaultGridLength = 101;
inline constexpr double kDefaultZeroTolerance = 1e-9;

/// One force-plate trial as recorded: per-channel samples at a constant rate.
struct RawTrial {
    std::string trial_id;
    std::string subject_id;
    std::vector<std::string> channels;
    std::vector<std::vector<double>> samples;  // samples[c][k]
    double sample_rate = 0.0;                  // informational only

    std::size_t num_samples() const { return samples.empty() ? 0 : samples.front().size(); }

    std::size_t channel_index(std::string_view name) const {
        for (std::size_t c = 0; c < channels.size(); ++c)
            if (channels[c] == name) return c;
        throw ChannelNotFound("channel '" + std::string(name) + "' not found in trial '" + trial_id + "'");
    }
};

/// Checks the structural invariants of a raw trial (equal channel lengths,
/// unique names, at least `min_samples` samples).
inline void validate_raw_trial(const RawTrial& trial, std::size_t min_samples = 4) {
    if (trial.channels.size() != trial.samples.size())
        throw SchemaError("trial '" + trial.trial_id + "': channel names and sample arrays differ in count");
    if (trial.channels.empty()) throw SchemaError("trial '" + trial.trial_id + "' has no channels");
    const std::size_t n = trial.samples.front().size();
    for (const auto& s : trial.samples)
        if (s.size() != n) throw SchemaError("trial '" + trial.trial_id + "' has ragged channel lengths");
    std::set<std::string> seen(trial.channels.begin(), trial.channels.end());
    if (seen.size() != trial.channels.size())
        throw InvariantViolation("trial '" + trial.trial_id + "' has duplicate channel names");
    if (n < min_samples)
        throw InvariantViolation("trial '" + trial.trial_id + "' has " + std::to_string(n) + " samples, need at least " +
                                 std::to_string(min_samples));
    for (const auto& s : trial.samples)
        for (double v : s)
            if (!std::isfinite(v)) throw InvariantViolation("trial '" + trial.trial_id + "' contains non-finite samples");
}

/// A multichannel curve sampled on the evenly spaced grid of [0,1].
/// values is (num_channels x grid length).
class Curve {
public:
    Curve() = default;

    Curve(std::string trial_id, std::string subject_id, std::vector<std::string> channels, Matrix values)
        : trial_id_(std::move(trial_id)), subject_id_(std::move(subject_id)), channels_(std::move(channels)),
          values_(std::move(values)) {
        validate();
        grid_ = detail::uniform_grid(values_.cols());
    }

    /// Constructs from an explicit grid, which must be evenly spaced on [0,1].
    Curve(std::string trial_id, std::string subject_id, std::vector<std::string> channels, const Vector& grid,
          Matrix values)
        : Curve(std::move(trial_id), std::move(subject_id), std::move(channels), std::move(values)) {
        if (grid.size() != values_.cols()) throw InvariantViolation("grid length does not match value columns");
        const Vector ref = detail::uniform_grid(grid.size());
        for (Index j = 0; j < grid.size(); ++j)
            if (std::abs(grid(j) - ref(j)) > 1e-12) throw InvariantViolation("curve grid is not evenly spaced on [0,1]");
    }

    const std::string& trial_id() const { return trial_id_; }
    const std::string& subject_id() const { return subject_id_; }
    const std::vector<std::string>& channels() const { return channels_; }
    const Vector& grid() const { return grid_; }
    const Matrix& values() const { return values_; }
    Index grid_length() const { return values_.cols(); }
    Index num_channels() const { return values_.rows(); }

    std::size_t channel_index(std::string_view name) const {
        for (std::size_t c = 0; c < channels_.size(); ++c)
            if (channels_[c] == name) return c;
        throw ChannelNotFound("channel '" + std::string(name) + "' not found in curve '" + trial_id_ + "'");
    }

    RowVector channel(std::string_view name) const { return values_.row(static_cast<Index>(channel_index(name))); }

private:
    void validate() const {
        if (values_.cols() < 2) throw InvariantViolation("curve needs at least two grid points");
        if (static_cast<std::size_t>(values_.rows()) != channels_.size())
            throw InvariantViolation("curve '" + trial_id_ + "': channel count does not match value rows");
        if (!values_.allFinite()) throw InvariantViolation("curve '" + trial_id_ + "' contains non-finite values");
    }

    std::string trial_id_;
    std::string subject_id_;
    std::vector<std::string> channels_;
    Vector grid_;
    Matrix values_;
};

/// Immutable collection of curves sharing one grid and channel ordering.
class Dataset {
public:
    Dataset() = default;

    explicit Dataset(std::vector<Curve> curves) : curves_(std::move(curves)) {
        if (curves_.empty()) return;
        const auto& first = curves_.front();
        std::set<std::pair<std::string, std::string>> ids;
        for (std::size_t i = 0; i < curves_.size(); ++i) {
            const auto& c = curves_[i];
            if (c.grid_length() != first.grid_length())
                throw InvariantViolation("curve '" + c.trial_id() + "' has a different grid length");
            if (c.channels() != first.channels())
                throw InvariantViolation("curve '" + c.trial_id() + "' has a different channel ordering");
            if (!ids.emplace(c.subject_id(), c.trial_id()).second)
                throw InvariantViolation("duplicate trial '" + c.trial_id() + "' for subject '" + c.subject_id() + "'");
            subjects_[c.subject_id()].push_back(i);
        }
    }

    const std::vector<Curve>& curves() const { return curves_; }
    const Curve& operator[](std::size_t i) const { return curves_[i]; }
    std::size_t size() const { return curves_.size(); }
    bool empty() const { return curves_.empty(); }

    /// subject_id -> indices of that subject's curves, in dataset order.
    const std::map<std::string, std::vector<std::size_t>>& subjects() const { return subjects_; }

    const std::vector<std::string>& channels() const {
        static const std::vector<std::string> none;
        return curves_.empty() ? none : curves_.front().channels();
    }
    Index grid_length() const { return curves_.empty() ? 0 : curves_.front().grid_length(); }

private:
    std::vector<Curve> curves_;
    std::map<std::string, std::vector<std::size_t>> subjects_;
};

/// Cuts all channels to the stance segment of the reference channel: from the
/// zero immediately before its first nonzero sample through the zero
/// immediately after its last nonzero sample (clamped to the recorded range).
/// |value| < zero_tol counts as zero.
inline RawTrial trim_zeros(const RawTrial& trial, std::string_view reference_channel,
                           double zero_tol = kDefaultZeroTolerance) {
    const auto& ref = trial.samples.at(trial.channel_index(reference_channel));
    std::size_t first = ref.size();
    std::size_t last = 0;
    for (std::size_t k = 0; k < ref.size(); ++k) {
        if (std::abs(ref[k]) >= zero_tol) {
            if (first == ref.size()) first = k;
            last = k;
        }
    }
    if (first == ref.size())
        throw AllZeroChannel("reference channel '" + std::string(reference_channel) + "' of trial '" + trial.trial_id +
                             "' is identically zero");
    const std::size_t begin = first > 0 ? first - 1 : 0;
    const std::size_t end = last + 1 < ref.size() ? last + 1 : last;  // inclusive

    RawTrial out = trial;
    for (auto& s : out.samples)
        s = std::vector<double>(s.begin() + static_cast<std::ptrdiff_t>(begin),
                                s.begin() + static_cast<std::ptrdiff_t>(end) + 1);
    return out;
}

/// Linear length normalization: rescales the time axis to [0,1] and linearly
/// interpolates every channel onto `grid_length` evenly spaced points.
inline Curve normalize_time(const RawTrial& trial, std::size_t grid_length = kDefaultGridLength) {
    const std::size_t n = trial.num_samples();
    if (n < 2) throw TooFewSamples("trial '" + trial.trial_id + "' needs at least two samples to normalize");
    if (grid_length < 2) throw ConfigError("grid_length must be at least 2");
    const auto m = static_cast<Index>(grid_length);
    const Vector grid = detail::uniform_grid(m);
    Matrix values(static_cast<Index>(trial.channels.size()), m);
    const double span = static_cast<double>(n - 1);
    for (std::size_t c = 0; c < trial.samples.size(); ++c) {
        const auto& s = trial.samples[c];
        if (s.size() != n) throw SchemaError("trial '" + trial.trial_id + "' has ragged channel lengths");
        for (Index j = 0; j < m; ++j) {
            const double pos = grid(j) * span;
            auto i = static_cast<std::size_t>(std::floor(pos));
            if (i >= n - 1) i = n - 2;
            const double frac = pos - static_cast<double>(i);
            values(static_cast<Index>(c), j) = frac == 0.0 ? s[i] : (1.0 - frac) * s[i] + frac * s[i + 1];
        }
        values(static_cast<Index>(c), 0) = s.front();
        values(static_cast<Index>(c), m - 1) = s.back();
    }
    return Curve(trial.trial_id, trial.subject_id, trial.channels, std::move(values));
}

struct PreprocessOptions {
    std::string reference_channel = "vGRF";
    double zero_tol = kDefaultZeroTolerance;
    std::size_t grid_length = kDefaultGridLength;
};

/// Trims and normalizes every trial into a Dataset.
inline Dataset preprocess(const std::vector<RawTrial>& trials, const PreprocessOptions& options = {}) {
    std::vector<Curve> curves;
    curves.reserve(trials.size());
    for (const auto& t : trials)
        curves.push_back(normalize_time(trim_zeros(t, options.reference_channel, options.zero_tol), options.grid_length));
    return Dataset(std::move(curves));
}

} // namespace elastika
