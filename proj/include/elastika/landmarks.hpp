#pragma once

#include "elastika/curves.hpp"
#include "elastika/errors.hpp"
#include "elastika/features.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace elastika {

/// windowed: braking peak over the first half of stance, propulsion peak over
/// the second half. full_range: both apGRF extrema over the whole stance.
/// The vGRF first peak is always taken over the first half.
enum class WindowConvention { windowed, full_range };

inline WindowConvention parse_window_convention(const std::string& name) {
    if (name == "windowed") return WindowConvention::windowed;
    if (name == "full_range") return WindowConvention::full_range;
    throw ConfigError("unknown landmark convention '" + name + "' (expected windowed or full_range)");
}

inline const char* to_string(WindowConvention c) { return c == WindowConvention::windowed ? "windowed" : "full_range"; }

struct LandmarkVector {
    double vgrf_first_peak = 0.0;
    double apgrf_braking_peak = 0.0;
    double apgrf_propulsion_peak = 0.0;
    WindowConvention convention = WindowConvention::windowed;
};

inline const std::vector<std::string>& landmark_columns() {
    static const std::vector<std::string> names{"vgrf_first_peak", "apgrf_braking_peak", "apgrf_propulsion_peak"};
    return names;
}

/// Extrema over grid samples; t = 0.5 belongs to both halves.
inline LandmarkVector extract_landmarks(const Curve& curve, WindowConvention convention = WindowConvention::windowed,
                                        const std::string& vertical = "vGRF", const std::string& shear = "apGRF") {
    const RowVector v = curve.channel(vertical);
    const RowVector ap = curve.channel(shear);
    const Index m = curve.grid_length();
    auto first_half = [m](Index j) { return 2 * j <= m - 1; };
    auto second_half = [m](Index j) { return 2 * j >= m - 1; };
    const bool windowed = convention == WindowConvention::windowed;
    LandmarkVector out;
    out.convention = convention;
    out.vgrf_first_peak = -std::numeric_limits<double>::infinity();
    out.apgrf_braking_peak = std::numeric_limits<double>::infinity();
    out.apgrf_propulsion_peak = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < m; ++j) {
        if (first_half(j)) out.vgrf_first_peak = std::max(out.vgrf_first_peak, v(j));
        if (!windowed || first_half(j)) out.apgrf_braking_peak = std::min(out.apgrf_braking_peak, ap(j));
        if (!windowed || second_half(j)) out.apgrf_propulsion_peak = std::max(out.apgrf_propulsion_peak, ap(j));
    }
    return out;
}

inline FeatureMatrix landmark_table(const std::vector<Curve>& curves, WindowConvention convention = WindowConvention::windowed) {
    FeatureMatrix fm;
    fm.columns = landmark_columns();
    fm.values.resize(static_cast<Index>(curves.size()), 3);
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto l = extract_landmarks(curves[i], convention);
        fm.subject_ids.push_back(curves[i].subject_id());
        fm.trial_ids.push_back(curves[i].trial_id());
        fm.values.row(static_cast<Index>(i)) << l.vgrf_first_peak, l.apgrf_braking_peak, l.apgrf_propulsion_peak;
    }
    return fm;
}

} // namespace elastika
