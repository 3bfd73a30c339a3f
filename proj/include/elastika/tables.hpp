#pragma once

#include "elastika/errors.hpp"
#include "elastika/features.hpp"
#include "elastika/io.hpp"
#include "elastika/regress.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace elastika {

/// Feature CSV: subject_id,trial_id,<columns...>
inline void save_features(const FeatureMatrix& fm, const std::filesystem::path& path) {
    CsvTable t;
    t.header = {"subject_id", "trial_id"};
    t.header.insert(t.header.end(), fm.columns.begin(), fm.columns.end());
    for (Index r = 0; r < fm.rows(); ++r) {
        std::vector<std::string> row{fm.subject_ids[static_cast<std::size_t>(r)], fm.trial_ids[static_cast<std::size_t>(r)]};
        for (Index c = 0; c < fm.values.cols(); ++c) row.push_back(format_double(fm.values(r, c)));
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

inline FeatureMatrix load_features(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t sc = t.column("subject_id");
    const std::size_t tc = t.column("trial_id");
    FeatureMatrix fm;
    std::vector<std::size_t> value_cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (c != sc && c != tc) {
            fm.columns.push_back(t.header[c]);
            value_cols.push_back(c);
        }
    fm.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(value_cols.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        fm.subject_ids.push_back(t.rows[r][sc]);
        fm.trial_ids.push_back(t.rows[r][tc]);
        for (std::size_t j = 0; j < value_cols.size(); ++j)
            fm.values(static_cast<Index>(r), static_cast<Index>(j)) =
                parse_double(t.rows[r][value_cols[j]], path.string() + ": row " + std::to_string(r + 2));
    }
    return fm;
}

/// Trait CSV: subject_id,<trait...>; an empty cell is a missing value.
inline TraitTable load_traits(const std::filesystem::path& path) {
    const CsvTable t = read_csv(path);
    const std::size_t sc = t.column("subject_id");
    TraitTable table;
    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < t.header.size(); ++c)
        if (c != sc) {
            table.traits.push_back(t.header[c]);
            cols.push_back(c);
        }
    table.values.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(cols.size()));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        table.subject_ids.push_back(t.rows[r][sc]);
        for (std::size_t j = 0; j < cols.size(); ++j) {
            const std::string& cell = t.rows[r][cols[j]];
            table.values(static_cast<Index>(r), static_cast<Index>(j)) =
                cell.empty() ? std::numeric_limits<double>::quiet_NaN()
                             : parse_double(cell, path.string() + ": row " + std::to_string(r + 2));
        }
    }
    validate_traits(table);
    return table;
}

inline void save_traits(const TraitTable& table, const std::filesystem::path& path) {
    CsvTable t;
    t.header = {"subject_id"};
    t.header.insert(t.header.end(), table.traits.begin(), table.traits.end());
    for (std::size_t s = 0; s < table.subject_ids.size(); ++s) {
        std::vector<std::string> row{table.subject_ids[s]};
        for (Index j = 0; j < table.values.cols(); ++j) {
            const double v = table.values(static_cast<Index>(s), j);
            row.push_back(std::isnan(v) ? std::string() : format_double(v));
        }
        t.rows.push_back(std::move(row));
    }
    write_csv(path, t);
}

} // namespace elastika
