#pragma once

#include "elastika/detail/numeric.hpp"
#include "elastika/errors.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace elastika {

/// Rows are curves (with their ids), columns are named predictors.
struct FeatureMatrix {
    std::vector<std::string> columns;
    std::vector<std::string> subject_ids;
    std::vector<std::string> trial_ids;
    Matrix values;

    Index rows() const { return values.rows(); }

    std::size_t column_index(std::string_view name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw SchemaError("feature column '" + std::string(name) + "' not found");
    }

    Vector column(std::string_view name) const { return values.col(static_cast<Index>(column_index(name))); }
};

} // namespace elastika
