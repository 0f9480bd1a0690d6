#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vinispec/dataset.hpp"

namespace vinispec {

enum class Target { astringency, bitterness, herbaceous, region, vineyard };

bool is_regression_target(Target target);
Target parse_target(std::string_view name);
std::string_view target_name(Target target);

/// What goes into the design matrix. Regression targets use absorbance
/// only, so chemistry and harvest flags are rejected for them.
struct FeatureSpec {
    /// Inclusive nm range; absent means the full grid.
    std::optional<std::pair<int, int>> wavelength_window;
    bool include_chemistry = false;
    bool include_harvest_type = false;
    Target target = Target::astringency;
};

/// Row-major numeric design matrix with named columns.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values; // n_rows × n_cols
    std::vector<std::string> column_names;
    std::vector<std::string> row_sample_ids;

    double at(std::size_t r, std::size_t c) const {
        return values[r * n_cols + c];
    }
    std::span<const double> row(std::size_t r) const {
        return {values.data() + r * n_cols, n_cols};
    }
    std::span<double> row(std::size_t r) {
        return {values.data() + r * n_cols, n_cols};
    }

    /// The named rows only, in the given order.
    FeatureMatrix subset(std::span<const std::size_t> rows) const;
};

struct AssembledFeatures {
    FeatureMatrix matrix;
    std::vector<double> regression_targets;  // filled for regression targets
    std::vector<std::string> class_targets;  // filled for classification
};

void validate_feature_spec(const FeatureSpec& spec);

/// Harvest categories present in the dataset, lexically sorted.
std::vector<std::string> harvest_categories(const Dataset& dataset);

/// Column order: wavelengths ascending, then tss, ph, ta, then one-hot
/// harvest categories ("harvest=<name>") in lexical order.
AssembledFeatures assemble_features(const Dataset& dataset,
                                    const FeatureSpec& spec);

/// Same, against a fixed harvest-category schema; a category not in the
/// schema is an error, never silent zeros.
AssembledFeatures assemble_features(
    const Dataset& dataset, const FeatureSpec& spec,
    const std::vector<std::string>& harvest_schema);

/// Per-column mean and population standard deviation; zero-variance columns
/// are recorded with std = 1.
struct Standardizer {
    std::vector<double> means;
    std::vector<double> stds;
};

Standardizer fit_standardizer(const FeatureMatrix& matrix);

/// entry ← (entry − mean)/std, column-wise; names and ids preserved.
FeatureMatrix apply_standardizer(const Standardizer& standardizer,
                                 const FeatureMatrix& matrix);

} // namespace vinispec
