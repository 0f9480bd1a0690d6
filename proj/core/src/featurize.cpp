#include "vinispec/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "vinispec/errors.hpp"

namespace vinispec {

namespace {

constexpr double kZeroVarianceTolerance = 1e-12;

std::string row_ref(std::size_t index) {
    return "row " + std::to_string(index + 1);
}

} // namespace

bool is_regression_target(Target target) {
    switch (target) {
    case Target::astringency:
    case Target::bitterness:
    case Target::herbaceous:
        return true;
    case Target::region:
    case Target::vineyard:
        return false;
    }
    return false;
}

Target parse_target(std::string_view name) {
    if (name == "astringency") return Target::astringency;
    if (name == "bitterness") return Target::bitterness;
    if (name == "herbaceous") return Target::herbaceous;
    if (name == "region") return Target::region;
    if (name == "vineyard") return Target::vineyard;
    throw InvalidSpecError("unknown task '" + std::string(name) +
                           "'; expected astringency, bitterness, herbaceous, "
                           "region, or vineyard");
}

std::string_view target_name(Target target) {
    switch (target) {
    case Target::astringency: return "astringency";
    case Target::bitterness: return "bitterness";
    case Target::herbaceous: return "herbaceous";
    case Target::region: return "region";
    case Target::vineyard: return "vineyard";
    }
    return "";
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> rows) const {
    FeatureMatrix out;
    out.n_rows = rows.size();
    out.n_cols = n_cols;
    out.column_names = column_names;
    out.values.reserve(rows.size() * n_cols);
    out.row_sample_ids.reserve(rows.size());
    for (std::size_t r : rows) {
        std::span<const double> src = row(r);
        out.values.insert(out.values.end(), src.begin(), src.end());
        out.row_sample_ids.push_back(row_sample_ids[r]);
    }
    return out;
}

void validate_feature_spec(const FeatureSpec& spec) {
    if (spec.wavelength_window.has_value()) {
        const auto [lo, hi] = *spec.wavelength_window;
        const WavelengthGrid grid;
        const bool aligned = (lo - grid.start_nm) % grid.step_nm == 0 &&
                             (hi - grid.start_nm) % grid.step_nm == 0;
        if (lo < grid.start_nm || hi > grid.end_nm || lo > hi || !aligned) {
            throw OutOfRangeError("window " + std::to_string(lo) + ":" +
                                  std::to_string(hi) +
                                  " does not align to the 200-600 nm grid");
        }
    }
    if (is_regression_target(spec.target) &&
        (spec.include_chemistry || spec.include_harvest_type)) {
        throw InvalidSpecError(
            "sensory-attribute targets use absorbance features only");
    }
}

std::vector<std::string> harvest_categories(const Dataset& dataset) {
    std::set<std::string> categories;
    for (const Sample& sample : dataset.samples) {
        if (!sample.metadata.harvest_type.empty()) {
            categories.insert(sample.metadata.harvest_type);
        }
    }
    return {categories.begin(), categories.end()};
}

AssembledFeatures assemble_features(const Dataset& dataset,
                                    const FeatureSpec& spec) {
    return assemble_features(dataset, spec, harvest_categories(dataset));
}

AssembledFeatures assemble_features(
    const Dataset& dataset, const FeatureSpec& spec,
    const std::vector<std::string>& harvest_schema) {
    validate_feature_spec(spec);
    if (dataset.samples.empty()) {
        throw TooFewRowsError("cannot assemble features from an empty dataset");
    }

    const WavelengthGrid& grid = dataset.grid;
    const int lo = spec.wavelength_window ? spec.wavelength_window->first
                                          : grid.start_nm;
    const int hi = spec.wavelength_window ? spec.wavelength_window->second
                                          : grid.end_nm;
    const std::size_t first = static_cast<std::size_t>(
        (lo - grid.start_nm) / grid.step_nm);
    const std::size_t last = static_cast<std::size_t>(
        (hi - grid.start_nm) / grid.step_nm);

    AssembledFeatures out;
    FeatureMatrix& matrix = out.matrix;
    for (std::size_t j = first; j <= last; ++j) {
        matrix.column_names.push_back(
            wavelength_column_name(grid.wavelength_at(j)));
    }
    if (spec.include_chemistry) {
        matrix.column_names.insert(matrix.column_names.end(),
                                   {"tss", "ph", "ta"});
    }
    if (spec.include_harvest_type) {
        for (const std::string& category : harvest_schema) {
            matrix.column_names.push_back("harvest=" + category);
        }
    }

    matrix.n_rows = dataset.samples.size();
    matrix.n_cols = matrix.column_names.size();
    matrix.values.reserve(matrix.n_rows * matrix.n_cols);
    matrix.row_sample_ids.reserve(matrix.n_rows);

    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
        const Sample& sample = dataset.samples[i];
        matrix.row_sample_ids.push_back(sample.sample_id);
        if (sample.spectrum.absorbance.size() != grid.size()) {
            throw DimensionMismatchError(row_ref(i) + ": spectrum has " +
                                         std::to_string(
                                             sample.spectrum.absorbance.size()) +
                                         " points, grid has " +
                                         std::to_string(grid.size()));
        }
        for (std::size_t j = first; j <= last; ++j) {
            matrix.values.push_back(sample.spectrum.absorbance[j]);
        }
        if (spec.include_chemistry) {
            const double chem[] = {sample.metadata.tss, sample.metadata.ph,
                                   sample.metadata.ta};
            const char* chem_names[] = {"tss", "ph", "ta"};
            for (std::size_t k = 0; k < 3; ++k) {
                if (!std::isfinite(chem[k])) {
                    throw MissingFieldError(row_ref(i) + ": field '" +
                                            chem_names[k] + "' is missing");
                }
                matrix.values.push_back(chem[k]);
            }
        }
        if (spec.include_harvest_type) {
            const std::string& category = sample.metadata.harvest_type;
            if (category.empty()) {
                throw MissingFieldError(row_ref(i) +
                                        ": field 'harvest_type' is missing");
            }
            const auto it = std::find(harvest_schema.begin(),
                                      harvest_schema.end(), category);
            if (it == harvest_schema.end()) {
                throw InvalidSpecError(row_ref(i) + ": harvest_type '" +
                                       category +
                                       "' is not in the feature schema");
            }
            for (const std::string& schema_category : harvest_schema) {
                matrix.values.push_back(schema_category == category ? 1.0
                                                                    : 0.0);
            }
        }

        switch (spec.target) {
        case Target::astringency:
        case Target::bitterness:
        case Target::herbaceous: {
            const std::optional<double>& label =
                spec.target == Target::astringency ? sample.labels.astringency
                : spec.target == Target::bitterness ? sample.labels.bitterness
                                                    : sample.labels.herbaceous;
            if (!label.has_value()) {
                throw MissingLabelError(
                    row_ref(i) + ": label '" +
                    std::string(target_name(spec.target)) + "' is missing");
            }
            out.regression_targets.push_back(*label);
            break;
        }
        case Target::region:
        case Target::vineyard: {
            const std::string& label = spec.target == Target::region
                                           ? sample.metadata.region
                                           : sample.metadata.vineyard;
            if (label.empty()) {
                throw MissingLabelError(
                    row_ref(i) + ": label '" +
                    std::string(target_name(spec.target)) + "' is missing");
            }
            out.class_targets.push_back(label);
            break;
        }
        }
    }
    return out;
}

Standardizer fit_standardizer(const FeatureMatrix& matrix) {
    if (matrix.n_rows < 2) {
        throw TooFewRowsError("standardizer needs at least 2 rows, got " +
                              std::to_string(matrix.n_rows));
    }
    const std::size_t n = matrix.n_rows;
    const std::size_t d = matrix.n_cols;
    Standardizer out;
    out.means.assign(d, 0.0);
    out.stds.assign(d, 1.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::span<const double> row = matrix.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            out.means[c] += row[c];
        }
    }
    for (double& m : out.means) {
        m /= static_cast<double>(n);
    }
    std::vector<double> sumsq(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        std::span<const double> row = matrix.row(r);
        for (std::size_t c = 0; c < d; ++c) {
            const double dev = row[c] - out.means[c];
            sumsq[c] += dev * dev;
        }
    }
    for (std::size_t c = 0; c < d; ++c) {
        const double sd = std::sqrt(sumsq[c] / static_cast<double>(n));
        const double floor =
            kZeroVarianceTolerance * std::max(1.0, std::fabs(out.means[c]));
        out.stds[c] = sd > floor ? sd : 1.0;
    }
    return out;
}

FeatureMatrix apply_standardizer(const Standardizer& standardizer,
                                 const FeatureMatrix& matrix) {
    if (standardizer.means.size() != matrix.n_cols ||
        standardizer.stds.size() != matrix.n_cols) {
        throw DimensionMismatchError(
            "standardizer has " + std::to_string(standardizer.means.size()) +
            " columns, matrix has " + std::to_string(matrix.n_cols));
    }
    FeatureMatrix out = matrix;
    for (std::size_t r = 0; r < out.n_rows; ++r) {
        std::span<double> row = out.row(r);
        for (std::size_t c = 0; c < out.n_cols; ++c) {
            row[c] = (row[c] - standardizer.means[c]) / standardizer.stds[c];
        }
    }
    return out;
}

} // namespace vinispec
