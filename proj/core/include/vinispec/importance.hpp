#pragma once
// Wavelength-importance scoring: random-forest mean decrease in impurity and
// absolute linear-SVM coefficients, min-max normalized to [0, 1], plus top-k
// ranking. Importance models train once on the full dataset with
// standardized features; no cross-validation.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vinispec/dataset.hpp"
#include "vinispec/evaluate.hpp"
#include "vinispec/featurize.hpp"
#include "vinispec/svm.hpp"

namespace vinispec::importance {

enum class Method { rf, svm };

Method parse_method(std::string_view name);
std::string_view method_name(Method method);

struct ImportanceCurve {
    std::string target;
    Method method = Method::rf;
    std::vector<std::string> column_names;
    /// Wavelength per column; empty for parameter columns (tss, ph, ...).
    std::vector<std::optional<int>> wavelengths;
    std::vector<double> raw;
    std::vector<double> normalized;
};

/// Regression: |wⱼ| per feature. Classification: Σ over one-vs-rest
/// classes of |wⱼ|.
std::vector<double> svm_coefficient_importance(const svm::LinearSvrModel& model);
std::vector<double> svm_coefficient_importance(const svm::LinearSvcModel& model);

/// Min-max mapping (s − min)/(max − min); all 0 when max = min.
/// Scores must be finite and non-negative.
std::vector<double> normalize_scores(const std::vector<double>& raw);

struct RankedColumn {
    std::string column_name;
    std::optional<int> wavelength_nm;
    double raw_score = 0.0;
    double normalized_score = 0.0;
};

/// The k highest normalized scores, descending. Ties: wavelength columns
/// before parameter columns, then ascending wavelength, then column order.
/// Throws KTooLarge when k exceeds the column count.
std::vector<RankedColumn> top_k_wavelengths(const ImportanceCurve& curve,
                                            std::size_t k);

struct ImportanceParams {
    eval::SvmParams svm;
    /// forest.max_features = 0 here means all features: with every split
    /// choosing the best column overall, importance concentrates on the
    /// truly informative wavelengths instead of spreading over correlated
    /// neighbors.
    eval::ForestParams forest;
    std::uint64_t seed = 0;
};

/// Assembles features for the target, standardizes on the full dataset,
/// trains the one model, and returns its scored curve.
ImportanceCurve compute_importance(const Dataset& dataset,
                                   const FeatureSpec& features, Method method,
                                   const ImportanceParams& params);

/// Long-format CSV: target,method,column_name,wavelength_nm,raw_score,
/// normalized_score; wavelength_nm is empty for parameter columns.
std::string importance_csv(const std::vector<ImportanceCurve>& curves);

/// Ranking CSV: target,method,rank,column_name,wavelength_nm,
/// normalized_score with rank starting at 1.
std::string topk_csv(const std::vector<ImportanceCurve>& curves,
                     std::size_t k);

} // namespace vinispec::importance
