#include "vinispec/importance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vinispec/errors.hpp"
#include "vinispec/forest.hpp"
#include "vinispec/textio.hpp"

namespace vinispec::importance {

namespace {

std::vector<std::optional<int>>
column_wavelengths(const std::vector<std::string>& names) {
    std::vector<std::optional<int>> out(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (is_wavelength_column(names[i])) {
            out[i] = wavelength_of_column(names[i]);
        }
    }
    return out;
}

} // namespace

Method parse_method(std::string_view name) {
    if (name == "rf") {
        return Method::rf;
    }
    if (name == "svm") {
        return Method::svm;
    }
    throw InvalidSpecError("unknown importance method '" + std::string(name) +
                           "'; expected rf or svm");
}

std::string_view method_name(Method method) {
    return method == Method::rf ? "rf" : "svm";
}

std::vector<double>
svm_coefficient_importance(const svm::LinearSvrModel& model) {
    std::vector<double> scores(model.weights.size());
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        scores[j] = std::abs(model.weights[j]);
    }
    return scores;
}

std::vector<double>
svm_coefficient_importance(const svm::LinearSvcModel& model) {
    std::vector<double> scores(model.feature_names.size(), 0.0);
    for (const std::vector<double>& w : model.weights) {
        for (std::size_t j = 0; j < scores.size(); ++j) {
            scores[j] += std::abs(w[j]);
        }
    }
    return scores;
}

std::vector<double> normalize_scores(const std::vector<double>& raw) {
    if (raw.empty()) {
        return {};
    }
    for (double s : raw) {
        if (!std::isfinite(s)) {
            throw NonFiniteError("importance scores must be finite");
        }
        if (s < 0.0) {
            throw OutOfRangeError("importance scores must be non-negative");
        }
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    std::vector<double> out(raw.size(), 0.0);
    if (*hi == *lo) {
        return out;
    }
    const double span = *hi - *lo;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        out[i] = (raw[i] - *lo) / span;
    }
    return out;
}

std::vector<RankedColumn> top_k_wavelengths(const ImportanceCurve& curve,
                                            std::size_t k) {
    const std::size_t n = curve.column_names.size();
    if (k < 1) {
        throw OutOfRangeError("top-k needs k >= 1");
    }
    if (k > n) {
        throw KTooLargeError("top-" + std::to_string(k) + " exceeds the " +
                             std::to_string(n) + " scored columns");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (curve.normalized[a] != curve.normalized[b]) {
            return curve.normalized[a] > curve.normalized[b];
        }
        const bool wa = curve.wavelengths[a].has_value();
        const bool wb = curve.wavelengths[b].has_value();
        if (wa != wb) {
            return wa; // wavelengths rank ahead of parameter columns
        }
        if (wa && wb && *curve.wavelengths[a] != *curve.wavelengths[b]) {
            return *curve.wavelengths[a] < *curve.wavelengths[b];
        }
        return a < b;
    });
    std::vector<RankedColumn> out;
    out.reserve(k);
    for (std::size_t r = 0; r < k; ++r) {
        const std::size_t i = order[r];
        out.push_back({curve.column_names[i], curve.wavelengths[i],
                       curve.raw[i], curve.normalized[i]});
    }
    return out;
}

ImportanceCurve compute_importance(const Dataset& dataset,
                                   const FeatureSpec& features, Method method,
                                   const ImportanceParams& params) {
    const AssembledFeatures assembled = assemble_features(dataset, features);
    const Standardizer standardizer = fit_standardizer(assembled.matrix);
    const FeatureMatrix X = apply_standardizer(standardizer, assembled.matrix);
    const bool regression = is_regression_target(features.target);

    ImportanceCurve curve;
    curve.target = std::string(target_name(features.target));
    curve.method = method;
    curve.column_names = X.column_names;
    curve.wavelengths = column_wavelengths(X.column_names);

    if (method == Method::rf) {
        forest::ForestConfig config;
        config.n_trees = params.forest.n_trees;
        config.max_features = params.forest.max_features == 0
                                  ? X.n_cols
                                  : params.forest.max_features;
        config.min_samples_leaf = params.forest.min_samples_leaf;
        config.seed = params.seed;
        const forest::RFModel model =
            regression
                ? forest::train_random_forest(X, assembled.regression_targets,
                                              config)
                : forest::train_random_forest(X, assembled.class_targets,
                                              config);
        curve.raw = forest::rf_feature_importance(model);
    } else if (regression) {
        svm::SvrConfig config;
        config.C = params.svm.C;
        config.epsilon = params.svm.epsilon;
        config.tol = params.svm.tol;
        config.max_iter = params.svm.max_iter;
        config.seed = params.seed;
        curve.raw = svm_coefficient_importance(
            svm::train_linear_svr(X, assembled.regression_targets, config));
    } else {
        svm::SvcConfig config;
        config.C = params.svm.C;
        config.tol = params.svm.tol;
        config.max_iter = params.svm.max_iter;
        config.seed = params.seed;
        curve.raw = svm_coefficient_importance(
            svm::train_linear_svc(X, assembled.class_targets, config));
    }
    curve.normalized = normalize_scores(curve.raw);
    return curve;
}

std::string importance_csv(const std::vector<ImportanceCurve>& curves) {
    std::string out =
        "target,method,column_name,wavelength_nm,raw_score,normalized_score\n";
    for (const ImportanceCurve& curve : curves) {
        for (std::size_t i = 0; i < curve.column_names.size(); ++i) {
            out += curve.target;
            out += ',';
            out += method_name(curve.method);
            out += ',';
            out += curve.column_names[i];
            out += ',';
            if (curve.wavelengths[i]) {
                out += std::to_string(*curve.wavelengths[i]);
            }
            out += ',';
            out += format_significant(curve.raw[i], 9);
            out += ',';
            out += format_significant(curve.normalized[i], 9);
            out += '\n';
        }
    }
    return out;
}

std::string topk_csv(const std::vector<ImportanceCurve>& curves,
                     std::size_t k) {
    std::string out =
        "target,method,rank,column_name,wavelength_nm,normalized_score\n";
    for (const ImportanceCurve& curve : curves) {
        const std::vector<RankedColumn> ranked = top_k_wavelengths(curve, k);
        for (std::size_t r = 0; r < ranked.size(); ++r) {
            out += curve.target;
            out += ',';
            out += method_name(curve.method);
            out += ',';
            out += std::to_string(r + 1);
            out += ',';
            out += ranked[r].column_name;
            out += ',';
            if (ranked[r].wavelength_nm) {
                out += std::to_string(*ranked[r].wavelength_nm);
            }
            out += ',';
            out += format_significant(ranked[r].normalized_score, 9);
            out += '\n';
        }
    }
    return out;
}

} // namespace vinispec::importance
