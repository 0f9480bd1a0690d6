#include "vinispec/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "vinispec/errors.hpp"

namespace vinispec::eval {

namespace {

void require_paired(std::size_t n_true, std::size_t n_pred) {
    if (n_true != n_pred) {
        throw DimensionMismatchError("prediction set has " +
                                     std::to_string(n_true) +
                                     " true values and " +
                                     std::to_string(n_pred) + " predictions");
    }
    if (n_true == 0) {
        throw TooFewSamplesError("prediction set is empty");
    }
}

double population_variance(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double sumsq = 0.0;
    for (double v : values) {
        const double dev = v - mean;
        sumsq += dev * dev;
    }
    return sumsq / static_cast<double>(values.size());
}

} // namespace

RegressionMetrics regression_metrics(const std::vector<double>& y,
                                     const std::vector<double>& y_hat) {
    require_paired(y.size(), y_hat.size());
    const std::size_t n = y.size();

    const auto [y_min, y_max] = std::minmax_element(y.begin(), y.end());
    if (*y_min == *y_max) {
        throw ZeroVarianceError(
            "constant true values make explained variance undefined");
    }

    RegressionMetrics out;
    std::vector<double> residuals(n);
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = y[i] - y_hat[i];
        residuals[i] = r;
        abs_sum += std::fabs(r);
        sq_sum += r * r;
    }
    out.mae = abs_sum / static_cast<double>(n);
    out.rmse = std::sqrt(sq_sum / static_cast<double>(n));
    out.evs = 1.0 - population_variance(residuals) / population_variance(y);
    return out;
}

RegressionMetrics regression_metrics(const PredictionSet& predictions) {
    return regression_metrics(predictions.y, predictions.y_hat);
}

ClassificationMetrics classification_metrics(
    const std::vector<std::string>& y,
    const std::vector<std::string>& y_hat) {
    require_paired(y.size(), y_hat.size());
    const std::size_t n = y.size();

    std::size_t correct = 0;
    // Confusion counts for every class appearing in y: tp, fp, fn.
    std::map<std::string, std::array<std::size_t, 3>> counts;
    for (const std::string& label : y) {
        counts.try_emplace(label, std::array<std::size_t, 3>{0, 0, 0});
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (y[i] == y_hat[i]) {
            ++correct;
            ++counts[y[i]][0];
        } else {
            ++counts[y[i]][2];
            auto it = counts.find(y_hat[i]);
            if (it != counts.end()) {
                ++it->second[1];
            }
        }
    }

    ClassificationMetrics out;
    out.accuracy = static_cast<double>(correct) / static_cast<double>(n);
    double f1_sum = 0.0;
    for (const auto& [label, c] : counts) {
        const auto [tp, fp, fn] = c;
        const double precision =
            tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                        : 0.0;
        const double recall =
            tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn)
                        : 0.0;
        const double f1 = precision + recall > 0.0
                              ? 2.0 * precision * recall / (precision + recall)
                              : 0.0;
        f1_sum += f1;
    }
    out.macro_f1 = f1_sum / static_cast<double>(counts.size());
    return out;
}

ClassificationMetrics classification_metrics(const PredictionSet& predictions) {
    return classification_metrics(predictions.y_labels,
                                  predictions.y_hat_labels);
}

} // namespace vinispec::eval
