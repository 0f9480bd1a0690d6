#pragma once

#include <string>
#include <vector>

namespace vinispec::eval {

enum class TaskKind { regression, classification };

/// Index-aligned true/predicted values, pooled across CV folds.
struct PredictionSet {
    TaskKind kind = TaskKind::regression;
    std::vector<double> y;
    std::vector<double> y_hat;
    std::vector<std::string> y_labels;
    std::vector<std::string> y_hat_labels;

    std::size_t size() const {
        return kind == TaskKind::regression ? y.size() : y_labels.size();
    }
};

struct RegressionMetrics {
    double mae = 0.0;
    double rmse = 0.0;
    double evs = 0.0;
};

struct ClassificationMetrics {
    double accuracy = 0.0;
    double macro_f1 = 0.0;
};

/// MAE = mean |yᵢ−ŷᵢ|; RMSE = √(mean (yᵢ−ŷᵢ)²);
/// EVS = 1 − Var{y−ŷ}/Var{y} with population variance.
RegressionMetrics regression_metrics(const std::vector<double>& y,
                                     const std::vector<double>& y_hat);
RegressionMetrics regression_metrics(const PredictionSet& predictions);

/// Accuracy = fraction correct; macro-F1 = unweighted mean over classes
/// present in y of 2PR/(P+R), with per-class F1 = 0 when P+R = 0.
ClassificationMetrics classification_metrics(
    const std::vector<std::string>& y, const std::vector<std::string>& y_hat);
ClassificationMetrics classification_metrics(const PredictionSet& predictions);

} // namespace vinispec::eval
