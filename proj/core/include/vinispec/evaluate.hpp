#pragma once
// Leave-one-out splitters and the experiment runner: per fold, features are
// standardized on training rows only, the model trains with a fold seed
// derived from (master seed, fold index), and test predictions are pooled in
// fold order into one PredictionSet scored once. Results are deterministic
// for a given seed and independent of fold execution order or thread count.

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vinispec/dataset.hpp"
#include "vinispec/featurize.hpp"
#include "vinispec/metrics.hpp"

namespace vinispec::eval {

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Ordered folds; test sets partition the row indices, and each fold's
/// train set is the complement of its test set.
struct FoldPlan {
    std::vector<Fold> folds;
};

enum class CvScheme { loso, lojo };

CvScheme parse_cv_scheme(std::string_view name);
std::string_view cv_scheme_name(CvScheme scheme);

/// n folds; fold i tests exactly row i. Throws TooFewSamples when n < 2.
FoldPlan split_leave_one_sample_out(std::size_t n_samples);
FoldPlan split_leave_one_sample_out(const Dataset& dataset);

/// One fold per juice_id in first-appearance order; a fold tests all of
/// that juice's samples. Throws TooFewGroups with fewer than 2 juices.
FoldPlan split_leave_one_juice_out(const Dataset& dataset);

enum class ModelKind { svm, rf, dnn1, dnn2, dnn3, cnn1d, lstm, bilstm };

ModelKind parse_model_kind(std::string_view name);
std::string_view model_kind_name(ModelKind kind);

/// Every model kind in the canonical report row order.
const std::vector<ModelKind>& all_model_kinds();

/// Hyperparameters without seeds; the runner derives per-fold seeds.
struct SvmParams {
    double C = 1.0;
    double epsilon = 0.1; // SVR only
    double tol = 1e-4;
    std::size_t max_iter = 10000;
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t max_features = 0; // 0 = task default
    std::size_t min_samples_leaf = 1;
};

struct NetParams {
    std::size_t hidden_width = 64;
    std::size_t conv_filters = 8;
    std::size_t conv_kernel = 7;
    std::size_t pool_width = 2;
    std::size_t lstm_hidden = 32;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
};

struct ModelSpec {
    ModelKind kind = ModelKind::svm;
    SvmParams svm;
    ForestParams forest;
    NetParams network;
};

struct ResultTable {
    std::string task;
    std::string model;
    std::string cv;
    std::uint64_t seed = 0;
    std::size_t n_samples = 0;
    /// Ordered metric name→value pairs: mae, rmse, evs for regression;
    /// accuracy, f1 for classification.
    std::vector<std::pair<std::string, double>> metrics;
    PredictionSet predictions; // pooled over folds, fold order
    std::vector<std::string> sample_ids;
    std::vector<std::size_t> fold_index;
};

/// Full CV protocol for one (task, model, scheme) cell. Classification folds
/// whose test class never appears in training are still scored. n_threads
/// > 1 runs folds concurrently without changing any result.
ResultTable run_experiment(const Dataset& dataset, const FeatureSpec& features,
                           const ModelSpec& model, CvScheme scheme,
                           std::uint64_t seed, std::size_t n_threads = 1);

enum class ReportFormat { markdown, csv };

ReportFormat parse_report_format(std::string_view name);

/// Model×metric grid, models in canonical row order, cells rounded to
/// 3 decimals. Columns are task/cv/metric combinations; the task and cv
/// prefixes appear only when more than one value is present. All tables
/// must share one layout (regression or classification): MixedLayout.
std::string format_report(const std::vector<ResultTable>& tables,
                          ReportFormat format);

/// {"task", "model", "cv", "seed", "n_samples", "metrics"} as JSON.
std::string metrics_json(const ResultTable& table);

/// Rebuilds the report-relevant fields (not the predictions) of a stored
/// ResultTable.
ResultTable result_table_from_metrics_json(std::string_view text);

/// Header sample_id,fold,y,yhat; numeric cells rendered with 6 significant
/// digits.
std::string predictions_csv(const ResultTable& table);

} // namespace vinispec::eval
