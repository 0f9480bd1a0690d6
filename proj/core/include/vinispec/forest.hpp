#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vinispec/featurize.hpp"

namespace vinispec::forest {

enum class TreeTask { regression, classification };

/// Flat node record; feature < 0 marks a leaf. Internal nodes route
/// x[feature] <= threshold to `left`. split_gain is the node-fraction
/// weighted impurity decrease of the split, the unit of importance.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;                     // regression leaf
    std::vector<std::size_t> class_counts;  // classification leaf
    double split_gain = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root
};

struct ForestConfig {
    std::size_t n_trees = 100;
    /// 0 selects the default: ceil(sqrt(d)) for classification,
    /// ceil(d/3) for regression.
    std::size_t max_features = 0;
    std::size_t min_samples_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

struct RFModel {
    TreeTask task = TreeTask::regression;
    std::vector<std::string> classes; // lexically sorted, classification only
    std::vector<Tree> trees;
    ForestConfig config;
    std::vector<std::string> feature_names;
};

/// Gini impurity from a class histogram; 0 for a pure node, 0.5 for a
/// balanced binary node.
double gini_impurity(const std::vector<std::size_t>& counts);

/// Population variance of targets; 0 for constant targets.
double variance_impurity(const std::vector<double>& values);

/// Greedy CART growth on a bootstrap resample per tree (or the full data
/// when bootstrap is off). Candidate features per split are a random subset
/// of size max_features; when every sampled feature is constant within the
/// node, further features from the same shuffled order are considered so a
/// splittable node never becomes a leaf by accident. Each tree consumes an
/// independent stream derived from (seed, tree index).
RFModel train_random_forest(const FeatureMatrix& X,
                            const std::vector<double>& y,
                            const ForestConfig& config);
RFModel train_random_forest(const FeatureMatrix& X,
                            const std::vector<std::string>& labels,
                            const ForestConfig& config);

/// Mean of tree outputs; regression models only.
std::vector<double> rf_predict(const RFModel& model, const FeatureMatrix& X);

/// Majority vote over trees, ties broken by class-list order;
/// classification models only.
std::vector<std::string> rf_predict_classes(const RFModel& model,
                                            const FeatureMatrix& X);

/// Mean decrease in impurity: per feature, split gains summed within each
/// tree, averaged over trees, normalized to sum to 1 when any split exists.
std::vector<double> rf_feature_importance(const RFModel& model);

std::string rf_to_json(const RFModel& model);
RFModel rf_from_json(std::string_view text);

} // namespace vinispec::forest
