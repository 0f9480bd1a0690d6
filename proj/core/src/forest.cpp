#include "vinispec/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vinispec/errors.hpp"
#include "vinispec/rng.hpp"

namespace vinispec::forest {

namespace {

void check_finite(const FeatureMatrix& X) {
    for (double v : X.values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("feature matrix contains a non-finite value");
        }
    }
}

struct SplitChoice {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double children_impurity = 0.0; // (nl·imp_l + nr·imp_r)/n_node
};

struct Builder {
    const FeatureMatrix& X;
    const std::vector<double>* reg_targets = nullptr;
    const std::vector<int>* cls_targets = nullptr;
    std::size_t n_classes = 0;
    std::size_t max_features = 1;
    std::size_t min_samples_leaf = 1;
    std::size_t n_root = 0;
    Tree* tree = nullptr;
    Rng* rng = nullptr;
    std::vector<std::size_t> feature_order;
    std::vector<std::pair<double, std::size_t>> scratch; // (value, row)

    bool is_regression() const { return reg_targets != nullptr; }

    double node_impurity(const std::vector<std::size_t>& rows) const {
        if (is_regression()) {
            double sum = 0.0;
            double sumsq = 0.0;
            for (std::size_t r : rows) {
                const double t = (*reg_targets)[r];
                sum += t;
                sumsq += t * t;
            }
            const double n = static_cast<double>(rows.size());
            return std::max(sumsq / n - (sum / n) * (sum / n), 0.0);
        }
        std::vector<std::size_t> counts(n_classes, 0);
        for (std::size_t r : rows) {
            ++counts[(*cls_targets)[r]];
        }
        return gini_impurity(counts);
    }

    bool is_pure(const std::vector<std::size_t>& rows) const {
        if (is_regression()) {
            const double first = (*reg_targets)[rows[0]];
            for (std::size_t r : rows) {
                if ((*reg_targets)[r] != first) {
                    return false;
                }
            }
            return true;
        }
        const int first = (*cls_targets)[rows[0]];
        for (std::size_t r : rows) {
            if ((*cls_targets)[r] != first) {
                return false;
            }
        }
        return true;
    }

    /// Best boundary for one feature by a single sorted sweep. Thresholds
    /// sit at midpoints between consecutive distinct values.
    SplitChoice best_split_on_feature(const std::vector<std::size_t>& rows,
                                      std::size_t feature) {
        const std::size_t n = rows.size();
        scratch.clear();
        for (std::size_t r : rows) {
            scratch.emplace_back(X.at(r, feature), r);
        }
        std::sort(scratch.begin(), scratch.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        if (scratch.front().first == scratch.back().first) {
            return {};
        }

        SplitChoice best;
        double best_impurity = 0.0;
        const double total = static_cast<double>(n);

        if (is_regression()) {
            double total_sum = 0.0;
            double total_sumsq = 0.0;
            for (const auto& [value, r] : scratch) {
                const double t = (*reg_targets)[r];
                total_sum += t;
                total_sumsq += t * t;
            }
            double left_sum = 0.0;
            double left_sumsq = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                const double t = (*reg_targets)[scratch[i].second];
                left_sum += t;
                left_sumsq += t * t;
                const std::size_t nl = i + 1;
                const std::size_t nr = n - nl;
                if (nl < min_samples_leaf || nr < min_samples_leaf ||
                    scratch[i].first == scratch[i + 1].first) {
                    continue;
                }
                const double dl = static_cast<double>(nl);
                const double dr = static_cast<double>(nr);
                const double var_l =
                    std::max(left_sumsq / dl - (left_sum / dl) * (left_sum / dl),
                             0.0);
                const double right_sum = total_sum - left_sum;
                const double right_sumsq = total_sumsq - left_sumsq;
                const double var_r = std::max(
                    right_sumsq / dr - (right_sum / dr) * (right_sum / dr), 0.0);
                const double impurity = (dl * var_l + dr * var_r) / total;
                if (!best.found || impurity < best_impurity) {
                    best.found = true;
                    best_impurity = impurity;
                    best.feature = feature;
                    best.threshold =
                        midpoint(scratch[i].first, scratch[i + 1].first);
                    best.children_impurity = impurity;
                }
            }
            return best;
        }

        std::vector<std::size_t> left_counts(n_classes, 0);
        std::vector<std::size_t> total_counts(n_classes, 0);
        for (const auto& [value, r] : scratch) {
            ++total_counts[(*cls_targets)[r]];
        }
        // Running Σc² on both sides lets Gini update in O(1) per step.
        double left_sq = 0.0;
        double right_sq = 0.0;
        for (std::size_t c : total_counts) {
            right_sq += static_cast<double>(c) * static_cast<double>(c);
        }
        std::vector<std::size_t> right_counts = total_counts;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const int cls = (*cls_targets)[scratch[i].second];
            left_sq += 2.0 * static_cast<double>(left_counts[cls]) + 1.0;
            ++left_counts[cls];
            right_sq -= 2.0 * static_cast<double>(right_counts[cls]) - 1.0;
            --right_counts[cls];
            const std::size_t nl = i + 1;
            const std::size_t nr = n - nl;
            if (nl < min_samples_leaf || nr < min_samples_leaf ||
                scratch[i].first == scratch[i + 1].first) {
                continue;
            }
            const double dl = static_cast<double>(nl);
            const double dr = static_cast<double>(nr);
            const double gini_l = 1.0 - left_sq / (dl * dl);
            const double gini_r = 1.0 - right_sq / (dr * dr);
            const double impurity = (dl * gini_l + dr * gini_r) / total;
            if (!best.found || impurity < best_impurity) {
                best.found = true;
                best_impurity = impurity;
                best.feature = feature;
                best.threshold =
                    midpoint(scratch[i].first, scratch[i + 1].first);
                best.children_impurity = impurity;
            }
        }
        return best;
    }

    /// Midpoint that is guaranteed to keep the sweep's partition: if
    /// rounding pushes it up to the right value, fall back to the left one.
    static double midpoint(double lo, double hi) {
        const double mid = lo + (hi - lo) / 2.0;
        return mid < hi ? mid : lo;
    }

    std::int32_t build(std::vector<std::size_t>&& rows) {
        const std::int32_t index =
            static_cast<std::int32_t>(tree->nodes.size());
        tree->nodes.emplace_back();

        const bool splittable = rows.size() >= 2 * min_samples_leaf &&
                                rows.size() >= 2 && !is_pure(rows);
        SplitChoice best;
        if (splittable) {
            feature_order.resize(X.n_cols);
            std::iota(feature_order.begin(), feature_order.end(),
                      std::size_t{0});
            rng->shuffle(feature_order);
            std::size_t examined = 0;
            double best_impurity = 0.0;
            for (std::size_t feature : feature_order) {
                ++examined;
                SplitChoice candidate = best_split_on_feature(rows, feature);
                if (candidate.found &&
                    (!best.found || candidate.children_impurity < best_impurity)) {
                    best = candidate;
                    best_impurity = candidate.children_impurity;
                }
                if (examined >= max_features && best.found) {
                    break;
                }
            }
        }

        if (!best.found) {
            make_leaf(tree->nodes[index], rows);
            return index;
        }

        const double impurity = node_impurity(rows);
        std::vector<std::size_t> left_rows;
        std::vector<std::size_t> right_rows;
        for (std::size_t r : rows) {
            (X.at(r, best.feature) <= best.threshold ? left_rows : right_rows)
                .push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();

        const double fraction =
            static_cast<double>(left_rows.size() + right_rows.size()) /
            static_cast<double>(n_root);
        const double gain =
            fraction * std::max(impurity - best.children_impurity, 0.0);

        const std::int32_t left = build(std::move(left_rows));
        const std::int32_t right = build(std::move(right_rows));
        TreeNode& node = tree->nodes[index];
        node.feature = static_cast<int>(best.feature);
        node.threshold = best.threshold;
        node.left = left;
        node.right = right;
        node.split_gain = gain;
        return index;
    }

    void make_leaf(TreeNode& node, const std::vector<std::size_t>& rows) {
        if (is_regression()) {
            double sum = 0.0;
            for (std::size_t r : rows) {
                sum += (*reg_targets)[r];
            }
            node.value = sum / static_cast<double>(rows.size());
        } else {
            node.class_counts.assign(n_classes, 0);
            for (std::size_t r : rows) {
                ++node.class_counts[(*cls_targets)[r]];
            }
        }
    }
};

std::size_t default_max_features(TreeTask task, std::size_t d) {
    if (task == TreeTask::classification) {
        return static_cast<std::size_t>(
            std::ceil(std::sqrt(static_cast<double>(d))));
    }
    return (d + 2) / 3;
}

RFModel train_forest_impl(const FeatureMatrix& X,
                          const std::vector<double>* reg_targets,
                          const std::vector<int>* cls_targets,
                          std::vector<std::string> classes,
                          const ForestConfig& config) {
    if (X.n_rows < 2) {
        throw TooFewRowsError("forest fit needs at least 2 rows, got " +
                              std::to_string(X.n_rows));
    }
    if (config.n_trees < 1) {
        throw OutOfRangeError("n_trees must be >= 1");
    }
    check_finite(X);

    RFModel model;
    model.task = reg_targets ? TreeTask::regression : TreeTask::classification;
    model.classes = std::move(classes);
    model.config = config;
    model.feature_names = X.column_names;

    std::size_t max_features = config.max_features == 0
                                   ? default_max_features(model.task, X.n_cols)
                                   : config.max_features;
    max_features = std::min(std::max<std::size_t>(max_features, 1), X.n_cols);

    const std::size_t n = X.n_rows;
    model.trees.reserve(config.n_trees);
    for (std::size_t t = 0; t < config.n_trees; ++t) {
        Rng rng(derive_seed(config.seed, t));
        std::vector<std::size_t> rows(n);
        if (config.bootstrap) {
            for (std::size_t i = 0; i < n; ++i) {
                rows[i] = rng.below(n);
            }
        } else {
            std::iota(rows.begin(), rows.end(), std::size_t{0});
        }

        Tree tree;
        Builder builder{.X = X,
                        .reg_targets = reg_targets,
                        .cls_targets = cls_targets,
                        .n_classes = model.classes.size(),
                        .max_features = max_features,
                        .min_samples_leaf =
                            std::max<std::size_t>(config.min_samples_leaf, 1),
                        .n_root = n,
                        .tree = &tree,
                        .rng = &rng};
        builder.build(std::move(rows));
        model.trees.push_back(std::move(tree));
    }
    return model;
}

const TreeNode& leaf_for(const Tree& tree, std::span<const double> x) {
    const TreeNode* node = &tree.nodes[0];
    while (node->feature >= 0) {
        node = x[static_cast<std::size_t>(node->feature)] <= node->threshold
                   ? &tree.nodes[node->left]
                   : &tree.nodes[node->right];
    }
    return *node;
}

std::size_t argmax_count(const std::vector<std::size_t>& counts) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < counts.size(); ++k) {
        if (counts[k] > counts[best]) {
            best = k;
        }
    }
    return best;
}

void check_width(const RFModel& model, const FeatureMatrix& X) {
    if (X.n_cols != model.feature_names.size()) {
        throw DimensionMismatchError(
            "model expects " + std::to_string(model.feature_names.size()) +
            " features, matrix has " + std::to_string(X.n_cols));
    }
}

} // namespace

double gini_impurity(const std::vector<std::size_t>& counts) {
    std::size_t total = 0;
    for (std::size_t c : counts) {
        total += c;
    }
    if (total == 0) {
        return 0.0;
    }
    double sumsq = 0.0;
    for (std::size_t c : counts) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sumsq += p * p;
    }
    return 1.0 - sumsq;
}

double variance_impurity(const std::vector<double>& values) {
    if (values.empty()) {
        return 0.0;
    }
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double sumsq = 0.0;
    for (double v : values) {
        sumsq += (v - mean) * (v - mean);
    }
    return sumsq / static_cast<double>(values.size());
}

RFModel train_random_forest(const FeatureMatrix& X,
                            const std::vector<double>& y,
                            const ForestConfig& config) {
    if (y.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, y has " +
                                     std::to_string(y.size()));
    }
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("targets contain a non-finite value");
        }
    }
    return train_forest_impl(X, &y, nullptr, {}, config);
}

RFModel train_random_forest(const FeatureMatrix& X,
                            const std::vector<std::string>& labels,
                            const ForestConfig& config) {
    if (labels.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, labels has " +
                                     std::to_string(labels.size()));
    }
    const std::set<std::string> distinct(labels.begin(), labels.end());
    std::vector<std::string> classes(distinct.begin(), distinct.end());
    std::vector<int> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        indices[i] = static_cast<int>(
            std::lower_bound(classes.begin(), classes.end(), labels[i]) -
            classes.begin());
    }
    return train_forest_impl(X, nullptr, &indices, std::move(classes), config);
}

std::vector<double> rf_predict(const RFModel& model, const FeatureMatrix& X) {
    if (model.task != TreeTask::regression) {
        throw InvalidSpecError("rf_predict requires a regression forest");
    }
    check_width(model, X);
    std::vector<double> out(X.n_rows, 0.0);
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        double sum = 0.0;
        for (const Tree& tree : model.trees) {
            sum += leaf_for(tree, X.row(i)).value;
        }
        out[i] = sum / static_cast<double>(model.trees.size());
    }
    return out;
}

std::vector<std::string> rf_predict_classes(const RFModel& model,
                                            const FeatureMatrix& X) {
    if (model.task != TreeTask::classification) {
        throw InvalidSpecError(
            "rf_predict_classes requires a classification forest");
    }
    check_width(model, X);
    std::vector<std::string> out(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::vector<std::size_t> votes(model.classes.size(), 0);
        for (const Tree& tree : model.trees) {
            ++votes[argmax_count(leaf_for(tree, X.row(i)).class_counts)];
        }
        out[i] = model.classes[argmax_count(votes)];
    }
    return out;
}

std::vector<double> rf_feature_importance(const RFModel& model) {
    const std::size_t d = model.feature_names.size();
    std::vector<double> mean_gain(d, 0.0);
    for (const Tree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (node.feature >= 0) {
                mean_gain[static_cast<std::size_t>(node.feature)] +=
                    node.split_gain;
            }
        }
    }
    double total = 0.0;
    for (double& g : mean_gain) {
        g /= static_cast<double>(model.trees.size());
        total += g;
    }
    if (total > 0.0) {
        for (double& g : mean_gain) {
            g /= total;
        }
    }
    return mean_gain;
}

std::string rf_to_json(const RFModel& model) {
    nlohmann::ordered_json doc;
    doc["kind"] = "random_forest";
    doc["task"] =
        model.task == TreeTask::regression ? "regression" : "classification";
    doc["classes"] = model.classes;
    doc["config"] = {{"n_trees", model.config.n_trees},
                     {"max_features", model.config.max_features},
                     {"min_samples_leaf", model.config.min_samples_leaf},
                     {"bootstrap", model.config.bootstrap},
                     {"seed", model.config.seed}};
    doc["feature_names"] = model.feature_names;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const Tree& tree : model.trees) {
        nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
        for (const TreeNode& node : tree.nodes) {
            nodes.push_back({{"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", node.left},
                             {"right", node.right},
                             {"value", node.value},
                             {"counts", node.class_counts},
                             {"gain", node.split_gain}});
        }
        trees.push_back({{"nodes", std::move(nodes)}});
    }
    doc["trees"] = std::move(trees);
    return doc.dump() + "\n";
}

RFModel rf_from_json(std::string_view text) {
    nlohmann::ordered_json doc =
        nlohmann::ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() ||
        doc.value("kind", "") != "random_forest") {
        throw MalformedValueError("model record is not a 'random_forest' record");
    }
    RFModel model;
    try {
        model.task = doc.at("task").get<std::string>() == "regression"
                         ? TreeTask::regression
                         : TreeTask::classification;
        model.classes = doc.at("classes").get<std::vector<std::string>>();
        const auto& c = doc.at("config");
        model.config.n_trees = c.at("n_trees").get<std::size_t>();
        model.config.max_features = c.at("max_features").get<std::size_t>();
        model.config.min_samples_leaf =
            c.at("min_samples_leaf").get<std::size_t>();
        model.config.bootstrap = c.at("bootstrap").get<bool>();
        model.config.seed = c.at("seed").get<std::uint64_t>();
        model.feature_names =
            doc.at("feature_names").get<std::vector<std::string>>();
        for (const auto& tree_doc : doc.at("trees")) {
            Tree tree;
            for (const auto& node_doc : tree_doc.at("nodes")) {
                TreeNode node;
                node.feature = node_doc.at("feature").get<int>();
                node.threshold = node_doc.at("threshold").get<double>();
                node.left = node_doc.at("left").get<std::int32_t>();
                node.right = node_doc.at("right").get<std::int32_t>();
                node.value = node_doc.at("value").get<double>();
                node.class_counts =
                    node_doc.at("counts").get<std::vector<std::size_t>>();
                node.split_gain = node_doc.at("gain").get<double>();
                tree.nodes.push_back(std::move(node));
            }
            model.trees.push_back(std::move(tree));
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedValueError(std::string("bad random_forest record: ") +
                                  e.what());
    }
    if (model.trees.empty()) {
        throw MalformedValueError("random_forest record has no trees");
    }
    return model;
}

} // namespace vinispec::forest
