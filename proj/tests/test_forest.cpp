// Random-forest and CART tests.
//
// The central oracle re-enumerates every candidate split (each feature,
// each midpoint between consecutive distinct sorted values) with impurities
// computed from the definitions, and requires the grown root to attain the
// brute-force minimum weighted child impurity within 1e-12. Importance
// normalization, determinism, leaf-size floors, and JSON persistence cover
// the rest of the contract.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "vinispec/errors.hpp"
#include "vinispec/featurize.hpp"
#include "vinispec/forest.hpp"
#include "vinispec/rng.hpp"

using namespace vinispec;
using namespace vinispec::forest;

namespace {

FeatureMatrix matrix_of(const std::vector<std::vector<double>>& rows) {
    FeatureMatrix m;
    m.n_rows = rows.size();
    m.n_cols = rows.empty() ? 0 : rows[0].size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        m.row_sample_ids.push_back("r" + std::to_string(i));
        m.values.insert(m.values.end(), rows[i].begin(), rows[i].end());
    }
    for (std::size_t j = 0; j < m.n_cols; ++j) {
        m.column_names.push_back("f" + std::to_string(j));
    }
    return m;
}

double variance_of(const std::vector<double>& values) {
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= static_cast<double>(values.size());
    double acc = 0.0;
    for (double v : values) {
        acc += (v - mean) * (v - mean);
    }
    return acc / static_cast<double>(values.size());
}

double gini_of(const std::vector<int>& labels) {
    std::map<int, std::size_t> counts;
    for (int label : labels) {
        counts[label] += 1;
    }
    double acc = 1.0;
    const double n = static_cast<double>(labels.size());
    for (const auto& [label, count] : counts) {
        const double p = static_cast<double>(count) / n;
        acc -= p * p;
    }
    return acc;
}

/// Minimum weighted child impurity over every (feature, midpoint) split, or
/// +infinity when no feature admits a split. `impurity` maps the target
/// values of one side to its impurity.
template <typename Targets, typename Impurity>
double brute_force_best(const std::vector<std::vector<double>>& rows,
                        const Targets& y, Impurity&& impurity) {
    const std::size_t n = rows.size();
    const std::size_t d = rows[0].size();
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t f = 0; f < d; ++f) {
        std::vector<double> values;
        for (const auto& row : rows) {
            values.push_back(row[f]);
        }
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t k = 0; k + 1 < n; ++k) {
            if (sorted[k] == sorted[k + 1]) {
                continue;
            }
            const double threshold =
                sorted[k] + (sorted[k + 1] - sorted[k]) / 2.0;
            Targets left;
            Targets right;
            for (std::size_t i = 0; i < n; ++i) {
                (values[i] <= threshold ? left : right).push_back(y[i]);
            }
            const double nl = static_cast<double>(left.size());
            const double nr = static_cast<double>(right.size());
            const double weighted =
                (nl * impurity(left) + nr * impurity(right)) /
                static_cast<double>(n);
            best = std::min(best, weighted);
        }
    }
    return best;
}

/// Weighted child impurity the grown tree achieved at its root.
template <typename Targets, typename Impurity>
double achieved_at_root(const Tree& tree,
                        const std::vector<std::vector<double>>& rows,
                        const Targets& y, Impurity&& impurity) {
    const TreeNode& root = tree.nodes[0];
    REQUIRE(root.feature >= 0);
    Targets left;
    Targets right;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        (rows[i][static_cast<std::size_t>(root.feature)] <= root.threshold
             ? left
             : right)
            .push_back(y[i]);
    }
    REQUIRE(!left.empty());
    REQUIRE(!right.empty());
    const double nl = static_cast<double>(left.size());
    const double nr = static_cast<double>(right.size());
    return (nl * impurity(left) + nr * impurity(right)) /
           static_cast<double>(rows.size());
}

ForestConfig single_exhaustive_tree() {
    ForestConfig config;
    config.n_trees = 1;
    config.bootstrap = false;
    config.max_features = 3; // >= d in these instances: examine everything
    config.min_samples_leaf = 1;
    return config;
}

} // namespace

TEST_SUITE("forest") {

TEST_CASE("impurity hand values") {
    CHECK(gini_impurity({5, 5}) == 0.5);
    CHECK(gini_impurity({10, 0}) == 0.0);
    CHECK(gini_impurity({1, 1, 2}) == doctest::Approx(0.625).epsilon(1e-15));
    CHECK(variance_impurity({1.0, 3.0}) == 1.0);
    CHECK(variance_impurity({2.0, 2.0, 2.0}) == 0.0);
}

TEST_CASE("root splits match brute-force enumeration over 200 instances") {
    Rng rng(70);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(7);  // 2..8 rows
        const std::size_t d = 1 + rng.below(3);  // 1..3 features
        std::vector<std::vector<double>> rows(n, std::vector<double>(d));
        for (auto& row : rows) {
            for (double& v : row) {
                // A small value alphabet forces duplicate feature values.
                v = static_cast<double>(rng.below(4));
            }
        }

        if (trial % 2 == 0) {
            std::vector<double> y(n);
            for (double& v : y) {
                v = static_cast<double>(rng.below(3));
            }
            const RFModel model = train_random_forest(
                matrix_of(rows), y, single_exhaustive_tree());
            const double best = brute_force_best(rows, y, variance_of);
            const TreeNode& root = model.trees[0].nodes[0];
            if (root.feature < 0) {
                // A legitimate leaf: pure targets or no splittable feature.
                CHECK((variance_of(y) == 0.0 || std::isinf(best)));
            } else {
                const double achieved =
                    achieved_at_root(model.trees[0], rows, y, variance_of);
                CHECK(achieved <= best + 1e-12);
            }
        } else {
            std::vector<int> y(n);
            for (int& v : y) {
                v = static_cast<int>(rng.below(3));
            }
            std::vector<std::string> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = std::string(1, static_cast<char>('a' + y[i]));
            }
            const RFModel model = train_random_forest(
                matrix_of(rows), labels, single_exhaustive_tree());
            const double best = brute_force_best(rows, y, gini_of);
            const TreeNode& root = model.trees[0].nodes[0];
            if (root.feature < 0) {
                CHECK((gini_of(y) == 0.0 || std::isinf(best)));
            } else {
                const double achieved =
                    achieved_at_root(model.trees[0], rows, y, gini_of);
                CHECK(achieved <= best + 1e-12);
            }
        }
    }
}

TEST_CASE("a single unrestricted tree memorizes distinct rows") {
    Rng rng(71);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 20; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.normal());
    }
    const FeatureMatrix X = matrix_of(rows);
    const RFModel model =
        train_random_forest(X, y, single_exhaustive_tree());
    const std::vector<double> p = rf_predict(model, X);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(p[i] == doctest::Approx(y[i]).epsilon(1e-12));
    }
}

TEST_CASE("min_samples_leaf bounds every leaf's training rows") {
    Rng rng(72);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 23; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(rows.back()[0] + 0.3 * rng.normal());
    }
    for (std::size_t msl : {std::size_t{2}, std::size_t{4}}) {
        ForestConfig config = single_exhaustive_tree();
        config.min_samples_leaf = msl;
        const RFModel model = train_random_forest(matrix_of(rows), y, config);
        const Tree& tree = model.trees[0];

        // Route every training row to its leaf and count arrivals.
        std::map<std::size_t, std::size_t> leaf_counts;
        for (const auto& row : rows) {
            std::size_t node = 0;
            while (tree.nodes[node].feature >= 0) {
                const TreeNode& t = tree.nodes[node];
                node = static_cast<std::size_t>(
                    row[static_cast<std::size_t>(t.feature)] <= t.threshold
                        ? t.left
                        : t.right);
            }
            leaf_counts[node] += 1;
        }
        for (const auto& [node, count] : leaf_counts) {
            CHECK(count >= msl);
        }
    }
}

TEST_CASE("a constant feature earns exactly zero importance") {
    Rng rng(73);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 30; ++i) {
        rows.push_back({rng.normal(), 7.0, rng.normal()});
        y.push_back(2.0 * rows.back()[0] + 0.1 * rng.normal());
    }
    ForestConfig config;
    config.n_trees = 25;
    config.seed = 5;
    const RFModel model = train_random_forest(matrix_of(rows), y, config);
    const std::vector<double> importance = rf_feature_importance(model);
    REQUIRE(importance.size() == 3);
    CHECK(importance[1] == 0.0);
    CHECK(importance[0] > importance[2]);

    double total = 0.0;
    for (double v : importance) {
        CHECK(v >= 0.0);
        total += v;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("classification predictions come from the training classes") {
    Rng rng(74);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 24; ++i) {
        const bool wide = i % 2 == 0;
        rows.push_back({(wide ? 3.0 : -3.0) + rng.normal(0.0, 0.5),
                        rng.normal()});
        labels.push_back(wide ? "wide" : "narrow");
    }
    const FeatureMatrix X = matrix_of(rows);
    ForestConfig config;
    config.n_trees = 15;
    const RFModel model = train_random_forest(X, labels, config);
    CHECK(model.classes == std::vector<std::string>{"narrow", "wide"});
    const std::vector<std::string> p = rf_predict_classes(model, X);
    const std::set<std::string> training(labels.begin(), labels.end());
    for (const std::string& label : p) {
        CHECK(training.count(label) == 1);
    }
    // Widely separated clusters are fit exactly.
    CHECK(p == labels);
}

TEST_CASE("forests are deterministic in the seed") {
    Rng rng(75);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 18; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.normal());
    }
    const FeatureMatrix X = matrix_of(rows);
    ForestConfig config;
    config.n_trees = 8;
    config.seed = 99;
    const RFModel a = train_random_forest(X, y, config);
    const RFModel b = train_random_forest(X, y, config);
    CHECK(rf_to_json(a) == rf_to_json(b));
    CHECK(rf_feature_importance(a) == rf_feature_importance(b));

    config.seed = 100;
    const RFModel c = train_random_forest(X, y, config);
    CHECK(rf_to_json(a) != rf_to_json(c));
}

TEST_CASE("forests survive a JSON round trip") {
    Rng rng(76);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 16; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.normal());
        labels.push_back(i % 2 == 0 ? "even" : "odd");
    }
    const FeatureMatrix X = matrix_of(rows);
    ForestConfig config;
    config.n_trees = 5;

    const RFModel reg = train_random_forest(X, y, config);
    const RFModel reg2 = rf_from_json(rf_to_json(reg));
    CHECK(rf_predict(reg2, X) == rf_predict(reg, X));
    CHECK(rf_feature_importance(reg2) == rf_feature_importance(reg));

    const RFModel cls = train_random_forest(X, labels, config);
    const RFModel cls2 = rf_from_json(rf_to_json(cls));
    CHECK(rf_predict_classes(cls2, X) == rf_predict_classes(cls, X));

    CHECK_THROWS_AS(rf_from_json("not json"), MalformedValueError);
    CHECK_THROWS_AS(rf_predict(cls, X), InvalidSpecError);
    CHECK_THROWS_AS(rf_predict_classes(reg, X), InvalidSpecError);
}

TEST_CASE("degenerate forest inputs are rejected") {
    const FeatureMatrix one = matrix_of({{1.0, 2.0}});
    CHECK_THROWS_AS(train_random_forest(one, {1.0}, ForestConfig{}),
                    TooFewRowsError);

    const FeatureMatrix X = matrix_of({{1.0}, {2.0}, {3.0}});
    ForestConfig none;
    none.n_trees = 0;
    CHECK_THROWS_AS(train_random_forest(X, {1.0, 2.0, 3.0}, none),
                    OutOfRangeError);

    const double nan = std::nan("");
    CHECK_THROWS_AS(
        train_random_forest(X, {1.0, nan, 3.0}, ForestConfig{}),
        NonFiniteError);
    CHECK_THROWS_AS(
        train_random_forest(matrix_of({{nan}, {2.0}, {3.0}}),
                            {1.0, 2.0, 3.0}, ForestConfig{}),
        NonFiniteError);
}

} // TEST_SUITE
