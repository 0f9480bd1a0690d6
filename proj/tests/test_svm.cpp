// Linear SVM solver tests.
//
// Optimality is checked against a dense (w, b) grid search on 1-feature
// 5-point problems, with the primal objective recomputed inline so the
// oracle shares no code with the solver. The remaining cases pin the
// documented invariants: monotone objective trace (1e-10 slack), prediction
// invariance under row duplication with C halved, target-shift equivariance,
// determinism, and JSON persistence.

#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "vinispec/errors.hpp"
#include "vinispec/featurize.hpp"
#include "vinispec/rng.hpp"
#include "vinispec/svm.hpp"

using namespace vinispec;
using namespace vinispec::svm;

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

double svr_objective_oracle(const std::vector<double>& x,
                            const std::vector<double>& y, double w, double b,
                            double C, double epsilon) {
    double obj = 0.5 * w * w;
    for (std::size_t i = 0; i < x.size(); ++i) {
        obj += C * std::max(0.0, std::abs(w * x[i] + b - y[i]) - epsilon);
    }
    return obj;
}

double svc_objective_oracle(const std::vector<double>& x,
                            const std::vector<int>& signs, double w, double b,
                            double C) {
    double obj = 0.5 * w * w;
    for (std::size_t i = 0; i < x.size(); ++i) {
        obj += C * std::max(0.0, 1.0 - signs[i] * (w * x[i] + b));
    }
    return obj;
}

template <typename Objective>
double grid_minimum(Objective&& objective) {
    double best = std::numeric_limits<double>::infinity();
    for (int wi = -500; wi <= 500; ++wi) {
        for (int bi = -500; bi <= 500; ++bi) {
            best = std::min(best, objective(wi * 0.01, bi * 0.01));
        }
    }
    return best;
}

} // namespace

TEST_SUITE("svm") {

TEST_CASE("SVR lands within 1e-3 of a dense grid-search optimum") {
    Rng rng(31);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(5);
        std::vector<double> y(5);
        for (std::size_t i = 0; i < 5; ++i) {
            x[i] = rng.uniform(-2.0, 2.0);
            y[i] = rng.uniform(-2.0, 2.0);
        }
        SvrConfig config;
        config.max_iter = 40000;
        config.tol = 1e-8;
        const LinearSvrModel model =
            train_linear_svr(matrix_of({{x[0]}, {x[1]}, {x[2]}, {x[3]}, {x[4]}}), y,
                             config);
        const double solver_obj = svr_objective_oracle(
            x, y, model.weights[0], model.bias, config.C, config.epsilon);
        const double grid_obj = grid_minimum([&](double w, double b) {
            return svr_objective_oracle(x, y, w, b, config.C, config.epsilon);
        });
        CHECK(solver_obj <= grid_obj + 1e-3);
    }
}

TEST_CASE("SVC lands within 1e-3 of a dense grid-search optimum") {
    Rng rng(32);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> x(5);
        std::vector<int> signs(5);
        std::vector<std::string> labels(5);
        bool both = false;
        while (!both) {
            for (std::size_t i = 0; i < 5; ++i) {
                x[i] = rng.uniform(-2.0, 2.0);
                signs[i] = rng.uniform01() < 0.5 ? -1 : 1;
                labels[i] = signs[i] > 0 ? "pos" : "neg";
            }
            both = false;
            for (std::size_t i = 1; i < 5; ++i) {
                both = both || signs[i] != signs[0];
            }
        }
        SvcConfig config;
        config.max_iter = 40000;
        config.tol = 1e-8;
        const LinearSvcModel model = train_linear_svc(
            matrix_of({{x[0]}, {x[1]}, {x[2]}, {x[3]}, {x[4]}}), labels, config);
        // One-vs-rest trains one discriminant per class; check the "pos" one.
        const std::size_t pos = model.classes[0] == "pos" ? 0 : 1;
        const double solver_obj = svc_objective_oracle(
            x, signs, model.weights[pos][0], model.biases[pos], config.C);
        const double grid_obj = grid_minimum([&](double w, double b) {
            return svc_objective_oracle(x, signs, w, b, config.C);
        });
        CHECK(solver_obj <= grid_obj + 1e-3);
    }
}

TEST_CASE("objective traces are non-increasing within 1e-10") {
    Rng rng(33);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 24; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(rows.back()[0] - 0.5 * rows.back()[2] + 0.1 * rng.normal());
        labels.push_back(rows.back()[1] > 0 ? "up" : "down");
    }
    const FeatureMatrix X = matrix_of(rows);

    SvrConfig svr_config;
    svr_config.record_objective_trace = true;
    const LinearSvrModel svr = train_linear_svr(X, y, svr_config);
    REQUIRE(svr.objective_trace.size() >= 2);
    for (std::size_t i = 1; i < svr.objective_trace.size(); ++i) {
        CHECK(svr.objective_trace[i] <= svr.objective_trace[i - 1] + 1e-10);
    }

    SvcConfig svc_config;
    svc_config.record_objective_trace = true;
    const LinearSvcModel svc = train_linear_svc(X, labels, svc_config);
    REQUIRE(svc.objective_traces.size() == svc.classes.size());
    for (const std::vector<double>& trace : svc.objective_traces) {
        REQUIRE(trace.size() >= 2);
        for (std::size_t i = 1; i < trace.size(); ++i) {
            CHECK(trace[i] <= trace[i - 1] + 1e-10);
        }
    }
    // Untraced models keep the trace empty.
    const LinearSvrModel quiet = train_linear_svr(X, y, SvrConfig{});
    CHECK(quiet.objective_trace.empty());
}

TEST_CASE("duplicating rows with C halved keeps SVR predictions") {
    Rng rng(34);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 12; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(2.0 * rows.back()[0] + rng.normal(0.0, 0.2));
    }
    std::vector<std::vector<double>> doubled = rows;
    doubled.insert(doubled.end(), rows.begin(), rows.end());
    std::vector<double> y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());

    SvrConfig config;
    config.max_iter = 60000;
    config.tol = 1e-10;
    SvrConfig half = config;
    half.C = config.C / 2.0;

    const FeatureMatrix X = matrix_of(rows);
    const LinearSvrModel base = train_linear_svr(X, y, config);
    const LinearSvrModel dup = train_linear_svr(matrix_of(doubled), y2, half);
    const std::vector<double> p1 = linear_predict(base, X);
    const std::vector<double> p2 = linear_predict(dup, X);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        CHECK(p1[i] == doctest::Approx(p2[i]).epsilon(1e-4));
    }
}

TEST_CASE("shifting every target shifts SVR predictions exactly") {
    Rng rng(35);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    std::vector<double> shifted;
    // Quarter-step targets over 8 rows make the mean exact in binary, so
    // centering the shifted targets reproduces the original problem bitwise.
    for (std::size_t i = 0; i < 8; ++i) {
        rows.push_back({rng.normal(), rng.normal(), rng.normal()});
        y.push_back(static_cast<double>(i % 7) * 0.25 - 0.5);
        shifted.push_back(y.back() + 250.0);
    }
    const FeatureMatrix X = matrix_of(rows);
    const LinearSvrModel base = train_linear_svr(X, y, SvrConfig{});
    const LinearSvrModel moved = train_linear_svr(X, shifted, SvrConfig{});
    CHECK(moved.weights == base.weights);
    CHECK(moved.bias == base.bias + 250.0);
}

TEST_CASE("SVC separates the 4-point XOR-free set perfectly") {
    const FeatureMatrix X =
        matrix_of({{-1.0, -1.0}, {-1.0, 1.0}, {1.0, -1.0}, {1.0, 1.0}});
    const std::vector<std::string> labels = {"left", "left", "right", "right"};
    const LinearSvcModel model = train_linear_svc(X, labels, SvcConfig{});
    CHECK(linear_predict(model, X) == labels);
}

TEST_CASE("three separable classes are recovered one-vs-rest") {
    Rng rng(36);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    const std::vector<std::pair<double, double>> centers = {
        {0.0, 6.0}, {-6.0, -4.0}, {6.0, -4.0}};
    const std::vector<std::string> names = {"north", "west", "east"};
    for (std::size_t k = 0; k < centers.size(); ++k) {
        for (int i = 0; i < 8; ++i) {
            rows.push_back({centers[k].first + rng.normal(0.0, 0.4),
                            centers[k].second + rng.normal(0.0, 0.4)});
            labels.push_back(names[k]);
        }
    }
    const FeatureMatrix X = matrix_of(rows);
    const LinearSvcModel model = train_linear_svc(X, labels, SvcConfig{});
    CHECK(model.classes == std::vector<std::string>{"east", "north", "west"});
    CHECK(linear_predict(model, X) == labels);

    const auto scores = decision_values(model, X);
    REQUIRE(scores.size() == rows.size());
    REQUIRE(scores[0].size() == 3);
}

TEST_CASE("training is deterministic in the seed") {
    Rng rng(37);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 15; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.normal());
    }
    const FeatureMatrix X = matrix_of(rows);
    const LinearSvrModel a = train_linear_svr(X, y, SvrConfig{});
    const LinearSvrModel b = train_linear_svr(X, y, SvrConfig{});
    CHECK(a.weights == b.weights);
    CHECK(a.bias == b.bias);
}

TEST_CASE("models survive a JSON round trip") {
    Rng rng(38);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < 9; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(rng.normal());
        labels.push_back(i % 3 == 0 ? "a" : (i % 3 == 1 ? "b" : "c"));
    }
    const FeatureMatrix X = matrix_of(rows);

    const LinearSvrModel svr = train_linear_svr(X, y, SvrConfig{});
    const LinearSvrModel svr2 = svr_from_json(svr_to_json(svr));
    CHECK(svr2.weights == svr.weights);
    CHECK(svr2.bias == svr.bias);
    CHECK(svr2.feature_names == svr.feature_names);
    CHECK(svr2.config.C == svr.config.C);

    const LinearSvcModel svc = train_linear_svc(X, labels, SvcConfig{});
    const LinearSvcModel svc2 = svc_from_json(svc_to_json(svc));
    CHECK(svc2.classes == svc.classes);
    CHECK(svc2.weights == svc.weights);
    CHECK(svc2.biases == svc.biases);
    CHECK(linear_predict(svc2, X) == linear_predict(svc, X));

    CHECK_THROWS_AS(svr_from_json("{"), MalformedValueError);
    CHECK_THROWS_AS(svr_from_json(svc_to_json(svc)), MalformedValueError);
    CHECK_THROWS_AS(svc_from_json(svr_to_json(svr)), MalformedValueError);
}

TEST_CASE("constant targets are fit inside the epsilon tube") {
    Rng rng(39);
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (std::size_t i = 0; i < 8; ++i) {
        rows.push_back({rng.normal(), rng.normal()});
        y.push_back(4.5);
    }
    const FeatureMatrix X = matrix_of(rows);
    const LinearSvrModel model = train_linear_svr(X, y, SvrConfig{});
    for (double p : linear_predict(model, X)) {
        CHECK(std::abs(p - 4.5) <= SvrConfig{}.epsilon + 1e-9);
    }
}

TEST_CASE("a noiseless line is recovered with a tight tube") {
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int v = -2; v <= 2; ++v) {
        rows.push_back({static_cast<double>(v), 0.0, 0.0});
        y.push_back(3.0 * v + 1.0);
    }
    SvrConfig config;
    config.C = 100.0;
    config.epsilon = 0.01;
    config.max_iter = 50000;
    config.tol = 1e-8;
    const FeatureMatrix X = matrix_of(rows);
    const LinearSvrModel model = train_linear_svr(X, y, config);
    const std::vector<double> p = linear_predict(model, X);
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(std::abs(p[i] - y[i]) < 0.05);
    }
    CHECK(std::abs(model.weights[0]) > std::abs(model.weights[1]));
    CHECK(std::abs(model.weights[0]) > std::abs(model.weights[2]));
}

TEST_CASE("degenerate training inputs are rejected") {
    const FeatureMatrix X = matrix_of({{1.0}, {2.0}});
    CHECK_THROWS_AS(train_linear_svr(X, {1.0}, SvrConfig{}),
                    DimensionMismatchError);
    CHECK_THROWS_AS(
        train_linear_svc(X, {"a", "a"}, SvcConfig{}), SingleClassError);
    SvrConfig bad;
    bad.C = 0.0;
    CHECK_THROWS_AS(train_linear_svr(X, {1.0, 2.0}, bad), OutOfRangeError);
    const double nan = std::nan("");
    CHECK_THROWS_AS(train_linear_svr(X, {1.0, nan}, SvrConfig{}),
                    NonFiniteError);
}

} // TEST_SUITE
