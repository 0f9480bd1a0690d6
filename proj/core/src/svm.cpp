#include "vinispec/svm.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <set>

#include <json.hpp>

#include "vinispec/errors.hpp"
#include "vinispec/rng.hpp"

namespace vinispec::svm {

namespace {

// The bias enters the dual as one extra feature of constant value B. Its
// weight is penalized by b²/(2B²), which understates the stated objective
// by at most that amount; B = 100 keeps the gap below 1e-4 for |b| <= 1.
constexpr double kBiasScale = 100.0;

void check_finite(const FeatureMatrix& X) {
    for (double v : X.values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("feature matrix contains a non-finite value");
        }
    }
}

void check_finite(const std::vector<double>& y) {
    for (double v : y) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("targets contain a non-finite value");
        }
    }
}

double dot_row(const FeatureMatrix& X, std::size_t i,
               const std::vector<double>& w_aug) {
    std::span<const double> x = X.row(i);
    double acc = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) {
        acc += x[c] * w_aug[c];
    }
    return acc + kBiasScale * w_aug[x.size()];
}

void axpy_row(const FeatureMatrix& X, std::size_t i, double scale,
              std::vector<double>& w_aug) {
    std::span<const double> x = X.row(i);
    for (std::size_t c = 0; c < x.size(); ++c) {
        w_aug[c] += scale * x[c];
    }
    w_aug[x.size()] += scale * kBiasScale;
}

std::vector<double> row_norms_aug(const FeatureMatrix& X) {
    std::vector<double> qd(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::span<const double> x = X.row(i);
        double acc = kBiasScale * kBiasScale;
        for (double v : x) {
            acc += v * v;
        }
        qd[i] = acc;
    }
    return qd;
}

/// ε-insensitive dual coordinate descent; β ∈ [−C, C]ⁿ, w = Σ βᵢx̃ᵢ.
std::vector<double> solve_svr_dual(
    const FeatureMatrix& X, const std::vector<double>& targets,
    const SvrConfig& config,
    const std::function<void(const std::vector<double>&)>& on_epoch) {
    const std::size_t n = X.n_rows;
    std::vector<double> w_aug(X.n_cols + 1, 0.0);
    std::vector<double> beta(n, 0.0);
    const std::vector<double> qd = row_norms_aug(X);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);

    if (on_epoch) {
        on_epoch(w_aug);
    }
    for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
        rng.shuffle(order);
        double max_violation = 0.0;
        for (std::size_t i : order) {
            const double g = dot_row(X, i, w_aug) - targets[i];
            const double gp = g + config.epsilon;
            const double gn = g - config.epsilon;

            double violation = 0.0;
            if (beta[i] == 0.0) {
                if (gp < 0.0) {
                    violation = -gp;
                } else if (gn > 0.0) {
                    violation = gn;
                }
            } else if (beta[i] >= config.C) {
                violation = std::max(gp, 0.0);
            } else if (beta[i] <= -config.C) {
                violation = std::max(-gn, 0.0);
            } else if (beta[i] > 0.0) {
                violation = std::fabs(gp);
            } else {
                violation = std::fabs(gn);
            }
            max_violation = std::max(max_violation, violation);

            double step;
            if (gp < qd[i] * beta[i]) {
                step = -gp / qd[i];
            } else if (gn > qd[i] * beta[i]) {
                step = -gn / qd[i];
            } else {
                step = -beta[i];
            }
            if (std::fabs(step) < 1e-12) {
                continue;
            }
            const double old = beta[i];
            beta[i] = std::min(std::max(old + step, -config.C), config.C);
            if (beta[i] != old) {
                axpy_row(X, i, beta[i] - old, w_aug);
            }
        }
        if (on_epoch) {
            on_epoch(w_aug);
        }
        if (max_violation <= config.tol) {
            break;
        }
    }
    return w_aug;
}

/// Hinge-loss dual coordinate descent; α ∈ [0, C]ⁿ, w = Σ αᵢsᵢx̃ᵢ.
std::vector<double> solve_svc_dual(
    const FeatureMatrix& X, const std::vector<int>& signs,
    const SvcConfig& config, std::uint64_t seed,
    const std::function<void(const std::vector<double>&)>& on_epoch) {
    const std::size_t n = X.n_rows;
    std::vector<double> w_aug(X.n_cols + 1, 0.0);
    std::vector<double> alpha(n, 0.0);
    const std::vector<double> qd = row_norms_aug(X);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);

    if (on_epoch) {
        on_epoch(w_aug);
    }
    for (std::size_t iter = 0; iter < config.max_iter; ++iter) {
        rng.shuffle(order);
        double max_violation = 0.0;
        for (std::size_t i : order) {
            const double s = static_cast<double>(signs[i]);
            const double g = s * dot_row(X, i, w_aug) - 1.0;

            double pg = g;
            if (alpha[i] == 0.0) {
                pg = std::min(g, 0.0);
            } else if (alpha[i] >= config.C) {
                pg = std::max(g, 0.0);
            }
            max_violation = std::max(max_violation, std::fabs(pg));

            if (pg == 0.0) {
                continue;
            }
            const double old = alpha[i];
            alpha[i] = std::min(std::max(old - g / qd[i], 0.0), config.C);
            if (alpha[i] != old) {
                axpy_row(X, i, (alpha[i] - old) * s, w_aug);
            }
        }
        if (on_epoch) {
            on_epoch(w_aug);
        }
        if (max_violation <= config.tol) {
            break;
        }
    }
    return w_aug;
}

nlohmann::ordered_json config_json(const SvrConfig& c) {
    return {{"C", c.C},
            {"epsilon", c.epsilon},
            {"tol", c.tol},
            {"max_iter", c.max_iter},
            {"seed", c.seed}};
}

nlohmann::ordered_json config_json(const SvcConfig& c) {
    return {{"C", c.C},
            {"tol", c.tol},
            {"max_iter", c.max_iter},
            {"seed", c.seed}};
}

nlohmann::ordered_json parse_model_json(std::string_view text,
                                        std::string_view expected_kind) {
    nlohmann::ordered_json doc =
        nlohmann::ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) {
        throw MalformedValueError("model record is not valid JSON");
    }
    if (doc.value("kind", "") != expected_kind) {
        throw MalformedValueError("model record is not a '" +
                                  std::string(expected_kind) + "' record");
    }
    return doc;
}

} // namespace

double svr_primal_objective(const FeatureMatrix& X,
                            const std::vector<double>& y,
                            std::span<const double> w, double b, double C,
                            double epsilon) {
    double objective = 0.0;
    for (double v : w) {
        objective += 0.5 * v * v;
    }
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::span<const double> x = X.row(i);
        double pred = b;
        for (std::size_t c = 0; c < x.size(); ++c) {
            pred += x[c] * w[c];
        }
        objective += C * std::max(0.0, std::fabs(pred - y[i]) - epsilon);
    }
    return objective;
}

double svc_primal_objective(const FeatureMatrix& X,
                            const std::vector<int>& signs,
                            std::span<const double> w, double b, double C) {
    double objective = 0.0;
    for (double v : w) {
        objective += 0.5 * v * v;
    }
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::span<const double> x = X.row(i);
        double score = b;
        for (std::size_t c = 0; c < x.size(); ++c) {
            score += x[c] * w[c];
        }
        objective +=
            C * std::max(0.0, 1.0 - static_cast<double>(signs[i]) * score);
    }
    return objective;
}

LinearSvrModel train_linear_svr(const FeatureMatrix& X,
                                const std::vector<double>& y,
                                const SvrConfig& config) {
    if (y.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, y has " +
                                     std::to_string(y.size()));
    }
    if (X.n_rows < 2) {
        throw TooFewRowsError("regression fit needs at least 2 rows");
    }
    if (!(config.C > 0.0) || !(config.epsilon >= 0.0) ||
        !(config.tol > 0.0)) {
        throw OutOfRangeError(
            "regression fit needs C > 0, epsilon >= 0, and tol > 0");
    }
    check_finite(X);
    check_finite(y);

    // Solving against centered targets keeps the internal bias small, which
    // keeps the bias-penalty gap far below tolerance.
    double y_mean = 0.0;
    for (double v : y) {
        y_mean += v;
    }
    y_mean /= static_cast<double>(y.size());
    std::vector<double> centered(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        centered[i] = y[i] - y_mean;
    }

    LinearSvrModel model;
    model.config = config;
    model.feature_names = X.column_names;

    std::function<void(const std::vector<double>&)> on_epoch;
    if (config.record_objective_trace) {
        on_epoch = [&](const std::vector<double>& w_aug) {
            const std::span<const double> w(w_aug.data(), X.n_cols);
            const double b = w_aug[X.n_cols] * kBiasScale + y_mean;
            model.objective_trace.push_back(svr_primal_objective(
                X, y, w, b, config.C, config.epsilon));
        };
    }
    const std::vector<double> w_aug =
        solve_svr_dual(X, centered, config, on_epoch);
    model.weights.assign(w_aug.begin(), w_aug.begin() + X.n_cols);
    model.bias = w_aug[X.n_cols] * kBiasScale + y_mean;
    return model;
}

LinearSvcModel train_linear_svc(const FeatureMatrix& X,
                                const std::vector<std::string>& labels,
                                const SvcConfig& config) {
    if (labels.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, labels has " +
                                     std::to_string(labels.size()));
    }
    if (!(config.C > 0.0) || !(config.tol > 0.0)) {
        throw OutOfRangeError("classification fit needs C > 0 and tol > 0");
    }
    check_finite(X);

    const std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw SingleClassError("classification needs at least 2 classes, got " +
                               std::to_string(distinct.size()));
    }

    LinearSvcModel model;
    model.classes.assign(distinct.begin(), distinct.end());
    model.config = config;
    model.feature_names = X.column_names;

    for (std::size_t k = 0; k < model.classes.size(); ++k) {
        std::vector<int> signs(labels.size());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            signs[i] = labels[i] == model.classes[k] ? 1 : -1;
        }

        std::vector<double> trace;
        std::function<void(const std::vector<double>&)> on_epoch;
        if (config.record_objective_trace) {
            on_epoch = [&](const std::vector<double>& w_aug) {
                const std::span<const double> w(w_aug.data(), X.n_cols);
                const double b = w_aug[X.n_cols] * kBiasScale;
                trace.push_back(
                    svc_primal_objective(X, signs, w, b, config.C));
            };
        }
        const std::vector<double> w_aug = solve_svc_dual(
            X, signs, config, derive_seed(config.seed, k), on_epoch);
        model.weights.emplace_back(w_aug.begin(), w_aug.begin() + X.n_cols);
        model.biases.push_back(w_aug[X.n_cols] * kBiasScale);
        model.objective_traces.push_back(std::move(trace));
    }
    return model;
}

std::vector<double> linear_predict(const LinearSvrModel& model,
                                   const FeatureMatrix& X) {
    if (X.n_cols != model.weights.size()) {
        throw DimensionMismatchError("model expects " +
                                     std::to_string(model.weights.size()) +
                                     " features, matrix has " +
                                     std::to_string(X.n_cols));
    }
    std::vector<double> out(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::span<const double> x = X.row(i);
        double pred = model.bias;
        for (std::size_t c = 0; c < x.size(); ++c) {
            pred += x[c] * model.weights[c];
        }
        out[i] = pred;
    }
    return out;
}

std::vector<std::vector<double>> decision_values(const LinearSvcModel& model,
                                                 const FeatureMatrix& X) {
    if (model.weights.empty() || X.n_cols != model.weights[0].size()) {
        throw DimensionMismatchError(
            "model expects " +
            std::to_string(model.weights.empty() ? 0 : model.weights[0].size()) +
            " features, matrix has " + std::to_string(X.n_cols));
    }
    std::vector<std::vector<double>> out(X.n_rows,
                                         std::vector<double>(model.classes.size()));
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::span<const double> x = X.row(i);
        for (std::size_t k = 0; k < model.classes.size(); ++k) {
            double score = model.biases[k];
            const std::vector<double>& w = model.weights[k];
            for (std::size_t c = 0; c < x.size(); ++c) {
                score += x[c] * w[c];
            }
            out[i][k] = score;
        }
    }
    return out;
}

std::vector<std::string> linear_predict(const LinearSvcModel& model,
                                        const FeatureMatrix& X) {
    const std::vector<std::vector<double>> scores = decision_values(model, X);
    std::vector<std::string> out(X.n_rows);
    for (std::size_t i = 0; i < X.n_rows; ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < scores[i].size(); ++k) {
            if (scores[i][k] > scores[i][best]) {
                best = k;
            }
        }
        out[i] = model.classes[best];
    }
    return out;
}

std::string svr_to_json(const LinearSvrModel& model) {
    nlohmann::ordered_json doc;
    doc["kind"] = "linear_svr";
    doc["weights"] = model.weights;
    doc["bias"] = model.bias;
    doc["config"] = config_json(model.config);
    doc["feature_names"] = model.feature_names;
    return doc.dump(2) + "\n";
}

LinearSvrModel svr_from_json(std::string_view text) {
    const nlohmann::ordered_json doc = parse_model_json(text, "linear_svr");
    LinearSvrModel model;
    try {
        model.weights = doc.at("weights").get<std::vector<double>>();
        model.bias = doc.at("bias").get<double>();
        const auto& c = doc.at("config");
        model.config.C = c.at("C").get<double>();
        model.config.epsilon = c.at("epsilon").get<double>();
        model.config.tol = c.at("tol").get<double>();
        model.config.max_iter = c.at("max_iter").get<std::size_t>();
        model.config.seed = c.at("seed").get<std::uint64_t>();
        model.feature_names =
            doc.at("feature_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedValueError(std::string("bad linear_svr record: ") +
                                  e.what());
    }
    if (model.feature_names.size() != model.weights.size()) {
        throw DimensionMismatchError(
            "linear_svr record: feature_names and weights disagree");
    }
    return model;
}

std::string svc_to_json(const LinearSvcModel& model) {
    nlohmann::ordered_json doc;
    doc["kind"] = "linear_svc";
    doc["classes"] = model.classes;
    doc["weights"] = model.weights;
    doc["biases"] = model.biases;
    doc["config"] = config_json(model.config);
    doc["feature_names"] = model.feature_names;
    return doc.dump(2) + "\n";
}

LinearSvcModel svc_from_json(std::string_view text) {
    const nlohmann::ordered_json doc = parse_model_json(text, "linear_svc");
    LinearSvcModel model;
    try {
        model.classes = doc.at("classes").get<std::vector<std::string>>();
        model.weights =
            doc.at("weights").get<std::vector<std::vector<double>>>();
        model.biases = doc.at("biases").get<std::vector<double>>();
        const auto& c = doc.at("config");
        model.config.C = c.at("C").get<double>();
        model.config.tol = c.at("tol").get<double>();
        model.config.max_iter = c.at("max_iter").get<std::size_t>();
        model.config.seed = c.at("seed").get<std::uint64_t>();
        model.feature_names =
            doc.at("feature_names").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw MalformedValueError(std::string("bad linear_svc record: ") +
                                  e.what());
    }
    if (model.classes.size() != model.weights.size() ||
        model.classes.size() != model.biases.size() || model.classes.empty()) {
        throw DimensionMismatchError(
            "linear_svc record: class, weight, and bias counts disagree");
    }
    for (const std::vector<double>& w : model.weights) {
        if (w.size() != model.feature_names.size()) {
            throw DimensionMismatchError(
                "linear_svc record: weight width and feature_names disagree");
        }
    }
    return model;
}

} // namespace vinispec::svm
