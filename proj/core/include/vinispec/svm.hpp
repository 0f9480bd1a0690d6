#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vinispec/featurize.hpp"

namespace vinispec::svm {

struct SvrConfig {
    double C = 1.0;
    double epsilon = 0.1;
    double tol = 1e-4;
    std::size_t max_iter = 10000; // epochs
    std::uint64_t seed = 0;
    bool record_objective_trace = false;
};

struct SvcConfig {
    double C = 1.0;
    double tol = 1e-4;
    std::size_t max_iter = 10000; // epochs
    std::uint64_t seed = 0;
    bool record_objective_trace = false;
};

struct LinearSvrModel {
    std::vector<double> weights;
    double bias = 0.0;
    SvrConfig config;
    std::vector<std::string> feature_names;
    /// Primal objective before training and after every epoch, when traced.
    std::vector<double> objective_trace;
};

struct LinearSvcModel {
    std::vector<std::string> classes; // lexically sorted
    std::vector<std::vector<double>> weights;
    std::vector<double> biases;
    SvcConfig config;
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> objective_traces; // one per class
};

/// (1/2)‖w‖² + C·Σᵢ max(0, |w·xᵢ + b − yᵢ| − ε)
double svr_primal_objective(const FeatureMatrix& X,
                            const std::vector<double>& y,
                            std::span<const double> w, double b, double C,
                            double epsilon);

/// (1/2)‖w‖² + C·Σᵢ max(0, 1 − sᵢ(w·xᵢ + b)) with signs sᵢ ∈ {−1, +1}
double svc_primal_objective(const FeatureMatrix& X,
                            const std::vector<int>& signs,
                            std::span<const double> w, double b, double C);

/// Dual coordinate descent over the box-constrained dual with a random
/// coordinate permutation per epoch. Deterministic given config.seed.
LinearSvrModel train_linear_svr(const FeatureMatrix& X,
                                const std::vector<double>& y,
                                const SvrConfig& config);

/// One-vs-rest: per class, a binary dual coordinate descent with that class
/// as +1 and the rest as −1. Deterministic given config.seed.
LinearSvcModel train_linear_svc(const FeatureMatrix& X,
                                const std::vector<std::string>& labels,
                                const SvcConfig& config);

std::vector<double> linear_predict(const LinearSvrModel& model,
                                   const FeatureMatrix& X);

/// argmax over class scores; ties broken by class-list order.
std::vector<std::string> linear_predict(const LinearSvcModel& model,
                                        const FeatureMatrix& X);

/// Per-class decision values wₖ·x + bₖ, one row per sample.
std::vector<std::vector<double>> decision_values(const LinearSvcModel& model,
                                                 const FeatureMatrix& X);

std::string svr_to_json(const LinearSvrModel& model);
LinearSvrModel svr_from_json(std::string_view text);
std::string svc_to_json(const LinearSvcModel& model);
LinearSvcModel svc_from_json(std::string_view text);

} // namespace vinispec::svm
