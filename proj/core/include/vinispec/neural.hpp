#pragma once
// Trainable networks over feature rows: multilayer perceptrons with one to
// three hidden layers, a one-dimensional convolutional net, and one- or
// two-direction LSTMs. Backpropagation is hand-derived per layer type and
// verified against central finite differences by gradient_check.
//
// Sequence architectures (cnn1d, lstm, bilstm) read the leading wavelength
// columns as a single-channel sequence in ascending wavelength order; any
// remaining columns bypass the encoder and enter the dense head directly.

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "vinispec/featurize.hpp"

namespace vinispec::neural {

enum class Architecture { mlp1, mlp2, mlp3, cnn1d, lstm, bilstm };

/// Throws InvalidSpec on an unknown name.
Architecture parse_architecture(std::string_view name);
std::string_view architecture_name(Architecture arch);

struct NetworkConfig {
    Architecture architecture = Architecture::mlp1;
    std::size_t hidden_width = 64; // each MLP hidden layer
    std::size_t conv_filters = 8;
    std::size_t conv_kernel = 7;
    std::size_t pool_width = 2;
    std::size_t lstm_hidden = 32; // per direction
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::size_t epochs = 200;
    std::size_t batch_size = 16;
    std::uint64_t seed = 0;
};

/// Throws InvalidSpec when a width, kernel, pool, batch size, or learning
/// rate is not positive or a beta lies outside (0, 1). epochs may be 0,
/// which keeps the freshly initialized parameters.
void validate_network_config(const NetworkConfig& config);

enum class HeadKind { linear, softmax };

/// One named parameter tensor stored as a slice of the flat vector.
/// Matrices are row-major with shape {rows, cols}; biases have shape {n}.
struct ParamSlice {
    std::string name;
    std::size_t offset = 0;
    std::vector<std::size_t> shape;

    std::size_t size() const;
};

struct NetworkModel {
    NetworkConfig config;
    HeadKind head = HeadKind::linear;
    std::vector<std::string> classes; // softmax head, lexicographic
    std::vector<std::string> feature_names;
    std::size_t n_sequence = 0; // leading wavelength columns
    std::size_t n_aux = 0;      // columns fed straight to the head
    std::vector<double> params;
    std::vector<ParamSlice> slices;
    std::vector<double> loss_history; // mean loss per epoch; not persisted
};

/// Slice lookup by name. Throws MalformedValue when absent.
const ParamSlice& find_slice(const NetworkModel& model, std::string_view name);

/// Glorot-uniform init, then mean squared error minimized by mini-batch
/// Adam for the configured epochs. Deterministic from config.seed.
NetworkModel train_network(const FeatureMatrix& X, const std::vector<double>& y,
                           const NetworkConfig& config);

/// Softmax cross-entropy counterpart; classes are the sorted distinct labels.
NetworkModel train_network(const FeatureMatrix& X,
                           const std::vector<std::string>& labels,
                           const NetworkConfig& config);

/// Forward pass of a linear-head model.
std::vector<double> network_predict(const NetworkModel& model,
                                    const FeatureMatrix& X);

/// Argmax of softmax scores; ties resolve to the earlier class.
std::vector<std::string> network_predict_classes(const NetworkModel& model,
                                                 const FeatureMatrix& X);

/// Head outputs per row; softmax-normalized for classification heads.
std::vector<std::vector<double>> network_scores(const NetworkModel& model,
                                                const FeatureMatrix& X);

/// Mean training loss of the model's current parameters on (X, y).
double network_loss(const NetworkModel& model, const FeatureMatrix& X,
                    const std::vector<double>& y);
double network_loss(const NetworkModel& model, const FeatureMatrix& X,
                    const std::vector<std::string>& labels);

/// Analytic gradient of network_loss with respect to every parameter.
std::vector<double> network_loss_gradient(const NetworkModel& model,
                                          const FeatureMatrix& X,
                                          const std::vector<double>& y);
std::vector<double> network_loss_gradient(const NetworkModel& model,
                                          const FeatureMatrix& X,
                                          const std::vector<std::string>& labels);

/// Max over parameters of |g_analytic - g_fd| / max(1e-8, |g_a| + |g_fd|),
/// central differences with step 1e-5 at freshly initialized parameters.
double gradient_check(const NetworkConfig& config, const FeatureMatrix& X,
                      const std::vector<double>& y);
double gradient_check(const NetworkConfig& config, const FeatureMatrix& X,
                      const std::vector<std::string>& labels);

std::string network_to_json(const NetworkModel& model);
NetworkModel network_from_json(std::string_view text);

} // namespace vinispec::neural
