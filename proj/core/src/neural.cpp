#include "vinispec/neural.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <span>
#include <utility>

#include <json.hpp>

#include "vinispec/dataset.hpp"
#include "vinispec/errors.hpp"
#include "vinispec/rng.hpp"

namespace vinispec::neural {

namespace {

constexpr double kAdamEpsilon = 1e-8;
constexpr double kFdStep = 1e-5;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

void check_matrix_finite(const FeatureMatrix& X) {
    for (double v : X.values) {
        if (!std::isfinite(v)) {
            throw NonFiniteError("feature matrix contains a non-finite value");
        }
    }
}

std::size_t mlp_layer_count(Architecture arch) {
    switch (arch) {
    case Architecture::mlp1:
        return 1;
    case Architecture::mlp2:
        return 2;
    case Architecture::mlp3:
        return 3;
    default:
        return 0;
    }
}

bool is_sequence_architecture(Architecture arch) {
    return arch == Architecture::cnn1d || arch == Architecture::lstm ||
           arch == Architecture::bilstm;
}

/// Leading wavelength columns form the sequence; everything after them is
/// head-only. MLPs treat the whole row as dense input.
std::pair<std::size_t, std::size_t>
sequence_split(const std::vector<std::string>& names, Architecture arch) {
    if (!is_sequence_architecture(arch)) {
        return {0, names.size()};
    }
    std::size_t t = 0;
    while (t < names.size() && is_wavelength_column(names[t])) {
        ++t;
    }
    for (std::size_t i = t; i < names.size(); ++i) {
        if (is_wavelength_column(names[i])) {
            throw InvalidSpecError(
                "wavelength columns must be leading and contiguous; found '" +
                names[i] + "' after non-wavelength columns");
        }
    }
    if (t == 0) {
        throw InvalidSpecError(
            "sequence architectures need at least one wavelength column");
    }
    return {t, names.size() - t};
}

struct Dims {
    Architecture arch = Architecture::mlp1;
    std::size_t d = 0;     // total input width
    std::size_t T = 0;     // sequence length (0 for MLPs)
    std::size_t n_aux = 0; // head-only columns
    std::size_t n_out = 1;
    std::size_t layers = 0; // MLP hidden layers
    std::size_t H = 0;      // MLP hidden width
    std::size_t F = 0;      // conv filters
    std::size_t K = 0;      // conv kernel
    std::size_t PW = 0;     // pool width
    std::size_t L = 0;      // conv output length, T - K + 1
    std::size_t P = 0;      // pooled length, L / PW
    std::size_t HL = 0;     // LSTM hidden per direction
};

Dims make_dims(const NetworkConfig& config, std::size_t d, std::size_t T,
               std::size_t n_aux, std::size_t n_out) {
    Dims dims;
    dims.arch = config.architecture;
    dims.d = d;
    dims.T = T;
    dims.n_aux = n_aux;
    dims.n_out = n_out;
    dims.layers = mlp_layer_count(config.architecture);
    dims.H = config.hidden_width;
    dims.HL = config.lstm_hidden;
    if (config.architecture == Architecture::cnn1d) {
        dims.F = config.conv_filters;
        dims.K = config.conv_kernel;
        dims.PW = config.pool_width;
        if (dims.K > T) {
            throw InvalidSpecError("conv kernel " + std::to_string(dims.K) +
                                   " exceeds sequence length " +
                                   std::to_string(T));
        }
        dims.L = T - dims.K + 1;
        dims.P = dims.L / dims.PW;
        if (dims.P == 0) {
            throw InvalidSpecError("max-pool width " + std::to_string(dims.PW) +
                                   " leaves no pooled outputs for sequence "
                                   "length " +
                                   std::to_string(T));
        }
    }
    return dims;
}

std::size_t head_input_width(const Dims& dims) {
    switch (dims.arch) {
    case Architecture::mlp1:
    case Architecture::mlp2:
    case Architecture::mlp3:
        return dims.H;
    case Architecture::cnn1d:
        return dims.F * dims.P + dims.n_aux;
    case Architecture::lstm:
        return dims.HL + dims.n_aux;
    case Architecture::bilstm:
        return 2 * dims.HL + dims.n_aux;
    }
    return 0;
}

struct SliceDef {
    ParamSlice slice;
    std::size_t fan_in = 0;
    std::size_t fan_out = 0;
    bool is_bias = false;
};

std::vector<SliceDef> build_layout(const Dims& dims) {
    std::vector<SliceDef> defs;
    std::size_t offset = 0;
    auto add = [&](std::string name, std::vector<std::size_t> shape,
                   std::size_t fan_in, std::size_t fan_out, bool is_bias) {
        SliceDef def;
        def.slice.name = std::move(name);
        def.slice.offset = offset;
        def.slice.shape = std::move(shape);
        def.fan_in = fan_in;
        def.fan_out = fan_out;
        def.is_bias = is_bias;
        offset += def.slice.size();
        defs.push_back(std::move(def));
    };
    auto add_lstm = [&](const std::string& prefix) {
        add(prefix + ".weight_x", {4 * dims.HL, 1}, 1, 4 * dims.HL, false);
        add(prefix + ".weight_h", {4 * dims.HL, dims.HL}, dims.HL, 4 * dims.HL,
            false);
        add(prefix + ".bias", {4 * dims.HL}, 0, 0, true);
    };

    switch (dims.arch) {
    case Architecture::mlp1:
    case Architecture::mlp2:
    case Architecture::mlp3: {
        std::size_t in = dims.d;
        for (std::size_t l = 1; l <= dims.layers; ++l) {
            add("dense" + std::to_string(l) + ".weight", {dims.H, in}, in,
                dims.H, false);
            add("dense" + std::to_string(l) + ".bias", {dims.H}, 0, 0, true);
            in = dims.H;
        }
        break;
    }
    case Architecture::cnn1d:
        // Glorot fans for a 1-channel conv: in = K, out = F * K.
        add("conv.weight", {dims.F, dims.K}, dims.K, dims.F * dims.K, false);
        add("conv.bias", {dims.F}, 0, 0, true);
        break;
    case Architecture::lstm:
        add_lstm("lstm");
        break;
    case Architecture::bilstm:
        add_lstm("lstm_fwd");
        add_lstm("lstm_bwd");
        break;
    }
    const std::size_t hw = head_input_width(dims);
    add("head.weight", {dims.n_out, hw}, hw, dims.n_out, false);
    add("head.bias", {dims.n_out}, 0, 0, true);
    return defs;
}

void dense_fwd(const double* W, const double* b, const double* x,
               std::size_t in, std::size_t out, double* y) {
    for (std::size_t k = 0; k < out; ++k) {
        double s = b[k];
        const double* row = W + k * in;
        for (std::size_t j = 0; j < in; ++j) {
            s += row[j] * x[j];
        }
        y[k] = s;
    }
}

void dense_bwd_params(const double* x, const double* dy, std::size_t in,
                      std::size_t out, double* dW, double* db) {
    for (std::size_t k = 0; k < out; ++k) {
        db[k] += dy[k];
        double* row = dW + k * in;
        for (std::size_t j = 0; j < in; ++j) {
            row[j] += dy[k] * x[j];
        }
    }
}

void dense_bwd_input(const double* W, const double* dy, std::size_t in,
                     std::size_t out, double* dx) {
    std::fill(dx, dx + in, 0.0);
    for (std::size_t k = 0; k < out; ++k) {
        const double* row = W + k * in;
        for (std::size_t j = 0; j < in; ++j) {
            dx[j] += row[j] * dy[k];
        }
    }
}

/// Per-step gate and state values of one LSTM direction, each T*H flat.
struct LstmTrace {
    std::vector<double> i, f, g, o, c, tc, h;

    void resize(std::size_t n) {
        i.resize(n);
        f.resize(n);
        g.resize(n);
        o.resize(n);
        c.resize(n);
        tc.resize(n);
        h.resize(n);
    }
};

/// Gate order inside the 4H pre-activation block: [input, forget, cell, output].
void lstm_fwd_pass(const double* wx, const double* wh, const double* b,
                   std::span<const double> x, std::size_t T, std::size_t H,
                   bool reverse, LstmTrace& tr) {
    tr.resize(T * H);
    std::vector<double> z(4 * H);
    for (std::size_t t = 0; t < T; ++t) {
        const double xt = x[reverse ? T - 1 - t : t];
        const double* hprev = t > 0 ? &tr.h[(t - 1) * H] : nullptr;
        for (std::size_t k = 0; k < 4 * H; ++k) {
            double s = b[k] + wx[k] * xt;
            if (hprev != nullptr) {
                const double* row = wh + k * H;
                for (std::size_t j = 0; j < H; ++j) {
                    s += row[j] * hprev[j];
                }
            }
            z[k] = s;
        }
        for (std::size_t j = 0; j < H; ++j) {
            const double iv = sigmoid(z[j]);
            const double fv = sigmoid(z[H + j]);
            const double gv = std::tanh(z[2 * H + j]);
            const double ov = sigmoid(z[3 * H + j]);
            const double cprev = t > 0 ? tr.c[(t - 1) * H + j] : 0.0;
            const double cv = fv * cprev + iv * gv;
            const double tcv = std::tanh(cv);
            const std::size_t at = t * H + j;
            tr.i[at] = iv;
            tr.f[at] = fv;
            tr.g[at] = gv;
            tr.o[at] = ov;
            tr.c[at] = cv;
            tr.tc[at] = tcv;
            tr.h[at] = ov * tcv;
        }
    }
}

void lstm_bwd_pass(const double* wh, std::span<const double> x, std::size_t T,
                   std::size_t H, bool reverse, const LstmTrace& tr,
                   const double* dh_final, double* gwx, double* gwh,
                   double* gb) {
    std::vector<double> dh(dh_final, dh_final + H);
    std::vector<double> dc(H, 0.0);
    std::vector<double> dz(4 * H);
    std::vector<double> dh_prev(H);
    for (std::size_t t = T; t-- > 0;) {
        const double xt = x[reverse ? T - 1 - t : t];
        for (std::size_t j = 0; j < H; ++j) {
            const std::size_t at = t * H + j;
            const double iv = tr.i[at];
            const double fv = tr.f[at];
            const double gv = tr.g[at];
            const double ov = tr.o[at];
            const double tcv = tr.tc[at];
            const double cprev = t > 0 ? tr.c[(t - 1) * H + j] : 0.0;
            const double dcj = dc[j] + dh[j] * ov * (1.0 - tcv * tcv);
            dz[3 * H + j] = dh[j] * tcv * ov * (1.0 - ov);
            dz[j] = dcj * gv * iv * (1.0 - iv);
            dz[2 * H + j] = dcj * iv * (1.0 - gv * gv);
            dz[H + j] = dcj * cprev * fv * (1.0 - fv);
            dc[j] = dcj * fv;
        }
        const double* hprev = t > 0 ? &tr.h[(t - 1) * H] : nullptr;
        for (std::size_t k = 0; k < 4 * H; ++k) {
            gwx[k] += dz[k] * xt;
            gb[k] += dz[k];
            if (hprev != nullptr) {
                double* row = gwh + k * H;
                for (std::size_t j = 0; j < H; ++j) {
                    row[j] += dz[k] * hprev[j];
                }
            }
        }
        if (t > 0) {
            for (std::size_t j = 0; j < H; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < 4 * H; ++k) {
                    s += wh[k * H + j] * dz[k];
                }
                dh_prev[j] = s;
            }
            dh = dh_prev;
        }
    }
}

struct Cache {
    std::vector<std::vector<double>> z; // MLP pre-activations per layer
    std::vector<std::vector<double>> a; // MLP activations per layer
    std::vector<double> conv_z;         // F*L pre-activation
    std::vector<std::size_t> arg;       // F*P argmax position in the conv row
    LstmTrace fwd, bwd;
    std::vector<double> head_in;
    std::vector<double> out;
};

class Engine {
  public:
    Engine(const NetworkConfig& config, std::size_t d, std::size_t T,
           std::size_t n_aux, std::size_t n_out)
        : dims_(make_dims(config, d, T, n_aux, n_out)),
          defs_(build_layout(dims_)) {
        total_ = defs_.back().slice.offset + defs_.back().slice.size();
        auto off = [this](std::string_view name) {
            for (const SliceDef& def : defs_) {
                if (def.slice.name == name) {
                    return def.slice.offset;
                }
            }
            throw MalformedValueError("missing parameter slice '" +
                                      std::string(name) + "'");
        };
        switch (dims_.arch) {
        case Architecture::mlp1:
        case Architecture::mlp2:
        case Architecture::mlp3:
            for (std::size_t l = 1; l <= dims_.layers; ++l) {
                w_off_.push_back(off("dense" + std::to_string(l) + ".weight"));
                b_off_.push_back(off("dense" + std::to_string(l) + ".bias"));
            }
            break;
        case Architecture::cnn1d:
            conv_w_ = off("conv.weight");
            conv_b_ = off("conv.bias");
            break;
        case Architecture::lstm:
            fwx_ = off("lstm.weight_x");
            fwh_ = off("lstm.weight_h");
            fb_ = off("lstm.bias");
            break;
        case Architecture::bilstm:
            fwx_ = off("lstm_fwd.weight_x");
            fwh_ = off("lstm_fwd.weight_h");
            fb_ = off("lstm_fwd.bias");
            bwx_ = off("lstm_bwd.weight_x");
            bwh_ = off("lstm_bwd.weight_h");
            bb_ = off("lstm_bwd.bias");
            break;
        }
        head_w_ = off("head.weight");
        head_b_ = off("head.bias");
    }

    const Dims& dims() const { return dims_; }
    const std::vector<SliceDef>& defs() const { return defs_; }
    std::size_t param_count() const { return total_; }

    void forward(std::span<const double> x, const double* p, Cache& c) const {
        const std::size_t hw = head_input_width(dims_);
        c.head_in.resize(hw);
        switch (dims_.arch) {
        case Architecture::mlp1:
        case Architecture::mlp2:
        case Architecture::mlp3: {
            c.z.resize(dims_.layers);
            c.a.resize(dims_.layers);
            const double* cur = x.data();
            std::size_t cur_n = dims_.d;
            for (std::size_t l = 0; l < dims_.layers; ++l) {
                c.z[l].resize(dims_.H);
                c.a[l].resize(dims_.H);
                dense_fwd(p + w_off_[l], p + b_off_[l], cur, cur_n, dims_.H,
                          c.z[l].data());
                for (std::size_t j = 0; j < dims_.H; ++j) {
                    c.a[l][j] = std::max(c.z[l][j], 0.0);
                }
                cur = c.a[l].data();
                cur_n = dims_.H;
            }
            std::copy(cur, cur + cur_n, c.head_in.begin());
            break;
        }
        case Architecture::cnn1d: {
            const std::size_t F = dims_.F;
            const std::size_t K = dims_.K;
            const std::size_t L = dims_.L;
            const std::size_t P = dims_.P;
            c.conv_z.resize(F * L);
            c.arg.resize(F * P);
            const double* W = p + conv_w_;
            const double* b = p + conv_b_;
            for (std::size_t f = 0; f < F; ++f) {
                for (std::size_t pos = 0; pos < L; ++pos) {
                    double s = b[f];
                    for (std::size_t k = 0; k < K; ++k) {
                        s += W[f * K + k] * x[pos + k];
                    }
                    c.conv_z[f * L + pos] = s;
                }
                // ReLU then max-pool; ties keep the earliest position.
                for (std::size_t q = 0; q < P; ++q) {
                    double best = -1.0;
                    std::size_t best_pos = q * dims_.PW;
                    for (std::size_t u = 0; u < dims_.PW; ++u) {
                        const std::size_t pos = q * dims_.PW + u;
                        const double v = std::max(c.conv_z[f * L + pos], 0.0);
                        if (u == 0 || v > best) {
                            best = v;
                            best_pos = pos;
                        }
                    }
                    c.head_in[f * P + q] = best;
                    c.arg[f * P + q] = best_pos;
                }
            }
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(dims_.T), x.end(),
                      c.head_in.begin() + static_cast<std::ptrdiff_t>(F * P));
            break;
        }
        case Architecture::lstm: {
            lstm_fwd_pass(p + fwx_, p + fwh_, p + fb_, x.first(dims_.T),
                          dims_.T, dims_.HL, false, c.fwd);
            std::copy_n(&c.fwd.h[(dims_.T - 1) * dims_.HL], dims_.HL,
                        c.head_in.begin());
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(dims_.T), x.end(),
                      c.head_in.begin() + static_cast<std::ptrdiff_t>(dims_.HL));
            break;
        }
        case Architecture::bilstm: {
            lstm_fwd_pass(p + fwx_, p + fwh_, p + fb_, x.first(dims_.T),
                          dims_.T, dims_.HL, false, c.fwd);
            lstm_fwd_pass(p + bwx_, p + bwh_, p + bb_, x.first(dims_.T),
                          dims_.T, dims_.HL, true, c.bwd);
            std::copy_n(&c.fwd.h[(dims_.T - 1) * dims_.HL], dims_.HL,
                        c.head_in.begin());
            std::copy_n(&c.bwd.h[(dims_.T - 1) * dims_.HL], dims_.HL,
                        c.head_in.begin() + static_cast<std::ptrdiff_t>(dims_.HL));
            std::copy(x.begin() + static_cast<std::ptrdiff_t>(dims_.T), x.end(),
                      c.head_in.begin() +
                          static_cast<std::ptrdiff_t>(2 * dims_.HL));
            break;
        }
        }
        c.out.resize(dims_.n_out);
        dense_fwd(p + head_w_, p + head_b_, c.head_in.data(), hw, dims_.n_out,
                  c.out.data());
    }

    void backward(std::span<const double> x, const double* p, const Cache& c,
                  const double* dout, double* grad) const {
        const std::size_t hw = head_input_width(dims_);
        dense_bwd_params(c.head_in.data(), dout, hw, dims_.n_out,
                         grad + head_w_, grad + head_b_);
        std::vector<double> dhead(hw);
        dense_bwd_input(p + head_w_, dout, hw, dims_.n_out, dhead.data());
        switch (dims_.arch) {
        case Architecture::mlp1:
        case Architecture::mlp2:
        case Architecture::mlp3: {
            std::vector<double> dcur = std::move(dhead);
            std::vector<double> dz(dims_.H);
            std::vector<double> dprev;
            for (std::size_t l = dims_.layers; l-- > 0;) {
                for (std::size_t j = 0; j < dims_.H; ++j) {
                    dz[j] = c.z[l][j] > 0.0 ? dcur[j] : 0.0;
                }
                const double* prev = l > 0 ? c.a[l - 1].data() : x.data();
                const std::size_t prev_n = l > 0 ? dims_.H : dims_.d;
                dense_bwd_params(prev, dz.data(), prev_n, dims_.H,
                                 grad + w_off_[l], grad + b_off_[l]);
                if (l > 0) {
                    dprev.resize(prev_n);
                    dense_bwd_input(p + w_off_[l], dz.data(), prev_n, dims_.H,
                                    dprev.data());
                    std::swap(dcur, dprev);
                }
            }
            break;
        }
        case Architecture::cnn1d: {
            const std::size_t F = dims_.F;
            const std::size_t K = dims_.K;
            const std::size_t L = dims_.L;
            const std::size_t P = dims_.P;
            const double* W = p + conv_w_;
            std::vector<double> dz(F * L, 0.0);
            for (std::size_t f = 0; f < F; ++f) {
                for (std::size_t q = 0; q < P; ++q) {
                    const std::size_t pos = c.arg[f * P + q];
                    if (c.conv_z[f * L + pos] > 0.0) {
                        dz[f * L + pos] += dhead[f * P + q];
                    }
                }
            }
            for (std::size_t f = 0; f < F; ++f) {
                for (std::size_t pos = 0; pos < L; ++pos) {
                    const double gz = dz[f * L + pos];
                    if (gz == 0.0) {
                        continue;
                    }
                    grad[conv_b_ + f] += gz;
                    for (std::size_t k = 0; k < K; ++k) {
                        grad[conv_w_ + f * K + k] += gz * x[pos + k];
                    }
                }
            }
            break;
        }
        case Architecture::lstm:
            lstm_bwd_pass(p + fwh_, x.first(dims_.T), dims_.T, dims_.HL, false,
                          c.fwd, dhead.data(), grad + fwx_, grad + fwh_,
                          grad + fb_);
            break;
        case Architecture::bilstm:
            lstm_bwd_pass(p + fwh_, x.first(dims_.T), dims_.T, dims_.HL, false,
                          c.fwd, dhead.data(), grad + fwx_, grad + fwh_,
                          grad + fb_);
            lstm_bwd_pass(p + bwh_, x.first(dims_.T), dims_.T, dims_.HL, true,
                          c.bwd, dhead.data() + dims_.HL, grad + bwx_,
                          grad + bwh_, grad + bb_);
            break;
        }
    }

  private:
    Dims dims_;
    std::vector<SliceDef> defs_;
    std::size_t total_ = 0;
    std::vector<std::size_t> w_off_, b_off_; // MLP layers
    std::size_t conv_w_ = 0, conv_b_ = 0;
    std::size_t fwx_ = 0, fwh_ = 0, fb_ = 0;
    std::size_t bwx_ = 0, bwh_ = 0, bb_ = 0;
    std::size_t head_w_ = 0, head_b_ = 0;
};

Engine engine_for(const NetworkModel& model) {
    const std::size_t n_out =
        model.head == HeadKind::softmax ? model.classes.size() : 1;
    Engine engine(model.config, model.feature_names.size(), model.n_sequence,
                  model.n_aux, n_out);
    if (model.params.size() != engine.param_count()) {
        throw DimensionMismatchError(
            "parameter vector has " + std::to_string(model.params.size()) +
            " values, architecture needs " +
            std::to_string(engine.param_count()));
    }
    return engine;
}

void check_input_width(const NetworkModel& model, const FeatureMatrix& X) {
    if (X.n_cols != model.feature_names.size()) {
        throw DimensionMismatchError(
            "model expects " + std::to_string(model.feature_names.size()) +
            " features, matrix has " + std::to_string(X.n_cols));
    }
}

NetworkModel init_network(const FeatureMatrix& X, HeadKind head,
                          std::vector<std::string> classes,
                          const NetworkConfig& config) {
    validate_network_config(config);
    const auto [T, n_aux] = sequence_split(X.column_names, config.architecture);
    const std::size_t n_out = head == HeadKind::softmax ? classes.size() : 1;
    Engine engine(config, X.n_cols, T, n_aux, n_out);

    NetworkModel model;
    model.config = config;
    model.head = head;
    model.classes = std::move(classes);
    model.feature_names = X.column_names;
    model.n_sequence = T;
    model.n_aux = n_aux;
    model.params.assign(engine.param_count(), 0.0);
    Rng rng(derive_seed(config.seed, 0));
    for (const SliceDef& def : engine.defs()) {
        model.slices.push_back(def.slice);
        if (def.is_bias) {
            continue;
        }
        const double limit = std::sqrt(
            6.0 / static_cast<double>(def.fan_in + def.fan_out));
        for (std::size_t i = 0; i < def.slice.size(); ++i) {
            model.params[def.slice.offset + i] = rng.uniform(-limit, limit);
        }
    }
    return model;
}

/// Exactly one of reg / cls is set; cls holds indices into the class list.
struct Targets {
    const std::vector<double>* reg = nullptr;
    const std::vector<int>* cls = nullptr;
};

/// Loss of one sample plus d(loss)/d(out) scaled by inv_batch.
double sample_loss(HeadKind head, const double* out, std::size_t n_out,
                   const Targets& targets, std::size_t row, double inv_batch,
                   double* dout) {
    if (head == HeadKind::linear) {
        const double r = out[0] - (*targets.reg)[row];
        dout[0] = 2.0 * r * inv_batch;
        return r * r;
    }
    const int want = (*targets.cls)[row];
    double zmax = out[0];
    for (std::size_t k = 1; k < n_out; ++k) {
        zmax = std::max(zmax, out[k]);
    }
    double denom = 0.0;
    for (std::size_t k = 0; k < n_out; ++k) {
        denom += std::exp(out[k] - zmax);
    }
    for (std::size_t k = 0; k < n_out; ++k) {
        const double pk = std::exp(out[k] - zmax) / denom;
        dout[k] =
            (pk - (static_cast<int>(k) == want ? 1.0 : 0.0)) * inv_batch;
    }
    return zmax + std::log(denom) - out[static_cast<std::size_t>(want)];
}

/// Mean loss over all rows; accumulates the mean-loss gradient when grad
/// is non-null (grad must be zeroed by the caller).
double loss_over(const NetworkModel& model, const Engine& engine,
                 const FeatureMatrix& X, const Targets& targets,
                 double* grad) {
    const std::size_t n_out = engine.dims().n_out;
    const double inv = 1.0 / static_cast<double>(X.n_rows);
    Cache cache;
    std::vector<double> dout(n_out);
    double total = 0.0;
    for (std::size_t r = 0; r < X.n_rows; ++r) {
        engine.forward(X.row(r), model.params.data(), cache);
        total += sample_loss(model.head, cache.out.data(), n_out, targets, r,
                             inv, dout.data());
        if (grad != nullptr) {
            engine.backward(X.row(r), model.params.data(), cache, dout.data(),
                            grad);
        }
    }
    return total * inv;
}

void check_targets(const FeatureMatrix& X, const std::vector<double>& y) {
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
}

std::pair<std::vector<std::string>, std::vector<int>>
index_labels(const FeatureMatrix& X, const std::vector<std::string>& labels) {
    if (labels.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, labels has " +
                                     std::to_string(labels.size()));
    }
    const std::set<std::string> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) {
        throw SingleClassError(
            "classification needs at least 2 distinct classes, got " +
            std::to_string(distinct.size()));
    }
    std::vector<std::string> classes(distinct.begin(), distinct.end());
    std::vector<int> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        indices[i] = static_cast<int>(
            std::lower_bound(classes.begin(), classes.end(), labels[i]) -
            classes.begin());
    }
    return {std::move(classes), std::move(indices)};
}

NetworkModel train_impl(const FeatureMatrix& X, const Targets& targets,
                        std::vector<std::string> classes, HeadKind head,
                        const NetworkConfig& config) {
    if (X.n_rows == 0) {
        throw TooFewRowsError("network fit needs at least 1 row");
    }
    check_matrix_finite(X);
    NetworkModel model = init_network(X, head, std::move(classes), config);
    const Engine engine = engine_for(model);
    const std::size_t n = X.n_rows;
    const std::size_t n_out = engine.dims().n_out;
    const std::size_t n_params = model.params.size();

    std::vector<double> grad(n_params);
    std::vector<double> m1(n_params, 0.0);
    std::vector<double> m2(n_params, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, 1));
    Cache cache;
    std::vector<double> dout(n_out);
    std::size_t step = 0;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t bsz = std::min(config.batch_size, n - start);
            const double inv_b = 1.0 / static_cast<double>(bsz);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t u = 0; u < bsz; ++u) {
                const std::size_t row = order[start + u];
                engine.forward(X.row(row), model.params.data(), cache);
                loss_sum += sample_loss(model.head, cache.out.data(), n_out,
                                        targets, row, inv_b, dout.data());
                engine.backward(X.row(row), model.params.data(), cache,
                                dout.data(), grad.data());
            }
            ++step;
            const double bc1 =
                1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bc2 =
                1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t i = 0; i < n_params; ++i) {
                m1[i] = config.beta1 * m1[i] + (1.0 - config.beta1) * grad[i];
                m2[i] = config.beta2 * m2[i] +
                        (1.0 - config.beta2) * grad[i] * grad[i];
                model.params[i] -= config.learning_rate * (m1[i] / bc1) /
                                   (std::sqrt(m2[i] / bc2) + kAdamEpsilon);
            }
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        model.loss_history.push_back(epoch_loss);
        if (!std::isfinite(epoch_loss)) {
            throw DivergedLossError("training loss became non-finite at epoch " +
                                    std::to_string(epoch + 1));
        }
    }
    for (double v : model.params) {
        if (!std::isfinite(v)) {
            throw DivergedLossError("parameters became non-finite in training");
        }
    }
    return model;
}

double gradient_check_impl(const NetworkModel& model, const FeatureMatrix& X,
                           const Targets& targets) {
    const Engine engine = engine_for(model);
    std::vector<double> analytic(model.params.size(), 0.0);
    loss_over(model, engine, X, targets, analytic.data());

    NetworkModel probe = model;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < probe.params.size(); ++i) {
        const double saved = probe.params[i];
        probe.params[i] = saved + kFdStep;
        const double lp = loss_over(probe, engine, X, targets, nullptr);
        probe.params[i] = saved - kFdStep;
        const double lm = loss_over(probe, engine, X, targets, nullptr);
        probe.params[i] = saved;
        const double gfd = (lp - lm) / (2.0 * kFdStep);
        const double rel =
            std::abs(analytic[i] - gfd) /
            std::max(1e-8, std::abs(analytic[i]) + std::abs(gfd));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

} // namespace

Architecture parse_architecture(std::string_view name) {
    if (name == "mlp1") return Architecture::mlp1;
    if (name == "mlp2") return Architecture::mlp2;
    if (name == "mlp3") return Architecture::mlp3;
    if (name == "cnn1d") return Architecture::cnn1d;
    if (name == "lstm") return Architecture::lstm;
    if (name == "bilstm") return Architecture::bilstm;
    throw InvalidSpecError("unknown architecture '" + std::string(name) +
                           "'; expected one of mlp1, mlp2, mlp3, cnn1d, "
                           "lstm, bilstm");
}

std::string_view architecture_name(Architecture arch) {
    switch (arch) {
    case Architecture::mlp1:
        return "mlp1";
    case Architecture::mlp2:
        return "mlp2";
    case Architecture::mlp3:
        return "mlp3";
    case Architecture::cnn1d:
        return "cnn1d";
    case Architecture::lstm:
        return "lstm";
    case Architecture::bilstm:
        return "bilstm";
    }
    return "";
}

void validate_network_config(const NetworkConfig& config) {
    if (config.hidden_width == 0 || config.conv_filters == 0 ||
        config.conv_kernel == 0 || config.pool_width == 0 ||
        config.lstm_hidden == 0) {
        throw InvalidSpecError("network widths, kernel, and pool must be >= 1");
    }
    if (config.batch_size == 0) {
        throw InvalidSpecError("batch size must be >= 1");
    }
    if (!(config.learning_rate > 0.0) ||
        !std::isfinite(config.learning_rate)) {
        throw InvalidSpecError("learning rate must be positive and finite");
    }
    if (!(config.beta1 > 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 > 0.0 && config.beta2 < 1.0)) {
        throw InvalidSpecError("Adam betas must lie in (0, 1)");
    }
}

std::size_t ParamSlice::size() const {
    std::size_t n = 1;
    for (std::size_t s : shape) {
        n *= s;
    }
    return shape.empty() ? 0 : n;
}

const ParamSlice& find_slice(const NetworkModel& model,
                             std::string_view name) {
    for (const ParamSlice& slice : model.slices) {
        if (slice.name == name) {
            return slice;
        }
    }
    throw MalformedValueError("no parameter slice named '" +
                              std::string(name) + "'");
}

NetworkModel train_network(const FeatureMatrix& X, const std::vector<double>& y,
                           const NetworkConfig& config) {
    check_targets(X, y);
    Targets targets;
    targets.reg = &y;
    return train_impl(X, targets, {}, HeadKind::linear, config);
}

NetworkModel train_network(const FeatureMatrix& X,
                           const std::vector<std::string>& labels,
                           const NetworkConfig& config) {
    auto [classes, indices] = index_labels(X, labels);
    Targets targets;
    targets.cls = &indices;
    return train_impl(X, targets, std::move(classes), HeadKind::softmax,
                      config);
}

std::vector<double> network_predict(const NetworkModel& model,
                                    const FeatureMatrix& X) {
    if (model.head != HeadKind::linear) {
        throw InvalidSpecError("network_predict requires a linear-head model");
    }
    check_input_width(model, X);
    const Engine engine = engine_for(model);
    Cache cache;
    std::vector<double> out(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r) {
        engine.forward(X.row(r), model.params.data(), cache);
        out[r] = cache.out[0];
    }
    return out;
}

std::vector<std::string> network_predict_classes(const NetworkModel& model,
                                                 const FeatureMatrix& X) {
    if (model.head != HeadKind::softmax) {
        throw InvalidSpecError(
            "network_predict_classes requires a softmax-head model");
    }
    check_input_width(model, X);
    const Engine engine = engine_for(model);
    Cache cache;
    std::vector<std::string> out(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r) {
        engine.forward(X.row(r), model.params.data(), cache);
        std::size_t best = 0;
        for (std::size_t k = 1; k < cache.out.size(); ++k) {
            if (cache.out[k] > cache.out[best]) {
                best = k;
            }
        }
        out[r] = model.classes[best];
    }
    return out;
}

std::vector<std::vector<double>> network_scores(const NetworkModel& model,
                                                const FeatureMatrix& X) {
    check_input_width(model, X);
    const Engine engine = engine_for(model);
    Cache cache;
    std::vector<std::vector<double>> out(X.n_rows);
    for (std::size_t r = 0; r < X.n_rows; ++r) {
        engine.forward(X.row(r), model.params.data(), cache);
        std::vector<double> row = cache.out;
        if (model.head == HeadKind::softmax) {
            double zmax = row[0];
            for (double v : row) {
                zmax = std::max(zmax, v);
            }
            double denom = 0.0;
            for (double& v : row) {
                v = std::exp(v - zmax);
                denom += v;
            }
            for (double& v : row) {
                v /= denom;
            }
        }
        out[r] = std::move(row);
    }
    return out;
}

double network_loss(const NetworkModel& model, const FeatureMatrix& X,
                    const std::vector<double>& y) {
    if (model.head != HeadKind::linear) {
        throw InvalidSpecError("regression loss requires a linear-head model");
    }
    check_input_width(model, X);
    check_targets(X, y);
    if (X.n_rows == 0) {
        throw TooFewRowsError("loss needs at least 1 row");
    }
    Targets targets;
    targets.reg = &y;
    return loss_over(model, engine_for(model), X, targets, nullptr);
}

double network_loss(const NetworkModel& model, const FeatureMatrix& X,
                    const std::vector<std::string>& labels) {
    if (model.head != HeadKind::softmax) {
        throw InvalidSpecError(
            "classification loss requires a softmax-head model");
    }
    check_input_width(model, X);
    if (labels.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, labels has " +
                                     std::to_string(labels.size()));
    }
    if (X.n_rows == 0) {
        throw TooFewRowsError("loss needs at least 1 row");
    }
    std::vector<int> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(model.classes.begin(),
                                         model.classes.end(), labels[i]);
        if (it == model.classes.end() || *it != labels[i]) {
            throw MissingLabelError("label '" + labels[i] +
                                    "' is not one of the model's classes");
        }
        indices[i] = static_cast<int>(it - model.classes.begin());
    }
    Targets targets;
    targets.cls = &indices;
    return loss_over(model, engine_for(model), X, targets, nullptr);
}

std::vector<double> network_loss_gradient(const NetworkModel& model,
                                          const FeatureMatrix& X,
                                          const std::vector<double>& y) {
    if (model.head != HeadKind::linear) {
        throw InvalidSpecError("regression loss requires a linear-head model");
    }
    check_input_width(model, X);
    check_targets(X, y);
    if (X.n_rows == 0) {
        throw TooFewRowsError("loss needs at least 1 row");
    }
    Targets targets;
    targets.reg = &y;
    std::vector<double> grad(model.params.size(), 0.0);
    loss_over(model, engine_for(model), X, targets, grad.data());
    return grad;
}

std::vector<double> network_loss_gradient(const NetworkModel& model,
                                          const FeatureMatrix& X,
                                          const std::vector<std::string>& labels) {
    if (model.head != HeadKind::softmax) {
        throw InvalidSpecError(
            "classification loss requires a softmax-head model");
    }
    check_input_width(model, X);
    if (labels.size() != X.n_rows) {
        throw DimensionMismatchError("X has " + std::to_string(X.n_rows) +
                                     " rows, labels has " +
                                     std::to_string(labels.size()));
    }
    if (X.n_rows == 0) {
        throw TooFewRowsError("loss needs at least 1 row");
    }
    std::vector<int> indices(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto it = std::lower_bound(model.classes.begin(),
                                         model.classes.end(), labels[i]);
        if (it == model.classes.end() || *it != labels[i]) {
            throw MissingLabelError("label '" + labels[i] +
                                    "' is not one of the model's classes");
        }
        indices[i] = static_cast<int>(it - model.classes.begin());
    }
    Targets targets;
    targets.cls = &indices;
    std::vector<double> grad(model.params.size(), 0.0);
    loss_over(model, engine_for(model), X, targets, grad.data());
    return grad;
}

double gradient_check(const NetworkConfig& config, const FeatureMatrix& X,
                      const std::vector<double>& y) {
    check_targets(X, y);
    if (X.n_rows == 0) {
        throw TooFewRowsError("gradient check needs at least 1 row");
    }
    check_matrix_finite(X);
    NetworkModel model = init_network(X, HeadKind::linear, {}, config);
    Targets targets;
    targets.reg = &y;
    return gradient_check_impl(model, X, targets);
}

double gradient_check(const NetworkConfig& config, const FeatureMatrix& X,
                      const std::vector<std::string>& labels) {
    check_matrix_finite(X);
    auto [classes, indices] = index_labels(X, labels);
    NetworkModel model =
        init_network(X, HeadKind::softmax, std::move(classes), config);
    Targets targets;
    targets.cls = &indices;
    return gradient_check_impl(model, X, targets);
}

std::string network_to_json(const NetworkModel& model) {
    nlohmann::ordered_json doc;
    doc["kind"] = "network";
    doc["architecture"] = architecture_name(model.config.architecture);
    doc["head"] = model.head == HeadKind::linear ? "linear" : "softmax";
    doc["classes"] = model.classes;
    doc["feature_names"] = model.feature_names;
    doc["n_sequence"] = model.n_sequence;
    doc["n_aux"] = model.n_aux;
    doc["config"] = {{"hidden_width", model.config.hidden_width},
                     {"conv_filters", model.config.conv_filters},
                     {"conv_kernel", model.config.conv_kernel},
                     {"pool_width", model.config.pool_width},
                     {"lstm_hidden", model.config.lstm_hidden},
                     {"learning_rate", model.config.learning_rate},
                     {"beta1", model.config.beta1},
                     {"beta2", model.config.beta2},
                     {"epochs", model.config.epochs},
                     {"batch_size", model.config.batch_size},
                     {"seed", model.config.seed}};
    nlohmann::ordered_json parameters = nlohmann::ordered_json::array();
    for (const ParamSlice& slice : model.slices) {
        nlohmann::ordered_json entry;
        entry["name"] = slice.name;
        entry["shape"] = slice.shape;
        entry["values"] = std::vector<double>(
            model.params.begin() + static_cast<std::ptrdiff_t>(slice.offset),
            model.params.begin() +
                static_cast<std::ptrdiff_t>(slice.offset + slice.size()));
        parameters.push_back(std::move(entry));
    }
    doc["parameters"] = std::move(parameters);
    return doc.dump() + "\n";
}

NetworkModel network_from_json(std::string_view text) {
    nlohmann::ordered_json doc =
        nlohmann::ordered_json::parse(text, nullptr, false);
    if (doc.is_discarded() || !doc.is_object() ||
        doc.value("kind", "") != "network") {
        throw MalformedValueError("model record is not a 'network' record");
    }
    NetworkModel model;
    try {
        model.config.architecture =
            parse_architecture(doc.at("architecture").get<std::string>());
        model.head = doc.at("head").get<std::string>() == "softmax"
                         ? HeadKind::softmax
                         : HeadKind::linear;
        model.classes = doc.at("classes").get<std::vector<std::string>>();
        model.feature_names =
            doc.at("feature_names").get<std::vector<std::string>>();
        model.n_sequence = doc.at("n_sequence").get<std::size_t>();
        model.n_aux = doc.at("n_aux").get<std::size_t>();
        const auto& c = doc.at("config");
        model.config.hidden_width = c.at("hidden_width").get<std::size_t>();
        model.config.conv_filters = c.at("conv_filters").get<std::size_t>();
        model.config.conv_kernel = c.at("conv_kernel").get<std::size_t>();
        model.config.pool_width = c.at("pool_width").get<std::size_t>();
        model.config.lstm_hidden = c.at("lstm_hidden").get<std::size_t>();
        model.config.learning_rate = c.at("learning_rate").get<double>();
        model.config.beta1 = c.at("beta1").get<double>();
        model.config.beta2 = c.at("beta2").get<double>();
        model.config.epochs = c.at("epochs").get<std::size_t>();
        model.config.batch_size = c.at("batch_size").get<std::size_t>();
        model.config.seed = c.at("seed").get<std::uint64_t>();

        if (model.n_sequence + model.n_aux != model.feature_names.size()) {
            throw DimensionMismatchError(
                "n_sequence + n_aux must equal the feature count");
        }
        const std::size_t n_out =
            model.head == HeadKind::softmax ? model.classes.size() : 1;
        const Engine engine(model.config, model.feature_names.size(),
                            model.n_sequence, model.n_aux, n_out);
        model.params.assign(engine.param_count(), 0.0);
        const auto& parameters = doc.at("parameters");
        if (parameters.size() != engine.defs().size()) {
            throw DimensionMismatchError(
                "record has " + std::to_string(parameters.size()) +
                " parameter tensors, architecture needs " +
                std::to_string(engine.defs().size()));
        }
        for (std::size_t i = 0; i < engine.defs().size(); ++i) {
            const ParamSlice& expect = engine.defs()[i].slice;
            const auto& entry = parameters.at(i);
            if (entry.at("name").get<std::string>() != expect.name ||
                entry.at("shape").get<std::vector<std::size_t>>() !=
                    expect.shape) {
                throw DimensionMismatchError(
                    "parameter tensor " + std::to_string(i) +
                    " does not match the architecture layout (expected '" +
                    expect.name + "')");
            }
            const auto values = entry.at("values").get<std::vector<double>>();
            if (values.size() != expect.size()) {
                throw DimensionMismatchError("parameter tensor '" +
                                             expect.name +
                                             "' has the wrong element count");
            }
            std::copy(values.begin(), values.end(),
                      model.params.begin() +
                          static_cast<std::ptrdiff_t>(expect.offset));
            model.slices.push_back(expect);
        }
    } catch (const nlohmann::json::exception& e) {
        throw MalformedValueError(std::string("bad network record: ") +
                                  e.what());
    }
    return model;
}

} // namespace vinispec::neural
