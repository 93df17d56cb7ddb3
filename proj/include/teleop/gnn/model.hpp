#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "teleop/gnn/gcn.hpp"
#include "teleop/gnn/tensor.hpp"

namespace teleop::gnn {

inline constexpr int kNumLayers = 3;

struct ModelConfig {
    int hidden = 128;
    double dropout = 0.3;
    double leaky_slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

template <typename Scalar>
struct GcnLayerParams {
    Matrix<Scalar> weight;  ///< in x out
    RowVector<Scalar> bias;
};

template <typename Scalar>
struct BatchNormParams {
    RowVector<Scalar> scale;
    RowVector<Scalar> shift;
    RowVector<Scalar> running_mean;
    RowVector<Scalar> running_var;
};

/// Three GCN blocks (conv, batch norm, leaky ReLU, dropout), mean pool, linear head.
///
/// Also used as the gradient container: running statistics are then zero.
template <typename Scalar>
struct ModelParams {
    ModelConfig config;
    std::array<GcnLayerParams<Scalar>, kNumLayers> gcn;
    std::array<BatchNormParams<Scalar>, kNumLayers> bn;
    Matrix<Scalar> classifier_weight;  ///< hidden x 4
    RowVector<Scalar> classifier_bias;

    /// Correct shapes, zero weights, unit running variance.
    static ModelParams zeros(const ModelConfig& config);

    /// Calls f(name, tensor) for each learnable tensor in a fixed order.
    template <typename F>
    void for_each_trainable(F&& f) { visit(*this, false, f); }
    template <typename F>
    void for_each_trainable(F&& f) const { visit(*this, false, f); }

    /// Learnable tensors plus batch-norm running statistics.
    template <typename F>
    void for_each_tensor(F&& f) { visit(*this, true, f); }
    template <typename F>
    void for_each_tensor(F&& f) const { visit(*this, true, f); }

    std::size_t trainable_count() const;

    /// Throws ShapeError / NumericError when shapes or values break the invariants.
    void validate() const;

    template <typename Other>
    ModelParams<Other> cast() const;

private:
    template <typename Self, typename F>
    static void visit(Self& self, bool with_stats, F& f) {
        for (int l = 0; l < kNumLayers; ++l) {
            const std::string p = "gcn" + std::to_string(l);
            f(p + ".weight", self.gcn[l].weight);
            f(p + ".bias", self.gcn[l].bias);
        }
        for (int l = 0; l < kNumLayers; ++l) {
            const std::string p = "bn" + std::to_string(l);
            f(p + ".scale", self.bn[l].scale);
            f(p + ".shift", self.bn[l].shift);
            if (with_stats) {
                f(p + ".running_mean", self.bn[l].running_mean);
                f(p + ".running_var", self.bn[l].running_var);
            }
        }
        f(std::string("classifier.weight"), self.classifier_weight);
        f(std::string("classifier.bias"), self.classifier_bias);
    }
};

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::cast() const {
    ModelParams<Other> out;
    out.config = config;
    for (int l = 0; l < kNumLayers; ++l) {
        out.gcn[l].weight = gcn[l].weight.template cast<Other>();
        out.gcn[l].bias = gcn[l].bias.template cast<Other>();
        out.bn[l].scale = bn[l].scale.template cast<Other>();
        out.bn[l].shift = bn[l].shift.template cast<Other>();
        out.bn[l].running_mean = bn[l].running_mean.template cast<Other>();
        out.bn[l].running_var = bn[l].running_var.template cast<Other>();
    }
    out.classifier_weight = classifier_weight.template cast<Other>();
    out.classifier_bias = classifier_bias.template cast<Other>();
    return out;
}

/// Glorot-uniform weights, zero biases, identity batch norm. Deterministic per seed.
template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& config, std::uint64_t seed);

enum class Mode { Training, Inference };

template <typename Scalar>
struct LayerTrace {
    Matrix<Scalar> propagated;      ///< A_hat X
    Matrix<Scalar> normalized;      ///< batch-norm x_hat (training only)
    RowVector<Scalar> batch_mean;
    RowVector<Scalar> batch_var;    ///< biased
    RowVector<Scalar> inv_std;
    Matrix<Scalar> pre_activation;  ///< batch-norm output
    Matrix<Scalar> dropout_mask;    ///< 0 or 1/(1-p); empty in inference
};

/// Intermediates of one forward pass over a batch of graphs.
template <typename Scalar>
struct ForwardTrace {
    Mode mode = Mode::Inference;
    std::uint64_t seed = 0;
    bool retained = false;
    std::vector<std::size_t> offsets;  ///< node offset of each graph, plus the total
    std::shared_ptr<const Propagator<Scalar>> propagator;
    std::array<LayerTrace<Scalar>, kNumLayers> layers;
    Matrix<Scalar> pooled;         ///< graphs x hidden
    Matrix<Scalar> logits;         ///< graphs x 4
    Matrix<Scalar> probabilities;  ///< graphs x 4

    std::size_t batch_size() const { return offsets.empty() ? 0 : offsets.size() - 1; }
};

/// Forward pass over a batch. Training mode normalizes with batch statistics
/// over every node of the batch and applies seeded dropout; inference mode uses
/// running statistics and is deterministic. Intermediates are kept only when
/// retain is set (required for model_backward). Throws NumericError naming
/// the first layer that produced a non-finite value.
template <typename Scalar>
ForwardTrace<Scalar> forward_batch(std::span<const GraphView> graphs, const ModelParams<Scalar>& params,
                                   Mode mode, std::uint64_t seed, bool retain);

template <typename Scalar>
struct SingleForward {
    std::array<double, kNumClasses> probabilities{};
    ForwardTrace<Scalar> trace;
};

/// Single-graph forward; the trace is retained in training mode.
template <typename Scalar>
SingleForward<Scalar> model_forward(const GraphView& graph, const ModelParams<Scalar>& params, Mode mode,
                                    std::uint64_t seed);

/// Inference probabilities for many graphs, evaluated in chunks.
template <typename Scalar>
Matrix<Scalar> predict(std::span<const GraphView> graphs, const ModelParams<Scalar>& params,
                       std::size_t chunk = 64);

/// -log softmax(logits)[label], via log-sum-exp. Throws ValidationError for a bad label.
double cross_entropy_loss(std::span<const double> logits, int label);

/// Mean cross-entropy of a traced batch.
template <typename Scalar>
double batch_loss(const ForwardTrace<Scalar>& trace, std::span<const int> labels);

/// Exact gradients of batch_loss with respect to every learnable tensor.
/// Throws Error for an inference-mode or non-retained trace.
template <typename Scalar>
ModelParams<Scalar> model_backward(const ForwardTrace<Scalar>& trace, const ModelParams<Scalar>& params,
                                   std::span<const int> labels);

/// Exponential-moving-average update of batch-norm running statistics from a training trace.
template <typename Scalar>
void update_running_stats(ModelParams<Scalar>& params, const ForwardTrace<Scalar>& trace);

} // namespace teleop::gnn
