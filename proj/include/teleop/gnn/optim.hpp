#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>

#include "teleop/gnn/model.hpp"

namespace teleop::gnn {

struct AdamWConfig {
    double lr = 0.001;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment accumulators shaped like the learnable tensors of a model.
template <typename Scalar>
struct AdamWState {
    AdamWConfig config;
    std::int64_t step = 0;
    ModelParams<Scalar> first_moment;
    ModelParams<Scalar> second_moment;

    static AdamWState create(const ModelConfig& model, const AdamWConfig& config);
};

/// One AdamW update of a flat tensor. step is the 1-based step number used for bias correction.
/// Decay is decoupled: theta <- theta (1 - lr wd) - lr m_hat / (sqrt(v_hat) + eps).
template <typename Scalar>
void adamw_update(std::span<Scalar> params, std::span<const Scalar> grads, std::span<Scalar> first_moment,
                  std::span<Scalar> second_moment, std::int64_t step, const AdamWConfig& config);

struct StepReport {
    bool applied = true;
    std::string reason;  ///< why the step was skipped
};

/// Applies one AdamW step to every learnable tensor. A non-finite gradient
/// anywhere skips the whole step and leaves params and state untouched.
template <typename Scalar>
StepReport adamw_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamWState<Scalar>& state);

struct PlateauConfig {
    double initial_lr = 0.001;
    double factor = 0.5;
    int patience = 10;
    double min_lr = 1e-6;
};

/// Reduce-on-plateau for a maximized metric (validation accuracy).
class PlateauScheduler {
public:
    explicit PlateauScheduler(PlateauConfig config = {});

    /// Feeds one epoch's metric. Returns true when the learning rate was reduced.
    bool step(double metric);

    double lr() const { return lr_; }
    double best() const { return best_; }
    int stagnant_epochs() const { return stagnant_; }

private:
    PlateauConfig config_;
    double lr_;
    double best_ = -std::numeric_limits<double>::infinity();
    int stagnant_ = 0;
};

} // namespace teleop::gnn
