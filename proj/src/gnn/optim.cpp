#include "teleop/gnn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "teleop/common/error.hpp"

namespace teleop::gnn {

template <typename Scalar>
AdamWState<Scalar> AdamWState<Scalar>::create(const ModelConfig& model, const AdamWConfig& config) {
    AdamWState s;
    s.config = config;
    s.first_moment = ModelParams<Scalar>::zeros(model);
    s.second_moment = ModelParams<Scalar>::zeros(model);
    return s;
}

template <typename Scalar>
void adamw_update(std::span<Scalar> params, std::span<const Scalar> grads, std::span<Scalar> first_moment,
                  std::span<Scalar> second_moment, std::int64_t step, const AdamWConfig& c) {
    if (grads.size() != params.size() || first_moment.size() != params.size() ||
        second_moment.size() != params.size()) {
        throw ShapeError("adamw: tensor sizes differ");
    }
    if (step < 1) throw ValidationError("adamw: step must be >= 1");
    const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
    const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
    const double decay = 1.0 - c.lr * c.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = static_cast<double>(grads[i]);
        const double m = c.beta1 * static_cast<double>(first_moment[i]) + (1.0 - c.beta1) * g;
        const double v = c.beta2 * static_cast<double>(second_moment[i]) + (1.0 - c.beta2) * g * g;
        first_moment[i] = static_cast<Scalar>(m);
        second_moment[i] = static_cast<Scalar>(v);
        const double m_hat = m / bc1;
        const double v_hat = v / bc2;
        const double theta = static_cast<double>(params[i]) * decay - c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
        params[i] = static_cast<Scalar>(theta);
    }
}

template <typename Scalar>
StepReport adamw_step(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads, AdamWState<Scalar>& state) {
    StepReport report;
    grads.for_each_trainable([&](const std::string& name, const auto& g) {
        if (report.applied && !g.allFinite()) {
            report.applied = false;
            report.reason = "non-finite gradient in " + name;
        }
    });
    if (!report.applied) return report;

    using Span = std::span<Scalar>;
    std::vector<Span> p_views, m_views, v_views;
    std::vector<std::span<const Scalar>> g_views;
    auto collect = [](auto& out) {
        return [&out](const std::string&, auto& t) { out.emplace_back(t.data(), static_cast<std::size_t>(t.size())); };
    };
    params.for_each_trainable(collect(p_views));
    state.first_moment.for_each_trainable(collect(m_views));
    state.second_moment.for_each_trainable(collect(v_views));
    grads.for_each_trainable(collect(g_views));
    if (p_views.size() != g_views.size() || p_views.size() != m_views.size()) {
        throw ShapeError("adamw: parameter and state layouts differ");
    }
    ++state.step;
    for (std::size_t i = 0; i < p_views.size(); ++i) {
        adamw_update<Scalar>(p_views[i], g_views[i], m_views[i], v_views[i], state.step, state.config);
    }
    return report;
}

PlateauScheduler::PlateauScheduler(PlateauConfig config) : config_(config), lr_(config.initial_lr) {
    if (config_.factor <= 0.0 || config_.factor >= 1.0) throw ConfigError("plateau factor must be in (0, 1)");
    if (config_.patience < 1) throw ConfigError("plateau patience must be >= 1");
}

bool PlateauScheduler::step(double metric) {
    if (metric > best_) {
        best_ = metric;
        stagnant_ = 0;
        return false;
    }
    if (++stagnant_ < config_.patience) return false;
    stagnant_ = 0;
    const double next = std::max(lr_ * config_.factor, config_.min_lr);
    const bool reduced = next < lr_;
    lr_ = std::min(lr_, next);
    return reduced;
}

template struct AdamWState<float>;
template struct AdamWState<double>;
template void adamw_update<float>(std::span<float>, std::span<const float>, std::span<float>, std::span<float>,
                                  std::int64_t, const AdamWConfig&);
template void adamw_update<double>(std::span<double>, std::span<const double>, std::span<double>,
                                   std::span<double>, std::int64_t, const AdamWConfig&);
template StepReport adamw_step<float>(ModelParams<float>&, const ModelParams<float>&, AdamWState<float>&);
template StepReport adamw_step<double>(ModelParams<double>&, const ModelParams<double>&, AdamWState<double>&);

} // namespace teleop::gnn
