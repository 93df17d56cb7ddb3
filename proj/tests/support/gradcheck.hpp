#pragma once

// Central finite-difference oracle for the model gradients. Independent of
// model_backward: it only calls the forward pass and the batch loss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "teleop/gnn/model.hpp"

namespace teleop::testing {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::string worst_parameter;
    std::size_t checked = 0;
    bool all_finite = true;
};

/// Relative error with a floor so that exactly-zero gradients (e.g. a conv bias
/// feeding batch norm) compare on an absolute scale.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

inline gnn::ModelParams<double> randomized_params(int hidden, std::uint64_t seed) {
    gnn::ModelConfig cfg;
    cfg.hidden = hidden;
    auto p = gnn::init_params<double>(cfg, seed);
    std::mt19937_64 rng(seed + 99);
    std::normal_distribution<double> n(0.0, 0.3);
    // Perturb biases, batch-norm affine and running stats so no gradient is trivially structured.
    for (int l = 0; l < gnn::kNumLayers; ++l) {
        for (long i = 0; i < hidden; ++i) {
            p.gcn[l].bias(i) = n(rng);
            p.bn[l].scale(i) = 1.0 + n(rng);
            p.bn[l].shift(i) = n(rng);
            p.bn[l].running_mean(i) = n(rng) * 0.1;
            p.bn[l].running_var(i) = 0.5 + std::abs(n(rng));
        }
    }
    for (long i = 0; i < gnn::kNumClasses; ++i) p.classifier_bias(i) = n(rng);
    return p;
}

inline GradCheckResult finite_difference_check(std::span<const gnn::GraphView> graphs,
                                               std::span<const int> labels, gnn::ModelParams<double> params,
                                               std::uint64_t dropout_seed, double step = 1e-5) {
    using gnn::Mode;
    auto trace = gnn::forward_batch<double>(graphs, params, Mode::Training, dropout_seed, true);
    const auto analytic = gnn::model_backward<double>(trace, params, labels);

    std::vector<const double*> grad_ptrs;
    std::vector<std::string> names;
    std::vector<std::size_t> sizes;
    analytic.for_each_trainable([&](const std::string& name, const auto& t) {
        grad_ptrs.push_back(t.data());
        names.push_back(name);
        sizes.push_back(static_cast<std::size_t>(t.size()));
    });

    std::vector<double*> param_ptrs;
    params.for_each_trainable([&](const std::string&, auto& t) { param_ptrs.push_back(t.data()); });

    auto loss = [&] {
        return gnn::batch_loss(gnn::forward_batch<double>(graphs, params, Mode::Training, dropout_seed, false), labels);
    };

    GradCheckResult result;
    for (std::size_t tensor = 0; tensor < param_ptrs.size(); ++tensor) {
        for (std::size_t i = 0; i < sizes[tensor]; ++i) {
            double& theta = param_ptrs[tensor][i];
            const double saved = theta;
            theta = saved + step;
            const double up = loss();
            theta = saved - step;
            const double down = loss();
            theta = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double a = grad_ptrs[tensor][i];
            if (!std::isfinite(a)) result.all_finite = false;
            const double err = relative_error(a, numeric);
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = names[tensor] + "[" + std::to_string(i) + "]";
            }
            ++result.checked;
        }
    }
    return result;
}

} // namespace teleop::testing
