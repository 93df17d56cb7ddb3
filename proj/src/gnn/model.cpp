#include "teleop/gnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "teleop/common/error.hpp"

namespace teleop::gnn {

namespace {

int layer_input_dim(const ModelConfig& c, int layer) { return layer == 0 ? kInputDim : c.hidden; }

template <typename Scalar>
void require_finite(const Matrix<Scalar>& m, const std::string& where) {
    // inf * 0 and nan * 0 are nan; the vectorized sum beats allFinite's branchy scan.
    if (!((m.array() * Scalar(0)).sum() == Scalar(0))) throw NumericError("non-finite values after " + where);
}

template <typename Scalar>
void require_finite(const RowVector<Scalar>& v, const std::string& where) {
    if (!v.allFinite()) throw NumericError("non-finite values in " + where);
}

// Four 16-bit uniforms per 64-bit draw; keep probability resolves to 1/65536.
template <typename Scalar>
void fill_dropout_mask(Matrix<Scalar>& mask, std::mt19937_64& rng, double keep_probability, Scalar keep_scale) {
    const auto threshold = static_cast<std::uint32_t>(std::lround(keep_probability * 65536.0));
    const auto size = static_cast<std::size_t>(mask.size());
    std::vector<std::uint64_t> words((size + 3) / 4);
    for (auto& w : words) w = rng();
    Scalar* out = mask.data();
    for (std::size_t k = 0; k < size; ++k) {
        const auto bits = static_cast<std::uint32_t>((words[k >> 2] >> (16 * (k & 3))) & 0xFFFFu);
        out[k] = static_cast<Scalar>(bits < threshold) * keep_scale;
    }
}

template <typename Scalar>
Matrix<Scalar> softmax_rows(const Matrix<Scalar>& logits) {
    Matrix<Scalar> out(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        Scalar m = logits.row(r).maxCoeff();
        auto e = (logits.row(r).array() - m).exp();
        out.row(r) = e / e.sum();
    }
    return out;
}

template <typename Scalar>
Matrix<Scalar> stack_features(std::span<const GraphView> graphs, std::vector<std::size_t>& offsets) {
    offsets.assign(1, 0);
    std::size_t total = 0;
    for (const GraphView& g : graphs) {
        if (g.nodes.empty()) throw ShapeError("graph with zero nodes");
        total += g.nodes.size();
        offsets.push_back(total);
    }
    Matrix<Scalar> x(static_cast<Eigen::Index>(total), kInputDim);
    Eigen::Index row = 0;
    for (const GraphView& g : graphs) {
        for (const graph::Point2& p : g.nodes) {
            x(row, 0) = static_cast<Scalar>(p.x);
            x(row, 1) = static_cast<Scalar>(p.y);
            ++row;
        }
    }
    return x;
}

} // namespace

template <typename Scalar>
ModelParams<Scalar> ModelParams<Scalar>::zeros(const ModelConfig& config) {
    if (config.hidden < 1) throw ConfigError("hidden dimension must be >= 1");
    if (config.dropout < 0.0 || config.dropout >= 1.0) throw ConfigError("dropout must be in [0, 1)");
    ModelParams p;
    p.config = config;
    for (int l = 0; l < kNumLayers; ++l) {
        p.gcn[l].weight = Matrix<Scalar>::Zero(layer_input_dim(config, l), config.hidden);
        p.gcn[l].bias = RowVector<Scalar>::Zero(config.hidden);
        p.bn[l].scale = RowVector<Scalar>::Zero(config.hidden);
        p.bn[l].shift = RowVector<Scalar>::Zero(config.hidden);
        p.bn[l].running_mean = RowVector<Scalar>::Zero(config.hidden);
        p.bn[l].running_var = RowVector<Scalar>::Ones(config.hidden);
    }
    p.classifier_weight = Matrix<Scalar>::Zero(config.hidden, kNumClasses);
    p.classifier_bias = RowVector<Scalar>::Zero(kNumClasses);
    return p;
}

template <typename Scalar>
std::size_t ModelParams<Scalar>::trainable_count() const {
    std::size_t n = 0;
    for_each_trainable([&](const std::string&, const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
}

template <typename Scalar>
void ModelParams<Scalar>::validate() const {
    const ModelParams ref = zeros(config);
    // Visit both in lockstep by collecting reference shapes first.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
    ref.for_each_tensor([&](const std::string&, const auto& t) { shapes.emplace_back(t.rows(), t.cols()); });
    std::size_t i = 0;
    for_each_tensor([&](const std::string& name, const auto& t) {
        if (t.rows() != shapes[i].first || t.cols() != shapes[i].second) {
            throw ShapeError(name + " has shape " + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) +
                             ", expected " + std::to_string(shapes[i].first) + "x" +
                             std::to_string(shapes[i].second));
        }
        if (!t.allFinite()) throw NumericError(name + " contains non-finite values");
        ++i;
    });
    for (int l = 0; l < kNumLayers; ++l) {
        if ((bn[l].running_var.array() < Scalar(0)).any()) {
            throw NumericError("bn" + std::to_string(l) + ".running_var is negative");
        }
    }
}

template <typename Scalar>
ModelParams<Scalar> init_params(const ModelConfig& config, std::uint64_t seed) {
    ModelParams<Scalar> p = ModelParams<Scalar>::zeros(config);
    std::mt19937_64 rng(seed);
    auto glorot = [&](Matrix<Scalar>& w) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
    };
    for (int l = 0; l < kNumLayers; ++l) {
        glorot(p.gcn[l].weight);
        p.bn[l].scale.setOnes();
    }
    glorot(p.classifier_weight);
    return p;
}

template <typename Scalar>
ForwardTrace<Scalar> forward_batch(std::span<const GraphView> graphs, const ModelParams<Scalar>& params,
                                   Mode mode, std::uint64_t seed, bool retain) {
    if (graphs.empty()) throw ShapeError("forward over an empty batch");
    const ModelConfig& cfg = params.config;
    const bool training = mode == Mode::Training;

    ForwardTrace<Scalar> trace;
    trace.mode = mode;
    trace.seed = seed;
    trace.retained = retain;
    Matrix<Scalar> x = stack_features<Scalar>(graphs, trace.offsets);
    trace.propagator = std::make_shared<const Propagator<Scalar>>(graphs);
    const auto& prop = *trace.propagator;
    const Eigen::Index n = x.rows();

    std::mt19937_64 rng(seed);
    const Scalar keep_scale = static_cast<Scalar>(1.0 / (1.0 - cfg.dropout));
    const Scalar slope = static_cast<Scalar>(cfg.leaky_slope);

    for (int l = 0; l < kNumLayers; ++l) {
        const std::string where = "gcn layer " + std::to_string(l + 1);
        const auto& gp = params.gcn[l];
        const auto& bp = params.bn[l];
        if (x.cols() != gp.weight.rows()) throw ShapeError(where + ": input width mismatch");

        Matrix<Scalar> propagated = prop.apply(x);
        Matrix<Scalar> z(n, gp.weight.cols());
        z.noalias() = propagated * gp.weight;
        const Eigen::Index h_dim = z.cols();
        std::vector<double> sum(static_cast<std::size_t>(h_dim), 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
            Scalar* row = z.data() + r * h_dim;
            for (Eigen::Index c = 0; c < h_dim; ++c) {
                row[c] += gp.bias[c];
                sum[c] += row[c];
            }
        }
        if (!std::all_of(sum.begin(), sum.end(), [](double v) { return std::isfinite(v); })) {
            throw NumericError("non-finite values after " + where);
        }

        LayerTrace<Scalar> lt;
        RowVector<Scalar> gain(h_dim), offset(h_dim);
        if (training) {
            std::vector<double> sq(static_cast<std::size_t>(h_dim), 0.0);
            lt.batch_mean.resize(h_dim);
            for (Eigen::Index c = 0; c < h_dim; ++c) lt.batch_mean[c] = static_cast<Scalar>(sum[c] / static_cast<double>(n));
            for (Eigen::Index r = 0; r < n; ++r) {
                const Scalar* row = z.data() + r * h_dim;
                for (Eigen::Index c = 0; c < h_dim; ++c) {
                    const Scalar d = row[c] - lt.batch_mean[c];
                    sq[c] += static_cast<double>(d) * static_cast<double>(d);
                }
            }
            lt.batch_var.resize(h_dim);
            lt.inv_std.resize(h_dim);
            for (Eigen::Index c = 0; c < h_dim; ++c) {
                lt.batch_var[c] = static_cast<Scalar>(sq[c] / static_cast<double>(n));
                lt.inv_std[c] = Scalar(1) / std::sqrt(lt.batch_var[c] + static_cast<Scalar>(cfg.bn_eps));
            }
        } else {
            for (Eigen::Index c = 0; c < h_dim; ++c) {
                gain[c] = bp.scale[c] / std::sqrt(bp.running_var[c] + static_cast<Scalar>(cfg.bn_eps));
                offset[c] = bp.shift[c] - bp.running_mean[c] * gain[c];
            }
        }

        const bool drop = training && cfg.dropout > 0.0;
        if (drop) {
            lt.dropout_mask.resize(n, h_dim);
            fill_dropout_mask(lt.dropout_mask, rng, 1.0 - cfg.dropout, keep_scale);
        }
        if (training && retain) {
            lt.normalized.resize(n, h_dim);
            lt.pre_activation.resize(n, h_dim);
        }
        Matrix<Scalar> next(n, h_dim);
        Scalar probe = 0;  // stays zero unless a batch-norm output is non-finite
        if (training) {
            std::vector<Scalar> xhat_row(static_cast<std::size_t>(h_dim)), y_row(xhat_row);
            for (Eigen::Index r = 0; r < n; ++r) {
                const Scalar* zr = z.data() + r * h_dim;
                Scalar* xh = retain ? lt.normalized.data() + r * h_dim : xhat_row.data();
                Scalar* y = retain ? lt.pre_activation.data() + r * h_dim : y_row.data();
                for (Eigen::Index c = 0; c < h_dim; ++c) {
                    xh[c] = (zr[c] - lt.batch_mean[c]) * lt.inv_std[c];
                    y[c] = xh[c] * bp.scale[c] + bp.shift[c];
                }
                Scalar* out = next.data() + r * h_dim;
                for (Eigen::Index c = 0; c < h_dim; ++c) {
                    probe += y[c] * Scalar(0);
                    out[c] = std::max(y[c], Scalar(0)) + slope * std::min(y[c], Scalar(0));
                }
                if (drop) {
                    const Scalar* mask = lt.dropout_mask.data() + r * h_dim;
                    for (Eigen::Index c = 0; c < h_dim; ++c) out[c] *= mask[c];
                }
            }
        } else {
            for (Eigen::Index r = 0; r < n; ++r) {
                const Scalar* zr = z.data() + r * h_dim;
                Scalar* out = next.data() + r * h_dim;
                for (Eigen::Index c = 0; c < h_dim; ++c) {
                    const Scalar y = zr[c] * gain[c] + offset[c];
                    probe += y * Scalar(0);
                    out[c] = std::max(y, Scalar(0)) + slope * std::min(y, Scalar(0));
                }
            }
        }
        if (!(probe == Scalar(0))) throw NumericError("non-finite values after batch norm " + std::to_string(l + 1));
        if (retain) lt.propagated = std::move(propagated);
        x = std::move(next);
        trace.layers[l] = std::move(lt);
    }

    const std::size_t batch = graphs.size();
    trace.pooled.resize(static_cast<Eigen::Index>(batch), x.cols());
    for (std::size_t g = 0; g < batch; ++g) {
        const auto begin = static_cast<Eigen::Index>(trace.offsets[g]);
        const auto count = static_cast<Eigen::Index>(trace.offsets[g + 1] - trace.offsets[g]);
        trace.pooled.row(static_cast<Eigen::Index>(g)) = x.middleRows(begin, count).colwise().mean();
    }
    trace.logits = trace.pooled * params.classifier_weight;
    trace.logits.rowwise() += params.classifier_bias;
    require_finite(trace.logits, "classifier");
    trace.probabilities = softmax_rows(trace.logits);
    return trace;
}

template <typename Scalar>
SingleForward<Scalar> model_forward(const GraphView& graph, const ModelParams<Scalar>& params, Mode mode,
                                    std::uint64_t seed) {
    SingleForward<Scalar> out;
    out.trace = forward_batch<Scalar>(std::span(&graph, 1), params, mode, seed, mode == Mode::Training);
    // Softmax redone in double so the reported distribution sums to 1 at double precision.
    double peak = static_cast<double>(out.trace.logits.row(0).maxCoeff());
    double total = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
        out.probabilities[c] = std::exp(static_cast<double>(out.trace.logits(0, c)) - peak);
        total += out.probabilities[c];
    }
    for (double& p : out.probabilities) p /= total;
    return out;
}

template <typename Scalar>
Matrix<Scalar> predict(std::span<const GraphView> graphs, const ModelParams<Scalar>& params, std::size_t chunk) {
    Matrix<Scalar> probs(static_cast<Eigen::Index>(graphs.size()), kNumClasses);
    chunk = std::max<std::size_t>(chunk, 1);
    for (std::size_t start = 0; start < graphs.size(); start += chunk) {
        const std::size_t count = std::min(chunk, graphs.size() - start);
        auto trace = forward_batch<Scalar>(graphs.subspan(start, count), params, Mode::Inference, 0, false);
        probs.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(count)) = trace.probabilities;
    }
    return probs;
}

double cross_entropy_loss(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) {
        throw ValidationError("label " + std::to_string(label) + " out of range");
    }
    const double m = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - m);
    return m + std::log(sum) - logits[static_cast<std::size_t>(label)];
}

template <typename Scalar>
double batch_loss(const ForwardTrace<Scalar>& trace, std::span<const int> labels) {
    if (labels.size() != trace.batch_size()) throw ShapeError("label count != batch size");
    double total = 0.0;
    std::array<double, kNumClasses> row{};
    for (std::size_t g = 0; g < labels.size(); ++g) {
        for (int c = 0; c < kNumClasses; ++c) row[c] = static_cast<double>(trace.logits(static_cast<Eigen::Index>(g), c));
        total += cross_entropy_loss(row, labels[g]);
    }
    return total / static_cast<double>(labels.size());
}

template <typename Scalar>
ModelParams<Scalar> model_backward(const ForwardTrace<Scalar>& trace, const ModelParams<Scalar>& params,
                                   std::span<const int> labels) {
    if (trace.mode != Mode::Training) throw Error("backward requires a training-mode trace");
    if (!trace.retained) throw Error("backward requires a trace with retained intermediates");
    const std::size_t batch = trace.batch_size();
    if (labels.size() != batch) throw ShapeError("label count != batch size");
    const ModelConfig& cfg = params.config;

    ModelParams<Scalar> grads = ModelParams<Scalar>::zeros(cfg);
    grads.bn[0].running_var.setZero();
    grads.bn[1].running_var.setZero();
    grads.bn[2].running_var.setZero();

    Matrix<Scalar> dlogits = trace.probabilities;
    for (std::size_t g = 0; g < batch; ++g) {
        const int label = labels[g];
        if (label < 0 || label >= kNumClasses) throw ValidationError("label out of range");
        dlogits(static_cast<Eigen::Index>(g), label) -= Scalar(1);
    }
    dlogits /= static_cast<Scalar>(batch);

    grads.classifier_weight.noalias() = trace.pooled.transpose() * dlogits;
    grads.classifier_bias = dlogits.colwise().sum();
    Matrix<Scalar> dpooled = dlogits * params.classifier_weight.transpose();

    const Eigen::Index n = static_cast<Eigen::Index>(trace.offsets.back());
    Matrix<Scalar> dout(n, cfg.hidden);
    for (std::size_t g = 0; g < batch; ++g) {
        const auto begin = static_cast<Eigen::Index>(trace.offsets[g]);
        const auto count = static_cast<Eigen::Index>(trace.offsets[g + 1] - trace.offsets[g]);
        const RowVector<Scalar> share = dpooled.row(static_cast<Eigen::Index>(g)) / static_cast<Scalar>(count);
        dout.middleRows(begin, count).rowwise() = share;
    }

    const Scalar slope = static_cast<Scalar>(cfg.leaky_slope);
    const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
    for (int l = kNumLayers - 1; l >= 0; --l) {
        const LayerTrace<Scalar>& lt = trace.layers[l];
        const auto& bp = params.bn[l];
        const Eigen::Index h_dim = dout.cols();
        const Scalar* mask = lt.dropout_mask.size() ? lt.dropout_mask.data() : nullptr;
        const Scalar* pre = lt.pre_activation.data();
        const Scalar* xhat = lt.normalized.data();
        auto upstream = [&](Eigen::Index i) {
            const Scalar dh = mask ? dout.data()[i] * mask[i] : dout.data()[i];
            return dh * (pre[i] > Scalar(0) ? Scalar(1) : slope);
        };

        std::vector<double> sum_dy(static_cast<std::size_t>(h_dim), 0.0), sum_dy_xhat(sum_dy);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < h_dim; ++c) {
                const Eigen::Index i = r * h_dim + c;
                const Scalar dy = upstream(i);
                sum_dy[c] += dy;
                sum_dy_xhat[c] += dy * xhat[i];
            }
        }
        RowVector<Scalar> mean_dy(h_dim), mean_dy_xhat(h_dim), k(h_dim);
        for (Eigen::Index c = 0; c < h_dim; ++c) {
            grads.bn[l].scale[c] = static_cast<Scalar>(sum_dy_xhat[c]);
            grads.bn[l].shift[c] = static_cast<Scalar>(sum_dy[c]);
            mean_dy[c] = static_cast<Scalar>(sum_dy[c]) * inv_n;
            mean_dy_xhat[c] = static_cast<Scalar>(sum_dy_xhat[c]) * inv_n;
            k[c] = bp.scale[c] * lt.inv_std[c];
        }

        // dz overwrites dout in place.
        std::vector<double> sum_dz(static_cast<std::size_t>(h_dim), 0.0);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < h_dim; ++c) {
                const Eigen::Index i = r * h_dim + c;
                const Scalar dz = k[c] * (upstream(i) - mean_dy[c] - xhat[i] * mean_dy_xhat[c]);
                dout.data()[i] = dz;
                sum_dz[c] += dz;
            }
        }
        const Matrix<Scalar>& dz = dout;

        grads.gcn[l].weight.noalias() = lt.propagated.transpose() * dz;
        for (Eigen::Index c = 0; c < h_dim; ++c) grads.gcn[l].bias[c] = static_cast<Scalar>(sum_dz[c]);
        if (l > 0) {
            Matrix<Scalar> dprop(n, params.gcn[l].weight.rows());
            dprop.noalias() = dz * params.gcn[l].weight.transpose();
            dout = trace.propagator->apply_transpose(dprop);
        }
    }
    return grads;
}

template <typename Scalar>
void update_running_stats(ModelParams<Scalar>& params, const ForwardTrace<Scalar>& trace) {
    if (trace.mode != Mode::Training) return;
    const double n = static_cast<double>(trace.offsets.back());
    const Scalar m = static_cast<Scalar>(params.config.bn_momentum);
    const Scalar unbias = static_cast<Scalar>(n > 1.0 ? n / (n - 1.0) : 1.0);
    for (int l = 0; l < kNumLayers; ++l) {
        auto& bn = params.bn[l];
        bn.running_mean = (Scalar(1) - m) * bn.running_mean + m * trace.layers[l].batch_mean;
        bn.running_var = (Scalar(1) - m) * bn.running_var + (m * unbias) * trace.layers[l].batch_var;
    }
}

#define TELEOP_INSTANTIATE_MODEL(S)                                                                     \
    template struct ModelParams<S>;                                                                     \
    template ModelParams<S> init_params<S>(const ModelConfig&, std::uint64_t);                          \
    template ForwardTrace<S> forward_batch<S>(std::span<const GraphView>, const ModelParams<S>&, Mode,  \
                                              std::uint64_t, bool);                                     \
    template SingleForward<S> model_forward<S>(const GraphView&, const ModelParams<S>&, Mode,           \
                                               std::uint64_t);                                          \
    template Matrix<S> predict<S>(std::span<const GraphView>, const ModelParams<S>&, std::size_t);      \
    template double batch_loss<S>(const ForwardTrace<S>&, std::span<const int>);                        \
    template ModelParams<S> model_backward<S>(const ForwardTrace<S>&, const ModelParams<S>&,            \
                                              std::span<const int>);                                    \
    template void update_running_stats<S>(ModelParams<S>&, const ForwardTrace<S>&);

TELEOP_INSTANTIATE_MODEL(float)
TELEOP_INSTANTIATE_MODEL(double)

#undef TELEOP_INSTANTIATE_MODEL

} // namespace teleop::gnn
