#include "teleop/gnn/gcn.hpp"

#include <cmath>
#include <string>

#include "teleop/common/error.hpp"

namespace teleop::gnn {

template <typename Scalar>
Propagator<Scalar>::Propagator(std::size_t node_count, std::span<const graph::Edge> edges) {
    build(node_count, {edges}, {0});
}

template <typename Scalar>
Propagator<Scalar>::Propagator(std::span<const GraphView> graphs) {
    std::vector<std::span<const graph::Edge>> edge_sets;
    std::vector<std::size_t> offsets;
    std::size_t total = 0;
    for (const GraphView& g : graphs) {
        edge_sets.push_back(g.edges);
        offsets.push_back(total);
        total += g.nodes.size();
    }
    // Per-graph endpoint checks need per-graph sizes.
    for (std::size_t i = 0; i < graphs.size(); ++i) {
        for (const graph::Edge& e : graphs[i].edges) {
            if (e.source >= graphs[i].nodes.size() || e.target >= graphs[i].nodes.size()) {
                throw ShapeError("edge endpoint out of range in graph " + std::to_string(i));
            }
        }
    }
    build(total, edge_sets, offsets);
}

template <typename Scalar>
void Propagator<Scalar>::build(std::size_t node_count,
                               const std::vector<std::span<const graph::Edge>>& edge_sets,
                               const std::vector<std::size_t>& offsets) {
    std::vector<double> degree(node_count, 1.0);
    std::size_t nnz = node_count;
    for (std::size_t s = 0; s < edge_sets.size(); ++s) {
        for (const graph::Edge& e : edge_sets[s]) {
            std::size_t t = offsets[s] + e.target;
            std::size_t src = offsets[s] + e.source;
            if (t >= node_count || src >= node_count) {
                throw ShapeError("edge (" + std::to_string(e.source) + ", " + std::to_string(e.target) +
                                 ") out of range for " + std::to_string(node_count) + " nodes");
            }
            degree[t] += 1.0;
            ++nnz;
        }
    }
    std::vector<double> inv_sqrt(node_count);
    for (std::size_t i = 0; i < node_count; ++i) inv_sqrt[i] = 1.0 / std::sqrt(degree[i]);

    std::vector<Eigen::Triplet<Scalar>> triplets;
    triplets.reserve(nnz);
    for (std::size_t i = 0; i < node_count; ++i) {
        triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), static_cast<Scalar>(inv_sqrt[i] * inv_sqrt[i]));
    }
    for (std::size_t s = 0; s < edge_sets.size(); ++s) {
        for (const graph::Edge& e : edge_sets[s]) {
            std::size_t t = offsets[s] + e.target;
            std::size_t src = offsets[s] + e.source;
            triplets.emplace_back(static_cast<int>(t), static_cast<int>(src),
                                  static_cast<Scalar>(inv_sqrt[t] * inv_sqrt[src]));
        }
    }
    adjacency_.resize(static_cast<Eigen::Index>(node_count), static_cast<Eigen::Index>(node_count));
    adjacency_.setFromTriplets(triplets.begin(), triplets.end());
}

template <typename Scalar>
Matrix<Scalar> gcn_layer_forward(const Matrix<Scalar>& features, std::span<const graph::Edge> edges,
                                 const Matrix<Scalar>& weight, const RowVector<Scalar>& bias) {
    if (features.cols() != weight.rows()) {
        throw ShapeError("gcn layer: features have " + std::to_string(features.cols()) +
                         " columns, weight expects " + std::to_string(weight.rows()));
    }
    if (bias.size() != weight.cols()) throw ShapeError("gcn layer: bias length != weight columns");
    Propagator<Scalar> prop(static_cast<std::size_t>(features.rows()), edges);
    Matrix<Scalar> out = prop.apply(features) * weight;
    out.rowwise() += bias;
    return out;
}

template <typename Scalar>
RowVector<Scalar> global_mean_pool(const Matrix<Scalar>& features) {
    if (features.rows() == 0) throw ShapeError("mean pool over zero nodes");
    return features.colwise().mean();
}

template class Propagator<float>;
template class Propagator<double>;
template Matrix<float> gcn_layer_forward(const Matrix<float>&, std::span<const graph::Edge>,
                                         const Matrix<float>&, const RowVector<float>&);
template Matrix<double> gcn_layer_forward(const Matrix<double>&, std::span<const graph::Edge>,
                                          const Matrix<double>&, const RowVector<double>&);
template RowVector<float> global_mean_pool(const Matrix<float>&);
template RowVector<double> global_mean_pool(const Matrix<double>&);

} // namespace teleop::gnn
