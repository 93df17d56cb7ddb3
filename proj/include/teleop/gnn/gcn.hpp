#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/SparseCore>

#include "teleop/gnn/tensor.hpp"
#include "teleop/graph/window_graph.hpp"

namespace teleop::gnn {

/// Node coordinates plus directed edges. Edge (s, t) sends s's message to t.
struct GraphView {
    std::span<const graph::Point2> nodes;
    std::span<const graph::Edge> edges;
};

inline GraphView view_of(const graph::WindowGraph& g) { return {g.node_features(), g.edges()}; }

/// Symmetric-normalized propagation D^-1/2 (A + I) D^-1/2 for a batch of
/// graphs laid out block-diagonally. Degrees count incoming edges plus the
/// self loop; repeated edges add weight.
template <typename Scalar>
class Propagator {
public:
    Propagator() = default;

    /// Single graph of node_count nodes. Throws ShapeError on out-of-range endpoints.
    Propagator(std::size_t node_count, std::span<const graph::Edge> edges);

    /// Block-diagonal batch in the order given.
    explicit Propagator(std::span<const GraphView> graphs);

    std::size_t node_count() const { return static_cast<std::size_t>(adjacency_.rows()); }

    Matrix<Scalar> apply(const Matrix<Scalar>& x) const { return adjacency_ * x; }
    Matrix<Scalar> apply_transpose(const Matrix<Scalar>& g) const { return adjacency_.transpose() * g; }

    /// Dense copy, for tests.
    Matrix<Scalar> dense() const { return Matrix<Scalar>(adjacency_); }

private:
    void build(std::size_t node_count, const std::vector<std::span<const graph::Edge>>& edge_sets,
               const std::vector<std::size_t>& offsets);

    Eigen::SparseMatrix<Scalar, Eigen::RowMajor> adjacency_;
};

/// One graph-convolution layer: normalized propagation, then X W + b.
template <typename Scalar>
Matrix<Scalar> gcn_layer_forward(const Matrix<Scalar>& features, std::span<const graph::Edge> edges,
                                 const Matrix<Scalar>& weight, const RowVector<Scalar>& bias);

/// Mean over rows. Throws ShapeError for an empty matrix.
template <typename Scalar>
RowVector<Scalar> global_mean_pool(const Matrix<Scalar>& features);

} // namespace teleop::gnn
