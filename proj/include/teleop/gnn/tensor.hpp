#pragma once

#include <Eigen/Core>

namespace teleop::gnn {

/// Row-major dense matrix: one row per node (or per graph), one column per channel.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

inline constexpr int kInputDim = 2;
inline constexpr int kNumClasses = 4;

} // namespace teleop::gnn
