#pragma once

#include <Eigen/Dense>

namespace fbctl {

/// Largest state dimension handled by the grid and mollifier code.
inline constexpr int kMaxDim = 2;
/// Largest control-point dimension.
inline constexpr int kMaxControlDim = 4;

// Fixed-capacity dynamic types: no heap traffic in the inner loops.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;
using ControlPoint = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxControlDim, 1>;

// Lifted (state + cost) objects live in dimension d + 1.
using LiftedVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>;
using LiftedMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim + 1>;

}  // namespace fbctl
