#pragma once

#include <Eigen/Dense>

namespace mstrack {

// Spatial dimension d is 2 or 3, so stacked states never exceed 6 entries.
// Bounded-size dynamic types keep the hot loops free of heap allocation.
inline constexpr int kMaxDim = 3;
inline constexpr int kMaxState = 2 * kMaxDim;

template <typename Scalar>
using AxisVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxDim, 1>;

template <typename Scalar>
using StateVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, 0, kMaxState, 1>;

template <typename Scalar>
using StateMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxState, kMaxState>;

template <typename Scalar>
using InputMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxState, kMaxDim>;

template <typename Scalar>
using AxisMatrix =
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

using AxisVec = AxisVector<double>;
using StateVec = StateVector<double>;
using StateMat = StateMatrix<double>;
using InputMat = InputMatrix<double>;
using AxisMat = AxisMatrix<double>;

inline bool valid_dimension(int d) { return d == 2 || d == 3; }

}  // namespace mstrack
