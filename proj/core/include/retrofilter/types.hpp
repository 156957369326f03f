#pragma once

#include <Eigen/Core>

namespace retrofilter {

/// Kinematic state dimension: ECR position [m] followed by velocity [m/s].
inline constexpr int kStateDim = 6;

using StateVector = Eigen::Matrix<double, kStateDim, 1>;
using StateMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline Vec3 position_of(const StateVector& x) { return x.head<3>(); }
inline Vec3 velocity_of(const StateVector& x) { return x.tail<3>(); }

inline StateVector make_state(const Vec3& position, const Vec3& velocity) {
  StateVector x;
  x << position, velocity;
  return x;
}

}  // namespace retrofilter
