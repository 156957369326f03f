#pragma once

#include "retrofilter/types.hpp"

namespace retrofilter::dynamics {

/// Earth gravitational parameter [m^3/s^2].
inline constexpr double kEarthMu = 3.986004418e14;
/// Earth rotation rate about +z [rad/s].
inline constexpr double kEarthRotationRate = 7.2921159e-5;
/// Ballistic derivatives are refused inside this radius [m].
inline constexpr double kMinBallisticRadius = 1e5;

enum class MotionKind { ConstantVelocity, BallisticEcr };

struct DynamicsModel {
  MotionKind kind = MotionKind::ConstantVelocity;
  /// RK4 step ceiling for ballistic propagation [s].
  double max_step = 1.0;

  static DynamicsModel constant_velocity() { return {MotionKind::ConstantVelocity, 1.0}; }
  static DynamicsModel ballistic(double max_step = 1.0) { return {MotionKind::BallisticEcr, max_step}; }
};

/// White-acceleration process noise with Q(dt) = eta * noise_basis(dt).
struct ProcessNoiseModel {
  /// Acceleration power spectral density [m^2/s^3].
  double eta = 0.0;

  StateMatrix q(double dt) const;
};

/// [[I, dt I], [0, I]].
StateMatrix cv_transition(double dt);

/// Integral over [0, dt] of Phi(tau) A Phi(tau)ᵀ for the constant-velocity
/// kernel, A selecting the velocity block. Per axis: [[dt³/3, dt²/2], [dt²/2, dt]].
StateMatrix noise_basis(double dt);

/// eta * noise_basis(dt).
StateMatrix q_matrix(const ProcessNoiseModel& model, double dt);

/// Time derivative of an ECR state under spherical gravity, including the
/// Coriolis and centrifugal terms of the rotating frame.
StateVector ballistic_derivative(const StateVector& x);

/// Propagates `x` forward by `dt`. Constant velocity is exact; ballistic uses
/// fixed-step RK4 with steps no longer than the model's ceiling.
StateVector propagate(const DynamicsModel& model, const StateVector& x, double dt);

/// d propagate / d x. Exact for constant velocity; central differences of
/// propagate (1 m position, 1e-3 m/s velocity steps) for ballistic.
StateMatrix jacobian(const DynamicsModel& model, const StateVector& x, double dt);

/// Specific orbital energy computed in the inertial frame instantaneously
/// aligned with ECR [J/kg].
double inertial_specific_energy(const StateVector& x);

/// Rotation taking inertial coordinates to ECR after the Earth has turned for `t` seconds.
Mat3 inertial_to_ecr(double t);

}  // namespace retrofilter::dynamics
