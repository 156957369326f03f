#include "retrofilter/dynamics.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "retrofilter/errors.hpp"

namespace retrofilter::dynamics {
namespace {

void require_nonnegative_dt(double dt, const char* what) {
  if (!(dt >= 0.0) || !std::isfinite(dt)) {
    std::ostringstream os;
    os << what << ": time step must be finite and nonnegative, got " << dt;
    throw Error(ErrorKind::Domain, os.str());
  }
}

const Vec3& earth_rate() {
  static const Vec3 omega(0.0, 0.0, kEarthRotationRate);
  return omega;
}

StateVector rk4_step(const StateVector& x, double h) {
  const StateVector k1 = ballistic_derivative(x);
  const StateVector k2 = ballistic_derivative(x + 0.5 * h * k1);
  const StateVector k3 = ballistic_derivative(x + 0.5 * h * k2);
  const StateVector k4 = ballistic_derivative(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace

StateMatrix cv_transition(double dt) {
  require_nonnegative_dt(dt, "cv_transition");
  StateMatrix f = StateMatrix::Identity();
  f.topRightCorner<3, 3>() = dt * Mat3::Identity();
  return f;
}

StateMatrix noise_basis(double dt) {
  require_nonnegative_dt(dt, "noise_basis");
  const double dt2 = dt * dt;
  StateMatrix b = StateMatrix::Zero();
  b.topLeftCorner<3, 3>() = (dt2 * dt / 3.0) * Mat3::Identity();
  b.topRightCorner<3, 3>() = (dt2 / 2.0) * Mat3::Identity();
  b.bottomLeftCorner<3, 3>() = (dt2 / 2.0) * Mat3::Identity();
  b.bottomRightCorner<3, 3>() = dt * Mat3::Identity();
  return b;
}

StateMatrix q_matrix(const ProcessNoiseModel& model, double dt) {
  if (!(model.eta >= 0.0)) {
    throw Error(ErrorKind::Domain, "q_matrix: eta must be nonnegative");
  }
  return model.eta * noise_basis(dt);
}

StateMatrix ProcessNoiseModel::q(double dt) const { return q_matrix(*this, dt); }

StateVector ballistic_derivative(const StateVector& x) {
  const Vec3 p = position_of(x);
  const Vec3 v = velocity_of(x);
  const double r = p.norm();
  if (!(r > kMinBallisticRadius)) {
    std::ostringstream os;
    os << "ballistic_derivative: position radius " << r << " m is too close to Earth's center";
    throw Error(ErrorKind::Domain, os.str());
  }
  const Vec3& w = earth_rate();
  const Vec3 accel = -kEarthMu / (r * r * r) * p - 2.0 * w.cross(v) - w.cross(w.cross(p));
  return make_state(v, accel);
}

StateVector propagate(const DynamicsModel& model, const StateVector& x, double dt) {
  require_nonnegative_dt(dt, "propagate");
  if (model.kind == MotionKind::ConstantVelocity) {
    if (dt == 0.0) return x;
    return cv_transition(dt) * x;
  }
  if (!(model.max_step > 0.0)) {
    throw Error(ErrorKind::Domain, "propagate: integrator step ceiling must be positive");
  }
  if (dt == 0.0) return x;
  const auto steps = static_cast<long>(std::ceil(dt / model.max_step - 1e-12));
  const double h = dt / static_cast<double>(std::max(steps, 1L));
  StateVector out = x;
  for (long i = 0; i < std::max(steps, 1L); ++i) {
    out = rk4_step(out, h);
  }
  return out;
}

StateMatrix jacobian(const DynamicsModel& model, const StateVector& x, double dt) {
  require_nonnegative_dt(dt, "jacobian");
  if (model.kind == MotionKind::ConstantVelocity) {
    return cv_transition(dt);
  }
  if (!(model.max_step > 0.0)) {
    throw Error(ErrorKind::Domain, "jacobian: integrator step ceiling must be positive");
  }
  if (dt == 0.0) return StateMatrix::Identity();
  StateMatrix f;
  for (int i = 0; i < kStateDim; ++i) {
    const double delta = i < 3 ? 1.0 : 1e-3;
    StateVector hi = x;
    StateVector lo = x;
    hi(i) += delta;
    lo(i) -= delta;
    f.col(i) = (propagate(model, hi, dt) - propagate(model, lo, dt)) / (2.0 * delta);
  }
  return f;
}

double inertial_specific_energy(const StateVector& x) {
  const Vec3 p = position_of(x);
  const Vec3 v_inertial = velocity_of(x) + earth_rate().cross(p);
  return 0.5 * v_inertial.squaredNorm() - kEarthMu / p.norm();
}

Mat3 inertial_to_ecr(double t) {
  return Eigen::AngleAxisd(-kEarthRotationRate * t, Vec3::UnitZ()).toRotationMatrix();
}

}  // namespace retrofilter::dynamics
