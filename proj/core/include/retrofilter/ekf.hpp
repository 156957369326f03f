#pragma once

#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "retrofilter/dynamics.hpp"
#include "retrofilter/sensing.hpp"
#include "retrofilter/types.hpp"

namespace retrofilter::ekf {

struct GaussianEstimate {
  double epoch = 0.0;
  StateVector mean = StateVector::Zero();
  StateMatrix cov = StateMatrix::Identity();
};

/// What a fusion node holds for one source track.
struct TrackHistory {
  std::vector<GaussianEstimate> estimates;
  dynamics::DynamicsModel dynamics;
  /// Dimension M of the original measurements; never inferred.
  int meas_dim = 3;
  std::optional<dynamics::ProcessNoiseModel> declared_noise;
  /// Set when the history was reported below the native measurement rate.
  bool downsampled = false;

  /// Throws unless epochs strictly increase and 1 <= meas_dim <= 6.
  void validate() const;
};

/// Range/direction-cosine measurement in a fixed beam frame.
struct RuvModel {
  Vec3 site_ecr = Vec3::Zero();
  Mat3 frame = Mat3::Identity();
};

/// x -> first `dim` state components, i.e. H = [I 0].
struct StateSubspace {
  int dim = 3;
};

using MeasurementFunction = std::variant<RuvModel, StateSubspace>;

int measurement_dim(const MeasurementFunction& h);
Eigen::VectorXd evaluate(const MeasurementFunction& h, const StateVector& x);
/// M x 6 Jacobian at x.
Eigen::MatrixXd measurement_jacobian(const MeasurementFunction& h, const StateVector& x);

/// A measurement together with its noise covariance and model.
struct Measurement {
  double epoch = 0.0;
  Eigen::VectorXd z;
  Eigen::MatrixXd noise_cov;
  MeasurementFunction model;
};

Measurement from_ruv(const sensing::RuvMeasurement& m);

enum class CovarianceUpdate { Standard, Joseph };

/// mean = propagate(mean, dt); cov = F P Fᵀ + Q.
GaussianEstimate predict(const GaussianEstimate& est, const dynamics::DynamicsModel& dyn,
                         const StateMatrix& q, double dt);

/// Same as predict, also returning the transition Jacobian used.
GaussianEstimate predict(const GaussianEstimate& est, const dynamics::DynamicsModel& dyn,
                         const StateMatrix& q, double dt, StateMatrix& transition);

/// Kalman update with H evaluated at the predicted mean. The standard form
/// P - K S Kᵀ is the default; Joseph form is available for comparison.
GaussianEstimate update(const GaussianEstimate& pred, const Eigen::VectorXd& z,
                        const Eigen::MatrixXd& noise_cov, const MeasurementFunction& h,
                        CovarianceUpdate form = CovarianceUpdate::Standard);

/// Relative residual of the information-form identity
/// ‖(P_post⁻¹ - P_pred⁻¹) - Hᵀ R⁻¹ H‖ / ‖Hᵀ R⁻¹ H‖.
double information_form_residual(const GaussianEstimate& pred, const GaussianEstimate& post,
                                 const Eigen::MatrixXd& noise_cov, const MeasurementFunction& h);

inline constexpr double kDefaultInitVelocitySigma = 3000.0;

/// Single-detection initialization: position is the detection mapped to ECR
/// with its covariance carried through the linearized RUV->ECR map; velocity is
/// zero with `velocity_sigma` per axis and no position/velocity correlation.
GaussianEstimate init_track(const sensing::RuvMeasurement& first,
                            double velocity_sigma = kDefaultInitVelocitySigma);

/// Two-point differencing initialization at the second detection's epoch:
/// position from the second detection, velocity from the difference of the two
/// converted positions, with the matching cross-covariance.
GaussianEstimate init_track_two_point(const sensing::RuvMeasurement& first,
                                      const sensing::RuvMeasurement& second);

struct FilterOptions {
  CovarianceUpdate update_form = CovarianceUpdate::Standard;
};

/// Alternating predict/update over time-ordered measurements starting from
/// `init`. The returned history starts with `init` and holds every posterior.
TrackHistory run_filter(std::span<const Measurement> measurements,
                        const dynamics::DynamicsModel& dyn,
                        const dynamics::ProcessNoiseModel& noise, const GaussianEstimate& init,
                        const FilterOptions& options = {});

/// eᵀ P⁻¹ e for e = mean - truth.
double nees(const GaussianEstimate& est, const StateVector& truth);

}  // namespace retrofilter::ekf
