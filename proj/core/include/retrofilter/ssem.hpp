#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "retrofilter/ekf.hpp"
#include "retrofilter/procnoise.hpp"

namespace retrofilter::ssem {

/// A reconstructed measurement of the first M state components (H = [I_M 0]).
struct Ssem {
  double epoch = 0.0;
  Eigen::VectorXd z;
  Eigen::MatrixXd cov;
  /// Process-noise intensity used to reconstruct it.
  double eta_used = 0.0;
};

ekf::Measurement to_measurement(const Ssem& s);

/// P_post⁻¹ - P_pred⁻¹. May be indefinite when the prediction is inconsistent
/// with the posterior (too little process noise).
Eigen::MatrixXd information_gain(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred);

struct CovarianceExtraction {
  Eigen::MatrixXd cov;
  /// ‖J outside the leading M x M block‖_F / ‖J‖_F.
  double off_block_residual = 0.0;
};

/// Inverts the leading M x M block of the information gain. Throws Infeasible
/// when that block is not positive definite.
CovarianceExtraction extract_covariance(const Eigen::MatrixXd& gain, int meas_dim);

struct GainExtraction {
  Eigen::MatrixXd gain;
  /// ‖trailing N - M columns of I - P_post P_pred⁻¹‖_F.
  double discarded_norm = 0.0;
};

/// First M columns of I - P_post P_pred⁻¹.
GainExtraction extract_gain(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred,
                            int meas_dim);

/// Relative singular-value cutoff of the gain pseudoinverse.
inline constexpr double kPinvRelCutoff = 1e-10;

/// K⁺ (x_post - P_post P_pred⁻¹ x_pred). Throws a rank error when K has fewer
/// than M singular values above the cutoff.
Eigen::VectorXd reconstruct_z(const Eigen::MatrixXd& gain, const Eigen::VectorXd& x_post,
                              const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred,
                              const Eigen::VectorXd& x_pred);

/// Constant, known intensity.
struct KnownEta {
  double eta = 0.0;
};

/// Per-step conservative estimation. A median window longer than one
/// replaces each estimate with the median of the trailing window.
struct EstimatedEta {
  procnoise::EtaSearchOptions options{};
  std::size_t median_window = 1;
};

using EtaProvider = std::variant<KnownEta, EstimatedEta>;

struct StepDiagnostics {
  double epoch = 0.0;
  double eta_used = 0.0;
  double off_block_residual = 0.0;
  double discarded_gain_norm = 0.0;
  std::optional<procnoise::EtaEstimate> eta_estimate;
  /// The step produced no Ssem (intensity estimation failed).
  bool skipped = false;
  std::string note;
};

struct Decorrelation {
  std::vector<Ssem> measurements;
  std::vector<StepDiagnostics> diagnostics;
};

/// Turns a track history into independent state-space measurements. The first
/// estimate seeds the recursion; each later estimate yields one Ssem (or one
/// skipped diagnostic when the intensity estimator fails).
///
/// Throws DegenerateStep when an estimate carries no new information, and
/// rejects downsampled histories.
Decorrelation decorrelate_track(const ekf::TrackHistory& history, const EtaProvider& eta);

/// Reconstructs a single step given a fixed intensity.
Ssem decorrelate_step(const ekf::GaussianEstimate& previous, const ekf::GaussianEstimate& current,
                      const dynamics::DynamicsModel& dyn, int meas_dim, double eta,
                      StepDiagnostics* diagnostics = nullptr);

}  // namespace retrofilter::ssem
