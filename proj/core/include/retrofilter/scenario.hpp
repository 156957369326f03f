#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "retrofilter/ekf.hpp"
#include "retrofilter/errors.hpp"
#include "retrofilter/procnoise.hpp"
#include "retrofilter/sensing.hpp"
#include "retrofilter/ssem.hpp"

namespace retrofilter::scenario {

/// A pipeline failure tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(ErrorKind kind, std::string stage, const std::string& message)
      : Error(kind, "stage " + stage + ": " + message), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Runs `fn`, rethrowing any library error as a StageError for `stage`.
template <typename Fn>
auto with_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(e.kind(), stage, e.what());
  }
}

enum class EtaMode { Known, Estimated };

/// How the source EKF is started: from one detection (zero velocity, broad
/// velocity prior) or by differencing the first two detections.
enum class InitMethod { SingleDetection, TwoPoint };

inline procnoise::EtaSearchOptions default_eta_search() {
  procnoise::EtaSearchOptions opts;
  opts.rel_tol = 1e-10;
  return opts;
}

struct ScenarioConfig {
  sensing::GeodeticCoord launch{2.0, 5.0, 0.0};
  sensing::GeodeticCoord impact{10.0, 10.0, 0.0};
  double flight_time = 700.0;
  sensing::RadarConfig radar{};
  double target_rcs_m2 = 1.0;
  double meas_rate_hz = 1.0;
  /// Intensity used by the source EKF (and as truth for Known decorrelation).
  double source_eta = 0.01;
  /// Intensity used when refiltering the reconstructed measurements.
  double refilter_eta = 0.01;
  EtaMode eta_mode = EtaMode::Known;
  std::uint64_t seed = 0;

  int meas_dim = 3;
  double integrator_step = 1.0;
  InitMethod init_method = InitMethod::TwoPoint;
  /// Velocity prior for InitMethod::SingleDetection [m/s].
  double init_velocity_sigma = ekf::kDefaultInitVelocitySigma;
  ekf::CovarianceUpdate update_form = ekf::CovarianceUpdate::Standard;
  /// Bracket width is tightened below the PSD-tolerance slack so that
  /// R(eta_hat) dominates R(eta_true) for any true eta, not just decade values.
  procnoise::EtaSearchOptions eta_search = default_eta_search();
  std::size_t eta_median_window = 1;
  /// Start of the default metrics window, in seconds after launch.
  double metrics_window_start = 60.0;

  void validate() const;
};

/// Initial ECR state that reaches `impact` after `flight_time` seconds of
/// ballistic flight, found by Newton shooting on the terminal miss vector.
StateVector solve_boundary_trajectory(const sensing::GeodeticCoord& launch,
                                      const sensing::GeodeticCoord& impact, double flight_time,
                                      const dynamics::DynamicsModel& dyn = dynamics::DynamicsModel::ballistic());

struct TruthTrajectory {
  std::vector<double> epochs;
  std::vector<StateVector> states;
};

/// Truth sampled at the measurement rate from launch (t = 0) to impact.
TruthTrajectory simulate_truth(const ScenarioConfig& cfg);

/// Detections at every truth epoch where the target is above the radar horizon.
std::vector<sensing::RuvMeasurement> simulate_detections(const ScenarioConfig& cfg,
                                                         const TruthTrajectory& truth);

/// Source EKF: initialized per `init_method`, filtered over the remaining detections.
ekf::TrackHistory run_source_filter(const ScenarioConfig& cfg,
                                    const std::vector<sensing::RuvMeasurement>& detections);

ssem::Decorrelation decorrelate_source(const ScenarioConfig& cfg, const ekf::TrackHistory& source);

/// Refilters the reconstructed measurements from the source track's first estimate.
ekf::TrackHistory refilter(const ScenarioConfig& cfg, const ekf::GaussianEstimate& init,
                           const ssem::Decorrelation& decorrelation);

struct EpochRecord {
  double epoch = 0.0;
  StateVector truth = StateVector::Zero();
  ekf::GaussianEstimate source;
  std::optional<ssem::Ssem> ssem;
  ekf::GaussianEstimate refiltered;
  std::optional<ssem::StepDiagnostics> diagnostics;
};

struct RunReport {
  ScenarioConfig config;
  StateVector launch_state = StateVector::Zero();
  TruthTrajectory truth;
  std::vector<sensing::RuvMeasurement> detections;
  /// One record per source-track epoch.
  std::vector<EpochRecord> epochs;
};

/// Full pipeline: truth, detections, source EKF, decorrelation, refiltering.
/// Errors are annotated with the failing stage name.
RunReport run_scenario(const ScenarioConfig& cfg);

// --- metrics ---------------------------------------------------------------

struct ErrorStats {
  Vec3 pos_err = Vec3::Zero();
  Vec3 vel_err = Vec3::Zero();
  Vec3 pos_sigma = Vec3::Zero();
  Vec3 vel_sigma = Vec3::Zero();
  double pos_err_norm = 0.0;
  double vel_err_norm = 0.0;
  /// sqrt(trace) of the position / velocity covariance blocks.
  double pos_sigma_rss = 0.0;
  double vel_sigma_rss = 0.0;
  double nees = 0.0;
};

ErrorStats error_stats(const ekf::GaussianEstimate& est, const StateVector& truth);

struct EpochMetrics {
  double epoch = 0.0;
  ErrorStats source;
  ErrorStats refiltered;
};

struct NeesBand {
  double lower = 0.0;
  double upper = 0.0;
  bool contains(double value) const { return value >= lower && value <= upper; }
};

/// Two-sided chi-square band for NEES averaged over `runs` independent runs:
/// [chi2_{(1-c)/2}(dof n), chi2_{(1+c)/2}(dof n)] / n.
NeesBand chi_square_band(int dof, std::size_t runs, double confidence = 0.95);

struct RmsPair {
  double position = 0.0;
  double velocity = 0.0;
};

struct MetricsSummary {
  std::vector<EpochMetrics> per_epoch;
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t window_samples = 0;
  RmsPair source_rms;
  RmsPair refiltered_rms;
  double source_nees_mean = 0.0;
  double refiltered_nees_mean = 0.0;
  /// Band for a single run (time samples within a run are correlated).
  NeesBand nees_band;
};

struct MetricsWindow {
  /// Inclusive bounds in epoch seconds; unset bounds use the report's extent.
  std::optional<double> start;
  std::optional<double> end;
};

/// Per-epoch errors and sigmas plus RMS and mean NEES over the window. The
/// default window runs from `metrics_window_start` to the last epoch.
MetricsSummary compute_metrics(const RunReport& report, const MetricsWindow& window = {});

}  // namespace retrofilter::scenario
