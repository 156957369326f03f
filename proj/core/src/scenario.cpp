#include "retrofilter/scenario.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/LU>

#include "retrofilter/errors.hpp"

namespace retrofilter::scenario {
namespace {

using dynamics::DynamicsModel;

constexpr int kShootingMaxIterations = 50;
constexpr double kShootingMissTolerance = 1.0;  // m
constexpr double kShootingVelocityStep = 0.1;   // m/s

DynamicsModel ballistic_model(const ScenarioConfig& cfg) {
  return DynamicsModel::ballistic(cfg.integrator_step);
}

}  // namespace

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::Config, msg); };
  if (!(flight_time > 0.0)) fail("flight_time must be positive");
  if (!(meas_rate_hz > 0.0)) fail("meas_rate must be positive");
  if (!(target_rcs_m2 > 0.0)) fail("target RCS must be positive");
  if (!(source_eta >= 0.0) || !(refilter_eta >= 0.0)) fail("process noise intensities must be >= 0");
  if (meas_dim < 1 || meas_dim > kStateDim) fail("meas_dim must be in [1, 6]");
  if (!(integrator_step > 0.0)) fail("integrator_step must be positive");
  if (!(init_velocity_sigma > 0.0)) fail("init_velocity_sigma must be positive");
  if (!(metrics_window_start >= 0.0)) fail("metrics window start must be >= 0");
  if (eta_median_window == 0) fail("eta median window must be >= 1");
  try {
    radar.validate();
    (void)sensing::lla_to_ecr(launch);
    (void)sensing::lla_to_ecr(impact);
  } catch (const Error& e) {
    fail(e.what());
  }
}

StateVector solve_boundary_trajectory(const sensing::GeodeticCoord& launch,
                                      const sensing::GeodeticCoord& impact, double flight_time,
                                      const DynamicsModel& dyn) {
  if (!(flight_time > 0.0)) {
    throw Error(ErrorKind::Domain, "solve_boundary_trajectory: flight time must be positive");
  }
  const Vec3 start = sensing::lla_to_ecr(launch);
  const Vec3 target = sensing::lla_to_ecr(impact);
  if ((target - start).norm() < kShootingMissTolerance) {
    throw Error(ErrorKind::Domain, "solve_boundary_trajectory: launch and impact coincide");
  }

  auto miss = [&](const Vec3& v0) -> Vec3 {
    return position_of(dynamics::propagate(dyn, make_state(start, v0), flight_time)) - target;
  };

  // Chord rate plus enough vertical speed to stay aloft for the flight.
  const double g = dynamics::kEarthMu / start.squaredNorm();
  Vec3 velocity = (target - start) / flight_time + start.normalized() * (0.5 * g * flight_time);

  for (int iter = 0; iter < kShootingMaxIterations; ++iter) {
    const Vec3 residual = miss(velocity);
    if (residual.norm() < kShootingMissTolerance) {
      return make_state(start, velocity);
    }
    Mat3 jac;
    for (int i = 0; i < 3; ++i) {
      Vec3 step = velocity;
      step(i) += kShootingVelocityStep;
      jac.col(i) = (miss(step) - residual) / kShootingVelocityStep;
    }
    velocity -= jac.partialPivLu().solve(residual);
  }
  throw Error(ErrorKind::Convergence, "solve_boundary_trajectory: shooting did not converge");
}

TruthTrajectory simulate_truth(const ScenarioConfig& cfg) {
  const DynamicsModel dyn = ballistic_model(cfg);
  const StateVector x0 = solve_boundary_trajectory(cfg.launch, cfg.impact, cfg.flight_time, dyn);
  const auto last = static_cast<long>(std::floor(cfg.flight_time * cfg.meas_rate_hz + 1e-9));
  TruthTrajectory truth;
  truth.epochs.reserve(static_cast<std::size_t>(last + 1));
  truth.states.reserve(static_cast<std::size_t>(last + 1));
  truth.epochs.push_back(0.0);
  truth.states.push_back(x0);
  for (long k = 1; k <= last; ++k) {
    const double epoch = static_cast<double>(k) / cfg.meas_rate_hz;
    const double dt = epoch - truth.epochs.back();
    truth.states.push_back(dynamics::propagate(dyn, truth.states.back(), dt));
    truth.epochs.push_back(epoch);
  }
  return truth;
}

std::vector<sensing::RuvMeasurement> simulate_detections(const ScenarioConfig& cfg,
                                                         const TruthTrajectory& truth) {
  sensing::RandomStream rng(cfg.seed);
  std::vector<sensing::RuvMeasurement> out;
  out.reserve(truth.epochs.size());
  for (std::size_t i = 0; i < truth.epochs.size(); ++i) {
    if (auto det = sensing::simulate_detection(cfg.radar, truth.states[i], cfg.target_rcs_m2,
                                               truth.epochs[i], rng)) {
      out.push_back(*det);
    }
  }
  return out;
}

ekf::TrackHistory run_source_filter(const ScenarioConfig& cfg,
                                    const std::vector<sensing::RuvMeasurement>& detections) {
  const std::size_t used = cfg.init_method == InitMethod::TwoPoint ? 2 : 1;
  if (detections.size() < used + 1) {
    throw Error(ErrorKind::Domain, "source filter needs more detections than initialization uses");
  }
  const ekf::GaussianEstimate init =
      cfg.init_method == InitMethod::TwoPoint
          ? ekf::init_track_two_point(detections[0], detections[1])
          : ekf::init_track(detections.front(), cfg.init_velocity_sigma);
  std::vector<ekf::Measurement> measurements;
  measurements.reserve(detections.size() - used);
  for (std::size_t i = used; i < detections.size(); ++i) {
    measurements.push_back(ekf::from_ruv(detections[i]));
  }
  ekf::TrackHistory history =
      ekf::run_filter(measurements, ballistic_model(cfg), dynamics::ProcessNoiseModel{cfg.source_eta},
                      init, {cfg.update_form});
  history.meas_dim = cfg.meas_dim;
  return history;
}

ssem::Decorrelation decorrelate_source(const ScenarioConfig& cfg, const ekf::TrackHistory& source) {
  if (cfg.eta_mode == EtaMode::Known) {
    return ssem::decorrelate_track(source, ssem::KnownEta{cfg.source_eta});
  }
  return ssem::decorrelate_track(source, ssem::EstimatedEta{cfg.eta_search, cfg.eta_median_window});
}

ekf::TrackHistory refilter(const ScenarioConfig& cfg, const ekf::GaussianEstimate& init,
                           const ssem::Decorrelation& decorrelation) {
  std::vector<ekf::Measurement> measurements;
  measurements.reserve(decorrelation.measurements.size());
  for (const ssem::Ssem& s : decorrelation.measurements) {
    measurements.push_back(ssem::to_measurement(s));
  }
  ekf::TrackHistory history =
      ekf::run_filter(measurements, ballistic_model(cfg),
                      dynamics::ProcessNoiseModel{cfg.refilter_eta}, init, {cfg.update_form});
  history.meas_dim = cfg.meas_dim;
  return history;
}

RunReport run_scenario(const ScenarioConfig& cfg) {
  with_stage("config", [&] { cfg.validate(); });

  RunReport report;
  report.config = cfg;
  report.truth = with_stage("truth", [&] { return simulate_truth(cfg); });
  report.launch_state = report.truth.states.front();
  report.detections = with_stage("detect", [&] { return simulate_detections(cfg, report.truth); });
  const ekf::TrackHistory source =
      with_stage("track", [&] { return run_source_filter(cfg, report.detections); });
  const ssem::Decorrelation decorrelation =
      with_stage("decorrelate", [&] { return decorrelate_source(cfg, source); });
  const ekf::TrackHistory refiltered =
      with_stage("refilter", [&] { return refilter(cfg, source.estimates.front(), decorrelation); });

  with_stage("assemble", [&] {
    const DynamicsModel dyn = ballistic_model(cfg);
    const dynamics::ProcessNoiseModel refilter_noise{cfg.refilter_eta};
    std::size_t next_ssem = 0;
    std::size_t next_refiltered = 0;
    report.epochs.reserve(source.estimates.size());
    for (std::size_t k = 0; k < source.estimates.size(); ++k) {
      EpochRecord rec;
      rec.source = source.estimates[k];
      rec.epoch = rec.source.epoch;
      const auto truth_index = static_cast<std::size_t>(std::lround(rec.epoch * cfg.meas_rate_hz));
      rec.truth = report.truth.states.at(truth_index);
      if (k > 0) {
        rec.diagnostics = decorrelation.diagnostics.at(k - 1);
        if (next_ssem < decorrelation.measurements.size() &&
            decorrelation.measurements[next_ssem].epoch == rec.epoch) {
          rec.ssem = decorrelation.measurements[next_ssem++];
        }
      }
      if (next_refiltered < refiltered.estimates.size() &&
          refiltered.estimates[next_refiltered].epoch == rec.epoch) {
        rec.refiltered = refiltered.estimates[next_refiltered++];
      } else {
        // Skipped step: carry the refiltered prediction.
        const ekf::GaussianEstimate& prev = report.epochs.back().refiltered;
        const double dt = rec.epoch - prev.epoch;
        rec.refiltered = ekf::predict(prev, dyn, refilter_noise.q(dt), dt);
        rec.refiltered.epoch = rec.epoch;
      }
      report.epochs.push_back(std::move(rec));
    }
  });
  return report;
}

}  // namespace retrofilter::scenario
