#include "retrofilter/scenario.hpp"

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <Eigen/Cholesky>

#include "retrofilter/errors.hpp"

namespace retrofilter::scenario {

ErrorStats error_stats(const ekf::GaussianEstimate& est, const StateVector& truth) {
  ErrorStats s;
  const StateVector err = est.mean - truth;
  s.pos_err = err.head<3>();
  s.vel_err = err.tail<3>();
  s.pos_sigma = est.cov.diagonal().head<3>().cwiseMax(0.0).cwiseSqrt();
  s.vel_sigma = est.cov.diagonal().tail<3>().cwiseMax(0.0).cwiseSqrt();
  s.pos_err_norm = s.pos_err.norm();
  s.vel_err_norm = s.vel_err.norm();
  s.pos_sigma_rss = s.pos_sigma.norm();
  s.vel_sigma_rss = s.vel_sigma.norm();
  s.nees = ekf::nees(est, truth);
  return s;
}

NeesBand chi_square_band(int dof, std::size_t runs, double confidence) {
  if (dof < 1 || runs == 0 || !(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorKind::Domain, "chi_square_band: invalid arguments");
  }
  const double n = static_cast<double>(runs);
  const boost::math::chi_squared dist(static_cast<double>(dof) * n);
  const double tail = 0.5 * (1.0 - confidence);
  return {boost::math::quantile(dist, tail) / n, boost::math::quantile(dist, 1.0 - tail) / n};
}

MetricsSummary compute_metrics(const RunReport& report, const MetricsWindow& window) {
  MetricsSummary out;
  if (report.epochs.empty()) return out;

  out.per_epoch.reserve(report.epochs.size());
  for (const EpochRecord& rec : report.epochs) {
    out.per_epoch.push_back(
        {rec.epoch, error_stats(rec.source, rec.truth), error_stats(rec.refiltered, rec.truth)});
  }

  out.window_start = window.start.value_or(report.config.metrics_window_start);
  out.window_end = window.end.value_or(report.epochs.back().epoch);

  double src_pos = 0.0, src_vel = 0.0, ref_pos = 0.0, ref_vel = 0.0;
  double src_nees = 0.0, ref_nees = 0.0;
  std::size_t count = 0;
  for (const EpochMetrics& m : out.per_epoch) {
    if (m.epoch < out.window_start || m.epoch > out.window_end) continue;
    ++count;
    src_pos += m.source.pos_err.squaredNorm();
    src_vel += m.source.vel_err.squaredNorm();
    ref_pos += m.refiltered.pos_err.squaredNorm();
    ref_vel += m.refiltered.vel_err.squaredNorm();
    src_nees += m.source.nees;
    ref_nees += m.refiltered.nees;
  }
  out.window_samples = count;
  if (count == 0) return out;
  const double n = static_cast<double>(count);
  out.source_rms = {std::sqrt(src_pos / n), std::sqrt(src_vel / n)};
  out.refiltered_rms = {std::sqrt(ref_pos / n), std::sqrt(ref_vel / n)};
  out.source_nees_mean = src_nees / n;
  out.refiltered_nees_mean = ref_nees / n;
  out.nees_band = chi_square_band(kStateDim, 1);
  return out;
}

}  // namespace retrofilter::scenario
