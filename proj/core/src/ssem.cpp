#include "retrofilter/ssem.hpp"

#include <algorithm>
#include <sstream>

#include <Eigen/SVD>

#include "retrofilter/errors.hpp"
#include "retrofilter/spdlinalg.hpp"

namespace retrofilter::ssem {
namespace {

void require_meas_dim(int meas_dim, Eigen::Index n) {
  if (meas_dim < 1 || meas_dim > n) {
    std::ostringstream os;
    os << "measurement dimension " << meas_dim << " outside [1, " << n << "]";
    throw Error(ErrorKind::Dimension, os.str());
  }
}

double median(std::vector<double> values) {
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
  std::nth_element(values.begin(), mid, values.end());
  if (values.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(values.begin(), mid);
  return 0.5 * (lower + upper);
}

struct Prediction {
  ekf::GaussianEstimate estimate;
  StateMatrix transition;
};

Prediction predict_between(const ekf::GaussianEstimate& previous,
                           const ekf::GaussianEstimate& current,
                           const dynamics::DynamicsModel& dyn, double eta) {
  const double dt = current.epoch - previous.epoch;
  Prediction p;
  p.estimate = ekf::predict(previous, dyn, dynamics::ProcessNoiseModel{eta}.q(dt), dt, p.transition);
  p.estimate.epoch = current.epoch;
  return p;
}

}  // namespace

ekf::Measurement to_measurement(const Ssem& s) {
  return {s.epoch, s.z, s.cov, ekf::StateSubspace{static_cast<int>(s.z.size())}};
}

Eigen::MatrixXd information_gain(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred) {
  if (p_post.rows() != p_pred.rows() || p_post.cols() != p_pred.cols()) {
    throw Error(ErrorKind::Dimension, "information_gain: covariance dimensions differ");
  }
  return linalg::symmetrize(linalg::safe_invert(p_post) - linalg::safe_invert(p_pred));
}

CovarianceExtraction extract_covariance(const Eigen::MatrixXd& gain, int meas_dim) {
  if (gain.rows() != gain.cols()) {
    throw Error(ErrorKind::Dimension, "extract_covariance: information gain must be square");
  }
  require_meas_dim(meas_dim, gain.rows());
  const Eigen::MatrixXd block = linalg::symmetrize(gain.topLeftCorner(meas_dim, meas_dim));
  const double trace = block.trace();
  const double lambda_min = linalg::min_eigenvalue(block);
  if (!(trace > 0.0) || !(lambda_min > linalg::kSingularRelTol * trace / meas_dim)) {
    std::ostringstream os;
    os << "extract_covariance: leading " << meas_dim << "x" << meas_dim
       << " information block is not positive definite (min eigenvalue " << lambda_min << ")";
    throw Error(ErrorKind::Infeasible, os.str());
  }
  CovarianceExtraction out;
  out.cov = linalg::safe_invert(block);
  Eigen::MatrixXd outside = gain;
  outside.topLeftCorner(meas_dim, meas_dim).setZero();
  const double total = gain.norm();
  out.off_block_residual = total > 0.0 ? outside.norm() / total : 0.0;
  return out;
}

GainExtraction extract_gain(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred,
                            int meas_dim) {
  if (p_post.rows() != p_pred.rows() || p_post.cols() != p_pred.cols()) {
    throw Error(ErrorKind::Dimension, "extract_gain: covariance dimensions differ");
  }
  const auto n = p_pred.rows();
  require_meas_dim(meas_dim, n);
  const Eigen::MatrixXd full =
      Eigen::MatrixXd::Identity(n, n) - p_post * linalg::safe_invert(p_pred);
  GainExtraction out;
  out.gain = full.leftCols(meas_dim);
  out.discarded_norm = full.rightCols(n - meas_dim).norm();
  return out;
}

Eigen::VectorXd reconstruct_z(const Eigen::MatrixXd& gain, const Eigen::VectorXd& x_post,
                              const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_pred,
                              const Eigen::VectorXd& x_pred) {
  const auto n = gain.rows();
  if (x_post.size() != n || x_pred.size() != n || p_post.rows() != n || p_pred.rows() != n) {
    throw Error(ErrorKind::Dimension, "reconstruct_z: inconsistent dimensions");
  }
  const Eigen::VectorXd rhs = x_post - p_post * linalg::safe_invert(p_pred) * x_pred;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gain, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double cutoff = kPinvRelCutoff * (sv.size() > 0 ? sv(0) : 0.0);
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) ++rank;
  }
  if (rank < gain.cols()) {
    std::ostringstream os;
    os << "reconstruct_z: gain has rank " << rank << " < " << gain.cols();
    throw Error(ErrorKind::Rank, os.str());
  }
  const Eigen::VectorXd projected = svd.matrixU().transpose() * rhs;
  return svd.matrixV() * projected.cwiseQuotient(sv);
}

Ssem decorrelate_step(const ekf::GaussianEstimate& previous, const ekf::GaussianEstimate& current,
                      const dynamics::DynamicsModel& dyn, int meas_dim, double eta,
                      StepDiagnostics* diagnostics) {
  const Prediction pred = predict_between(previous, current, dyn, eta);
  const Eigen::MatrixXd gain_info = information_gain(current.cov, pred.estimate.cov);

  const double scale = linalg::max_abs(linalg::safe_invert(current.cov));
  if (linalg::max_abs(gain_info) <= 1e-12 * scale) {
    throw Error(ErrorKind::DegenerateStep, "estimate carries no information beyond its prediction");
  }

  const CovarianceExtraction cov = extract_covariance(gain_info, meas_dim);
  const GainExtraction gain = extract_gain(current.cov, pred.estimate.cov, meas_dim);

  Ssem out;
  out.epoch = current.epoch;
  out.cov = cov.cov;
  out.z = reconstruct_z(gain.gain, current.mean, current.cov, pred.estimate.cov, pred.estimate.mean);
  out.eta_used = eta;
  if (diagnostics != nullptr) {
    diagnostics->epoch = current.epoch;
    diagnostics->eta_used = eta;
    diagnostics->off_block_residual = cov.off_block_residual;
    diagnostics->discarded_gain_norm = gain.discarded_norm;
  }
  return out;
}

Decorrelation decorrelate_track(const ekf::TrackHistory& history, const EtaProvider& eta) {
  history.validate();
  if (history.downsampled) {
    throw Error(ErrorKind::Domain,
                "decorrelate_track: downsampled histories cannot be decorrelated");
  }
  if (history.estimates.size() < 2) {
    throw Error(ErrorKind::Domain, "decorrelate_track: need at least two estimates");
  }

  const auto* estimated = std::get_if<EstimatedEta>(&eta);
  Decorrelation out;
  out.measurements.reserve(history.estimates.size() - 1);
  out.diagnostics.reserve(history.estimates.size() - 1);
  std::vector<double> recent;

  for (std::size_t k = 1; k < history.estimates.size(); ++k) {
    const ekf::GaussianEstimate& previous = history.estimates[k - 1];
    const ekf::GaussianEstimate& current = history.estimates[k];
    StepDiagnostics diag;
    diag.epoch = current.epoch;
    try {
      double step_eta = 0.0;
      if (estimated != nullptr) {
        const double dt = current.epoch - previous.epoch;
        const StateMatrix transition = dynamics::jacobian(history.dynamics, previous.mean, dt);
        try {
          diag.eta_estimate = procnoise::estimate_eta(current.cov, previous.cov, transition,
                                                      dynamics::noise_basis(dt), estimated->options);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::EstimationFailure) throw;
          diag.skipped = true;
          diag.note = e.what();
          out.diagnostics.push_back(std::move(diag));
          continue;
        }
        step_eta = diag.eta_estimate->eta_hat;
        if (estimated->median_window > 1) {
          recent.push_back(step_eta);
          if (recent.size() > estimated->median_window) recent.erase(recent.begin());
          step_eta = median(recent);
        }
      } else {
        step_eta = std::get<KnownEta>(eta).eta;
      }
      out.measurements.push_back(
          decorrelate_step(previous, current, history.dynamics, history.meas_dim, step_eta, &diag));
    } catch (const Error& e) {
      std::ostringstream os;
      os << "decorrelation step at epoch " << current.epoch;
      rethrow_with_context(e, os.str());
    }
    out.diagnostics.push_back(std::move(diag));
  }
  return out;
}

}  // namespace retrofilter::ssem
