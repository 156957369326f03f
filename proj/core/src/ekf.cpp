#include "retrofilter/ekf.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "retrofilter/errors.hpp"
#include "retrofilter/spdlinalg.hpp"

namespace retrofilter::ekf {

using dynamics::DynamicsModel;
using dynamics::ProcessNoiseModel;

void TrackHistory::validate() const {
  if (meas_dim < 1 || meas_dim > kStateDim) {
    std::ostringstream os;
    os << "track history: measurement dimension " << meas_dim << " outside [1, " << kStateDim << "]";
    throw Error(ErrorKind::Domain, os.str());
  }
  for (std::size_t i = 1; i < estimates.size(); ++i) {
    if (!(estimates[i].epoch > estimates[i - 1].epoch)) {
      std::ostringstream os;
      os << "track history: epochs must strictly increase (index " << i << ", epoch "
         << estimates[i].epoch << ")";
      throw Error(ErrorKind::Domain, os.str());
    }
  }
}

int measurement_dim(const MeasurementFunction& h) {
  if (const auto* sub = std::get_if<StateSubspace>(&h)) return sub->dim;
  return 3;
}

Eigen::VectorXd evaluate(const MeasurementFunction& h, const StateVector& x) {
  if (const auto* ruv = std::get_if<RuvModel>(&h)) {
    return sensing::h_ruv(x, ruv->site_ecr, ruv->frame);
  }
  const int dim = std::get<StateSubspace>(h).dim;
  return x.head(dim);
}

Eigen::MatrixXd measurement_jacobian(const MeasurementFunction& h, const StateVector& x) {
  if (const auto* ruv = std::get_if<RuvModel>(&h)) {
    return sensing::ruv_jacobian(x, ruv->site_ecr, ruv->frame);
  }
  const int dim = std::get<StateSubspace>(h).dim;
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(dim, kStateDim);
  jac.leftCols(dim).setIdentity();
  return jac;
}

Measurement from_ruv(const sensing::RuvMeasurement& m) {
  return {m.epoch, m.z, m.noise_cov, RuvModel{m.site_ecr, m.frame}};
}

GaussianEstimate predict(const GaussianEstimate& est, const DynamicsModel& dyn,
                         const StateMatrix& q, double dt, StateMatrix& transition) {
  transition = dynamics::jacobian(dyn, est.mean, dt);
  GaussianEstimate out;
  out.epoch = est.epoch + dt;
  out.mean = dynamics::propagate(dyn, est.mean, dt);
  out.cov = linalg::symmetrize(transition * est.cov * transition.transpose() + q);
  return out;
}

GaussianEstimate predict(const GaussianEstimate& est, const DynamicsModel& dyn,
                         const StateMatrix& q, double dt) {
  StateMatrix transition;
  return predict(est, dyn, q, dt, transition);
}

GaussianEstimate update(const GaussianEstimate& pred, const Eigen::VectorXd& z,
                        const Eigen::MatrixXd& noise_cov, const MeasurementFunction& h,
                        CovarianceUpdate form) {
  const int m = measurement_dim(h);
  if (z.size() != m || noise_cov.rows() != m || noise_cov.cols() != m) {
    std::ostringstream os;
    os << "update: measurement dimension " << z.size() << " / covariance " << noise_cov.rows() << "x"
       << noise_cov.cols() << " do not match model dimension " << m;
    throw Error(ErrorKind::Dimension, os.str());
  }
  const Eigen::MatrixXd jac = measurement_jacobian(h, pred.mean);
  const Eigen::MatrixXd pht = pred.cov * jac.transpose();
  const Eigen::MatrixXd s = linalg::symmetrize(jac * pht + noise_cov);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("update: innovation covariance is not positive definite",
                           linalg::min_eigenvalue(s));
  }
  // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P.
  const Eigen::MatrixXd gain = llt.solve(pht.transpose()).transpose();
  const Eigen::VectorXd innovation = z - evaluate(h, pred.mean);

  GaussianEstimate post;
  post.epoch = pred.epoch;
  post.mean = pred.mean + gain * innovation;
  if (form == CovarianceUpdate::Joseph) {
    const StateMatrix ikh = StateMatrix::Identity() - gain * jac;
    post.cov = linalg::symmetrize(ikh * pred.cov * ikh.transpose() +
                                  gain * noise_cov * gain.transpose());
  } else {
    post.cov = linalg::symmetrize(pred.cov - gain * s * gain.transpose());
  }
  return post;
}

double information_form_residual(const GaussianEstimate& pred, const GaussianEstimate& post,
                                 const Eigen::MatrixXd& noise_cov, const MeasurementFunction& h) {
  const Eigen::MatrixXd jac = measurement_jacobian(h, pred.mean);
  const Eigen::MatrixXd expected = jac.transpose() * linalg::safe_invert(noise_cov) * jac;
  const Eigen::MatrixXd gained = linalg::safe_invert(post.cov) - linalg::safe_invert(pred.cov);
  return (gained - expected).norm() / expected.norm();
}

GaussianEstimate init_track(const sensing::RuvMeasurement& first, double velocity_sigma) {
  if (!(velocity_sigma > 0.0)) {
    throw Error(ErrorKind::Domain, "init_track: velocity sigma must be positive");
  }
  const Mat3 g = sensing::ruv_to_ecr_jacobian(first.z, first.frame);
  GaussianEstimate est;
  est.epoch = first.epoch;
  est.mean = make_state(sensing::ruv_to_ecr(first.z, first.site_ecr, first.frame), Vec3::Zero());
  est.cov.setZero();
  est.cov.topLeftCorner<3, 3>() = linalg::symmetrize(g * first.noise_cov * g.transpose());
  est.cov.bottomRightCorner<3, 3>() = velocity_sigma * velocity_sigma * Mat3::Identity();
  return est;
}

GaussianEstimate init_track_two_point(const sensing::RuvMeasurement& first,
                                      const sensing::RuvMeasurement& second) {
  const double dt = second.epoch - first.epoch;
  if (!(dt > 0.0)) {
    throw Error(ErrorKind::Domain, "init_track_two_point: detections must be time-ordered");
  }
  const Mat3 g1 = sensing::ruv_to_ecr_jacobian(first.z, first.frame);
  const Mat3 g2 = sensing::ruv_to_ecr_jacobian(second.z, second.frame);
  const Mat3 c1 = g1 * first.noise_cov * g1.transpose();
  const Mat3 c2 = g2 * second.noise_cov * g2.transpose();
  const Vec3 p1 = sensing::ruv_to_ecr(first.z, first.site_ecr, first.frame);
  const Vec3 p2 = sensing::ruv_to_ecr(second.z, second.site_ecr, second.frame);

  GaussianEstimate est;
  est.epoch = second.epoch;
  est.mean = make_state(p2, (p2 - p1) / dt);
  est.cov.topLeftCorner<3, 3>() = c2;
  est.cov.topRightCorner<3, 3>() = c2 / dt;
  est.cov.bottomLeftCorner<3, 3>() = c2 / dt;
  est.cov.bottomRightCorner<3, 3>() = (c1 + c2) / (dt * dt);
  est.cov = linalg::symmetrize(est.cov);
  return est;
}

TrackHistory run_filter(std::span<const Measurement> measurements, const DynamicsModel& dyn,
                        const ProcessNoiseModel& noise, const GaussianEstimate& init,
                        const FilterOptions& options) {
  TrackHistory history;
  history.dynamics = dyn;
  history.declared_noise = noise;
  history.estimates.reserve(measurements.size() + 1);
  history.estimates.push_back(init);
  if (!measurements.empty()) {
    history.meas_dim = measurement_dim(measurements.front().model);
  }

  GaussianEstimate current = init;
  for (const Measurement& meas : measurements) {
    try {
      const double dt = meas.epoch - current.epoch;
      if (!(dt > 0.0)) {
        throw Error(ErrorKind::Domain, "measurements must be strictly after the previous estimate");
      }
      const GaussianEstimate pred = predict(current, dyn, noise.q(dt), dt);
      current = update(pred, meas.z, meas.noise_cov, meas.model, options.update_form);
      current.epoch = meas.epoch;
    } catch (const Error& e) {
      std::ostringstream os;
      os << "filter step at epoch " << meas.epoch;
      rethrow_with_context(e, os.str());
    }
    history.estimates.push_back(current);
  }
  return history;
}

double nees(const GaussianEstimate& est, const StateVector& truth) {
  const StateVector err = est.mean - truth;
  return err.dot(est.cov.llt().solve(err));
}

}  // namespace retrofilter::ekf
