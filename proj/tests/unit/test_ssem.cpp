#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "retrofilter/errors.hpp"
#include "retrofilter/procnoise.hpp"
#include "retrofilter/spdlinalg.hpp"
#include "retrofilter/ssem.hpp"

using namespace retrofilter;
using namespace retrofilter::ssem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

ekf::TrackHistory linear_history(const oracle::LinearScenario& lin) {
  ekf::TrackHistory hist;
  hist.dynamics = dynamics::DynamicsModel::constant_velocity();
  hist.meas_dim = 3;
  for (const auto& s : lin.steps) {
    ekf::GaussianEstimate e;
    e.epoch = s.epoch;
    e.mean = s.mean;
    e.cov = s.cov;
    hist.estimates.push_back(e);
  }
  return hist;
}

MatrixXd h3() {
  MatrixXd h = MatrixXd::Zero(3, 6);
  h.leftCols(3).setIdentity();
  return h;
}

}  // namespace

TEST(InformationGain, Examples) {
  std::mt19937_64 rng(1);
  const MatrixXd p = oracle::random_spd(6, rng);
  EXPECT_LE(information_gain(p, p).cwiseAbs().maxCoeff(), 1e-12 * p.inverse().cwiseAbs().maxCoeff());

  const MatrixXd d = Eigen::VectorXd::LinSpaced(6, 0.5, 3.0).asDiagonal();
  const MatrixXd p_post = (p.inverse() + d).inverse();
  EXPECT_LE(oracle::rel_err(information_gain(p_post, p), d), 1e-9);
}

TEST(InformationGain, MatchesEkfStep) {
  std::mt19937_64 rng(2);
  const MatrixXd r = oracle::random_spd(3, rng, 3.0);
  ekf::GaussianEstimate pred;
  pred.cov = oracle::random_spd(6, rng, 20.0);
  pred.mean.setConstant(1.0);
  const auto post = ekf::update(pred, Eigen::Vector3d(2, 0, -1), r, ekf::StateSubspace{3});
  const MatrixXd want = h3().transpose() * r.inverse() * h3();
  EXPECT_LE(oracle::rel_err(information_gain(post.cov, pred.cov), want), 1e-6);
}

TEST(ExtractCovariance, Examples) {
  MatrixXd j = MatrixXd::Zero(6, 6);
  j.topLeftCorner(3, 3) = Eigen::Vector3d(1, 4, 9).asDiagonal();
  const auto out = extract_covariance(j, 3);
  EXPECT_TRUE(out.cov.isApprox(Eigen::Vector3d(1, 0.25, 1.0 / 9.0).asDiagonal().toDenseMatrix()));
  EXPECT_EQ(out.off_block_residual, 0.0);

  j(4, 4) = 2.0;
  EXPECT_GT(extract_covariance(j, 3).off_block_residual, 0.0);

  MatrixXd bad = j;
  bad(1, 1) = -1.0;
  try {
    extract_covariance(bad, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
  }
}

TEST(ExtractGain, Examples) {
  std::mt19937_64 rng(3);
  const MatrixXd p = oracle::random_spd(6, rng);
  const auto zero = extract_gain(p, p, 3);
  EXPECT_LE(zero.gain.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(zero.gain.rows(), 6);
  EXPECT_EQ(zero.gain.cols(), 3);

  MatrixXd post(1, 1), pred(1, 1);
  post << 1.0;
  pred << 2.0;
  EXPECT_NEAR(extract_gain(post, pred, 1).gain(0, 0), 0.5, 1e-15);
}

TEST(ExtractGain, MatchesKalmanGainOfLinearFilter) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(30, eta, 1.0, 4u);
  for (std::size_t k = 1; k < lin.steps.size(); ++k) {
    const MatrixXd f = oracle::cv_f(1.0);
    const MatrixXd pp = f * lin.steps[k - 1].cov * f.transpose() + oracle::cv_q(eta, 1.0);
    const MatrixXd s = h3() * pp * h3().transpose() + lin.steps[k].r;
    const MatrixXd kalman = pp * h3().transpose() * s.inverse();
    const auto got = extract_gain(lin.steps[k].cov, pp, 3);
    EXPECT_LE((got.gain - kalman).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(got.discarded_norm, 1e-8);
  }
}

TEST(ReconstructZ, DegenerateGainIsRankError) {
  std::mt19937_64 rng(5);
  const MatrixXd p = oracle::random_spd(6, rng);
  const VectorXd x = VectorXd::Ones(6);
  try {
    reconstruct_z(MatrixXd::Zero(6, 3), x, p, p, x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Rank);
  }
}

TEST(ReconstructZ, SquareGainIsInverse) {
  std::mt19937_64 rng(6);
  const MatrixXd p_pred = oracle::random_spd(6, rng, 4.0);
  const MatrixXd p_post = (p_pred.inverse() + oracle::random_spd(6, rng)).inverse();
  const MatrixXd k = MatrixXd::Identity(6, 6) - p_post * p_pred.inverse();
  VectorXd x_post(6), x_pred(6);
  x_post << 1, 2, 3, 4, 5, 6;
  x_pred << 0, -1, 2, 1, 1, 0;
  const VectorXd want = k.inverse() * (x_post - p_post * p_pred.inverse() * x_pred);
  EXPECT_LE(oracle::rel_err(reconstruct_z(k, x_post, p_post, p_pred, x_pred), want), 1e-9);
}

TEST(DecorrelateTrack, LinearExactRecovery) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(200, eta, 1.0, 8u);
  const auto dec = decorrelate_track(linear_history(lin), KnownEta{eta});
  ASSERT_EQ(dec.measurements.size(), 200u);
  ASSERT_EQ(dec.diagnostics.size(), 200u);
  for (std::size_t k = 0; k < dec.measurements.size(); ++k) {
    const auto& got = dec.measurements[k];
    EXPECT_EQ(got.epoch, lin.steps[k + 1].epoch);
    EXPECT_EQ(got.eta_used, eta);
    EXPECT_LE((got.z - lin.steps[k + 1].z).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(oracle::rel_err(got.cov, lin.steps[k + 1].r), 1e-8);
    EXPECT_LE(dec.diagnostics[k].off_block_residual, 1e-8);
  }
}

TEST(DecorrelateTrack, RoundTripThroughFilter) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(100, eta, 1.0, 9u);
  const auto hist = linear_history(lin);
  const auto dec = decorrelate_track(hist, KnownEta{eta});
  std::vector<ekf::Measurement> ms;
  for (const auto& s : dec.measurements) ms.push_back(to_measurement(s));
  const auto again = ekf::run_filter(ms, hist.dynamics, {eta}, hist.estimates.front());
  for (std::size_t k = 0; k < hist.estimates.size(); ++k) {
    EXPECT_LE(oracle::rel_err(again.estimates[k].mean, hist.estimates[k].mean), 1e-8);
    EXPECT_LE(oracle::rel_err(again.estimates[k].cov, hist.estimates[k].cov), 1e-8);
  }
}

TEST(DecorrelateTrack, IdenticalEstimatesAreDegenerate) {
  ekf::TrackHistory hist;
  hist.dynamics = dynamics::DynamicsModel::constant_velocity();
  ekf::GaussianEstimate e;
  e.cov = StateMatrix::Identity();
  hist.estimates = {e, e};
  hist.estimates[1].epoch = 1.0;
  hist.estimates[1].mean = dynamics::cv_transition(1.0) * e.mean;
  hist.estimates[1].cov = dynamics::cv_transition(1.0) * e.cov * dynamics::cv_transition(1.0).transpose();
  try {
    decorrelate_track(hist, KnownEta{0.0});
    FAIL();
  } catch (const Error& err) {
    EXPECT_EQ(err.kind(), ErrorKind::DegenerateStep);
    EXPECT_NE(std::string(err.what()).find("1"), std::string::npos);
  }
}

TEST(DecorrelateTrack, RejectsShortOrDownsampledHistories) {
  const auto lin = oracle::run_linear_scenario(5, 0.05, 1.0, 10u);
  auto hist = linear_history(lin);
  hist.downsampled = true;
  EXPECT_THROW(decorrelate_track(hist, KnownEta{0.05}), Error);
  hist.downsampled = false;
  hist.estimates.resize(1);
  EXPECT_THROW(decorrelate_track(hist, KnownEta{0.05}), Error);
}

TEST(DecorrelateTrack, InfeasibleKnownEtaPropagates) {
  // Far too little process noise: the posterior is wider than the prediction allows.
  const auto lin = oracle::run_linear_scenario(20, 5.0, 1.0, 11u);
  try {
    decorrelate_track(linear_history(lin), KnownEta{0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_TRUE(e.kind() == ErrorKind::Infeasible || e.kind() == ErrorKind::Singular) << e.what();
  }
}

TEST(DecorrelateTrack, EstimatedEtaRecoversLinearMeasurements) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(50, eta, 1.0, 12u);
  procnoise::EtaSearchOptions opts;
  opts.rel_tol = 1e-10;
  const auto dec = decorrelate_track(linear_history(lin), EstimatedEta{opts, 1});
  ASSERT_EQ(dec.measurements.size(), 50u);
  for (std::size_t k = 0; k < dec.measurements.size(); ++k) {
    ASSERT_TRUE(dec.diagnostics[k].eta_estimate.has_value());
    EXPECT_NEAR(dec.measurements[k].eta_used / eta, 1.0, 1e-4);
    EXPECT_LE(oracle::rel_err(dec.measurements[k].cov, lin.steps[k + 1].r), 1e-3);
  }
}

TEST(DecorrelateTrack, MedianWindowSmoothsEstimates) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(30, eta, 1.0, 13u);
  const auto dec = decorrelate_track(linear_history(lin), EstimatedEta{{}, 5});
  for (const auto& d : dec.diagnostics) EXPECT_NEAR(d.eta_used / eta, 1.0, 1e-4);
}

TEST(ExtractCovariance, AntitoneInEta) {
  const double eta = 0.05;
  const auto lin = oracle::run_linear_scenario(40, eta, 1.0, 14u);
  const MatrixXd b = dynamics::noise_basis(1.0);
  const MatrixXd f = oracle::cv_f(1.0);
  const auto& prev = lin.steps[39];
  const auto& cur = lin.steps[40];
  MatrixXd r_prev;
  for (double scale : {1.0, 1.5, 2.0, 4.0, 10.0, 100.0}) {
    const MatrixXd j = procnoise::j_of_eta(scale * eta, cur.cov, prev.cov, f, b);
    const MatrixXd r = extract_covariance(j, 3).cov;
    if (r_prev.size() > 0) {
      EXPECT_TRUE(linalg::psd_dominates(r_prev, r, 1e-12 * r_prev.trace())) << scale;
    }
    r_prev = r;
  }
}
