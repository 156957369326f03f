#include <cmath>
#include <random>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <gtest/gtest.h>

#include "oracles.hpp"
#include "retrofilter/ekf.hpp"
#include "retrofilter/errors.hpp"
#include "retrofilter/spdlinalg.hpp"

using namespace retrofilter;
using namespace retrofilter::ekf;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

GaussianEstimate estimate(double epoch, const StateVector& mean, const StateMatrix& cov) {
  GaussianEstimate e;
  e.epoch = epoch;
  e.mean = mean;
  e.cov = cov;
  return e;
}

StateVector sample_mean() {
  StateVector x;
  x << 10.0, -20.0, 5.0, 1.0, 2.0, -1.0;
  return x;
}

}  // namespace

TEST(Predict, ZeroStepNoNoise) {
  const auto e = estimate(3.0, sample_mean(), 2.0 * StateMatrix::Identity());
  const auto p = predict(e, dynamics::DynamicsModel::constant_velocity(), StateMatrix::Zero(), 0.0);
  EXPECT_EQ(p.mean, e.mean);
  EXPECT_EQ(p.cov, e.cov);
  EXPECT_EQ(p.epoch, 3.0);
}

TEST(Predict, ConstantVelocityClosedForm) {
  const auto e = estimate(0.0, sample_mean(), StateMatrix::Identity());
  const auto p = predict(e, dynamics::DynamicsModel::constant_velocity(), StateMatrix::Zero(), 1.0);
  EXPECT_TRUE(p.cov.topLeftCorner(3, 3).isApprox(2.0 * Mat3::Identity()));
  EXPECT_TRUE(p.cov.topRightCorner(3, 3).isApprox(Mat3::Identity()));
  EXPECT_TRUE(p.cov.bottomRightCorner(3, 3).isApprox(Mat3::Identity()));
  EXPECT_EQ(p.epoch, 1.0);
  EXPECT_EQ(p.mean.head<3>(), (sample_mean().head<3>() + sample_mean().tail<3>()).eval());
}

TEST(Predict, ProcessNoiseAddsStrictly) {
  const auto e = estimate(0.0, sample_mean(), StateMatrix::Identity());
  const auto dyn = dynamics::DynamicsModel::constant_velocity();
  const StateMatrix q = dynamics::q_matrix({0.5}, 1.0) + 1e-3 * StateMatrix::Identity();
  StateMatrix f;
  const auto p = predict(e, dyn, q, 1.0, f);
  EXPECT_EQ(f, dynamics::cv_transition(1.0));
  EXPECT_GT(linalg::min_eigenvalue(p.cov - f * e.cov * f.transpose()), 1e-4);
}

TEST(Update, ScalarTextbook) {
  // One observed coordinate; others carry no information and stay put.
  auto e = estimate(0.0, StateVector::Zero(), StateMatrix::Identity());
  VectorXd z(1);
  z << 2.0;
  MatrixXd r(1, 1);
  r << 1.0;
  const auto u = update(e, z, r, StateSubspace{1});
  EXPECT_DOUBLE_EQ(u.mean(0), 1.0);
  EXPECT_DOUBLE_EQ(u.cov(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(u.cov(1, 1), 1.0);
}

TEST(Update, UninformativeMeasurement) {
  std::mt19937_64 rng(9);
  const StateMatrix p = oracle::random_spd(6, rng, 10.0);
  const auto e = estimate(0.0, sample_mean(), p);
  const VectorXd z = Eigen::Vector3d(100.0, -50.0, 7.0);
  const auto u = update(e, z, 1e12 * MatrixXd::Identity(3, 3), StateSubspace{3});
  EXPECT_LE(oracle::rel_err(u.mean, e.mean), 1e-6);
  EXPECT_LE(oracle::rel_err(u.cov, e.cov), 1e-6);
}

TEST(Update, PerfectFullStateMeasurement) {
  const auto e = estimate(0.0, sample_mean(), 100.0 * StateMatrix::Identity());
  VectorXd z(6);
  z << 1, 2, 3, 4, 5, 6;
  const auto u = update(e, z, 1e-12 * MatrixXd::Identity(6, 6), StateSubspace{6});
  EXPECT_LE((u.mean - z).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Update, MatchesOracleAndInformationForm) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 20; ++trial) {
    const StateMatrix p = oracle::random_spd(6, rng, 50.0);
    const auto pred = estimate(0.0, sample_mean(), p);
    const MatrixXd r = oracle::random_spd(3, rng, 2.0);
    const VectorXd z = sample_mean().head<3>() + oracle::sample_gaussian(r, rng);
    const auto post = update(pred, z, r, StateSubspace{3});

    MatrixXd h = MatrixXd::Zero(3, 6);
    h.leftCols(3).setIdentity();
    const MatrixXd info = p.inverse() + h.transpose() * r.inverse() * h;
    EXPECT_LE(oracle::rel_err(post.cov, info.inverse()), 1e-9);
    EXPECT_LE(information_form_residual(pred, post, r, StateSubspace{3}), 1e-6);
    EXPECT_EQ(post.cov, post.cov.transpose());

    const auto joseph = update(pred, z, r, StateSubspace{3}, CovarianceUpdate::Joseph);
    EXPECT_LE(oracle::rel_err(joseph.cov, post.cov), 1e-9);
    EXPECT_LE(oracle::rel_err(joseph.mean, post.mean), 1e-12);
  }
}

TEST(Update, RejectsWrongDimension) {
  const auto e = estimate(0.0, sample_mean(), StateMatrix::Identity());
  EXPECT_THROW(update(e, VectorXd::Zero(2), MatrixXd::Identity(3, 3), StateSubspace{3}), Error);
}

TEST(MeasurementFunction, SubspaceJacobianIsExact) {
  for (int m = 1; m <= 6; ++m) {
    const MatrixXd h = measurement_jacobian(StateSubspace{m}, sample_mean());
    MatrixXd want = MatrixXd::Zero(m, 6);
    want.leftCols(m).setIdentity();
    EXPECT_EQ(h, want);
    EXPECT_EQ(measurement_dim(StateSubspace{m}), m);
    EXPECT_EQ(evaluate(StateSubspace{m}, sample_mean()), sample_mean().head(m));
  }
}

TEST(InitTrack, NoiselessPositionAndVelocityPrior) {
  sensing::RadarConfig cfg;
  const Vec3 site = sensing::lla_to_ecr(cfg.site);
  const StateVector truth = make_state(site + Vec3(3e5, 2e5, 4e5), Vec3(-1000, 2000, 500));
  sensing::RandomStream rng(0);
  const auto det = sensing::simulate_detection(cfg, truth, 1.0, 5.0, rng, sensing::DetectionNoise::Off);
  ASSERT_TRUE(det);
  const auto init = init_track(*det);
  EXPECT_LT((init.mean.head<3>() - truth.head<3>()).norm(), 1e-6);
  EXPECT_EQ(init.mean.tail<3>(), Vec3::Zero());
  for (int i = 3; i < 6; ++i) EXPECT_DOUBLE_EQ(init.cov(i, i), 9e6);
  EXPECT_EQ(init.cov.topRightCorner(3, 3), Mat3::Zero());
  EXPECT_EQ(init.epoch, 5.0);
}

TEST(InitTrack, PositionNeesWithinChiSquareBound) {
  sensing::RadarConfig cfg;
  const Vec3 site = sensing::lla_to_ecr(cfg.site);
  const StateVector truth = make_state(site + Vec3(3e5, 2e5, 6e5), Vec3::Zero());
  const double bound = boost::math::quantile(boost::math::chi_squared(3.0), 0.999);
  sensing::RandomStream rng(123);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto det = sensing::simulate_detection(cfg, truth, 1.0, 0.0, rng);
    const auto init = init_track(*det);
    const Vec3 e = init.mean.head<3>() - truth.head<3>();
    worst = std::max(worst, e.dot(init.cov.topLeftCorner<3, 3>().llt().solve(e)));
  }
  EXPECT_LE(worst, bound);
}

TEST(InitTrackTwoPoint, DifferencesDetections) {
  sensing::RadarConfig cfg;
  const Vec3 site = sensing::lla_to_ecr(cfg.site);
  const Vec3 v(-1000, 2000, 500);
  const StateVector x1 = make_state(site + Vec3(3e5, 2e5, 4e5), v);
  const StateVector x2 = make_state(x1.head<3>() + 2.0 * v, v);
  sensing::RandomStream rng(0);
  const auto d1 = sensing::simulate_detection(cfg, x1, 1.0, 10.0, rng, sensing::DetectionNoise::Off);
  const auto d2 = sensing::simulate_detection(cfg, x2, 1.0, 12.0, rng, sensing::DetectionNoise::Off);
  const auto init = init_track_two_point(*d1, *d2);
  EXPECT_EQ(init.epoch, 12.0);
  EXPECT_LT((init.mean - x2).norm(), 1e-6);
  EXPECT_TRUE(linalg::is_psd(init.cov));
  EXPECT_TRUE(init.cov.topRightCorner(3, 3).isApprox(init.cov.topLeftCorner(3, 3) / 2.0));
  EXPECT_THROW(init_track_two_point(*d2, *d1), Error);
}

TEST(InitTrackTwoPoint, CovarianceMatchesMonteCarlo) {
  sensing::RadarConfig cfg;
  const Vec3 site = sensing::lla_to_ecr(cfg.site);
  const Vec3 v(-1000, 2000, 500);
  const StateVector x1 = make_state(site + Vec3(3e5, 2e5, 4e5), v);
  const StateVector x2 = make_state(x1.head<3>() + v, v);
  sensing::RandomStream rng(77);
  const int n = 4000;
  double nees_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto init = init_track_two_point(*sensing::simulate_detection(cfg, x1, 1.0, 0.0, rng),
                                           *sensing::simulate_detection(cfg, x2, 1.0, 1.0, rng));
    nees_sum += nees(init, x2);
  }
  // Mean NEES of a consistent 6-dof estimate is 6; 99.9% band for n samples.
  const boost::math::chi_squared chi(6.0 * n);
  EXPECT_GE(nees_sum, boost::math::quantile(chi, 0.0005));
  EXPECT_LE(nees_sum, boost::math::quantile(chi, 0.9995));
}

TEST(RunFilter, EmptySequenceReturnsInit) {
  const auto init = estimate(0.0, sample_mean(), StateMatrix::Identity());
  const auto hist = run_filter({}, dynamics::DynamicsModel::constant_velocity(), {0.1}, init);
  ASSERT_EQ(hist.estimates.size(), 1u);
  EXPECT_EQ(hist.estimates[0].mean, init.mean);
}

TEST(RunFilter, NoiselessLinearTrackConverges) {
  StateVector truth;
  truth << 0, 0, 0, 10, -5, 2;
  const auto init = estimate(0.0, StateVector::Zero(), 1e4 * StateMatrix::Identity());
  std::vector<Measurement> ms;
  for (int k = 1; k <= 60; ++k) {
    const StateVector x = dynamics::cv_transition(k) * truth;
    ms.push_back({static_cast<double>(k), x.head<3>(), MatrixXd::Identity(3, 3), StateSubspace{3}});
  }
  const auto hist = run_filter(ms, dynamics::DynamicsModel::constant_velocity(), {0.0}, init);
  ASSERT_EQ(hist.estimates.size(), 61u);
  const auto& last = hist.estimates.back();
  EXPECT_LE((last.mean.head<3>() - ms.back().z).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE((last.mean.tail<3>() - truth.tail<3>()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(RunFilter, MatchesLinearOracleAndIsDeterministic) {
  const auto lin = oracle::run_linear_scenario(100, 0.05, 1.0, 99u);
  std::vector<Measurement> ms;
  for (std::size_t k = 1; k < lin.steps.size(); ++k) {
    ms.push_back({lin.steps[k].epoch, lin.steps[k].z, lin.steps[k].r, StateSubspace{3}});
  }
  const auto init = estimate(0.0, lin.steps[0].mean, lin.steps[0].cov);
  const auto dyn = dynamics::DynamicsModel::constant_velocity();
  const auto a = run_filter(ms, dyn, {0.05}, init);
  const auto b = run_filter(ms, dyn, {0.05}, init);
  ASSERT_EQ(a.estimates.size(), lin.steps.size());
  for (std::size_t k = 0; k < lin.steps.size(); ++k) {
    EXPECT_LE(oracle::rel_err(a.estimates[k].mean, lin.steps[k].mean), 1e-10);
    EXPECT_LE(oracle::rel_err(a.estimates[k].cov, lin.steps[k].cov), 1e-8);
    EXPECT_EQ(a.estimates[k].mean, b.estimates[k].mean);
    EXPECT_EQ(a.estimates[k].cov, b.estimates[k].cov);
    EXPECT_TRUE(linalg::is_psd(a.estimates[k].cov));
  }
}

TEST(RunFilter, StepErrorsNameTheEpoch) {
  const auto init = estimate(5.0, sample_mean(), StateMatrix::Identity());
  std::vector<Measurement> ms = {
      {6.0, Eigen::Vector3d::Zero(), MatrixXd::Identity(3, 3), StateSubspace{3}},
      {6.0, Eigen::Vector3d::Zero(), MatrixXd::Identity(3, 3), StateSubspace{3}},
  };
  try {
    run_filter(ms, dynamics::DynamicsModel::constant_velocity(), {0.1}, init);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("6"), std::string::npos) << e.what();
  }
}

TEST(TrackHistory, Validation) {
  TrackHistory h;
  h.estimates = {estimate(0.0, sample_mean(), StateMatrix::Identity()),
                 estimate(1.0, sample_mean(), StateMatrix::Identity())};
  EXPECT_NO_THROW(h.validate());
  h.meas_dim = 7;
  EXPECT_THROW(h.validate(), Error);
  h.meas_dim = 3;
  h.estimates[1].epoch = 0.0;
  EXPECT_THROW(h.validate(), Error);
}

TEST(Nees, QuadraticForm) {
  const auto e = estimate(0.0, StateVector::Constant(2.0), 4.0 * StateMatrix::Identity());
  EXPECT_NEAR(nees(e, StateVector::Zero()), 6.0, 1e-12);
}
