#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "retrofilter/errors.hpp"
#include "retrofilter/spdlinalg.hpp"

using namespace retrofilter;
using Eigen::MatrixXd;

TEST(Symmetrize, FixedPointAndAverage) {
  MatrixXd a(2, 2);
  a << 1, 2, 2, 1;
  EXPECT_EQ(linalg::symmetrize(a), a);

  MatrixXd b(2, 2);
  b << 1, 3, 1, 1;
  MatrixXd want(2, 2);
  want << 1, 2, 2, 1;
  EXPECT_EQ(linalg::symmetrize(b), want);

  EXPECT_EQ(linalg::symmetrize(MatrixXd::Zero(3, 3)), MatrixXd::Zero(3, 3));
}

TEST(Symmetrize, RejectsNonSquare) {
  try {
    linalg::symmetrize(MatrixXd::Zero(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Dimension);
  }
}

TEST(SafeInvert, IdentityAndDiagonal) {
  EXPECT_TRUE(linalg::safe_invert(MatrixXd::Identity(6, 6)).isApprox(MatrixXd::Identity(6, 6)));
  MatrixXd d = Eigen::Vector2d(4.0, 9.0).asDiagonal();
  const MatrixXd inv = linalg::safe_invert(d);
  EXPECT_NEAR(inv(0, 0), 0.25, 1e-15);
  EXPECT_NEAR(inv(1, 1), 1.0 / 9.0, 1e-15);
  EXPECT_EQ(inv(0, 1), 0.0);
}

TEST(SafeInvert, RoundTripOnRandomSpd) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd a = oracle::random_spd(6, rng, 1.0, 1e-3);
    const MatrixXd inv = linalg::safe_invert(a);
    EXPECT_EQ(inv, inv.transpose());
    EXPECT_LE((a * inv - MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LE(oracle::rel_err(linalg::safe_invert(inv), a), 1e-8);
  }
}

TEST(SafeInvert, InvolutionAtHighCondition) {
  // Mixed units: position variance ~1e4 m^2 and velocity ~1e-4 (m/s)^2.
  std::mt19937_64 rng(11);
  Eigen::VectorXd scales(6);
  scales << 1e4, 1e4, 1e4, 1e-4, 1e-4, 1e-4;
  const MatrixXd base = oracle::random_spd(6, rng, 1.0, 0.5);
  const MatrixXd a = scales.cwiseSqrt().asDiagonal() * base * scales.cwiseSqrt().asDiagonal();
  EXPECT_LE(oracle::rel_err(linalg::safe_invert(linalg::safe_invert(a)), a), 1e-8);
}

TEST(SafeInvert, SingularCarriesEigenvalue) {
  MatrixXd a = MatrixXd::Identity(3, 3);
  a(2, 2) = -1e-3;
  try {
    linalg::safe_invert(a);
    FAIL();
  } catch (const SingularityError& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Singular);
    EXPECT_NEAR(e.eigenvalue(), -1e-3, 1e-12);
  }
  MatrixXd tiny = MatrixXd::Identity(3, 3);
  tiny(0, 0) = 1e-15;
  EXPECT_THROW(linalg::safe_invert(tiny), SingularityError);
}

TEST(MinEigenvalue, ClosedForms) {
  EXPECT_NEAR(linalg::min_eigenvalue(Eigen::Vector3d(3, -2, 5).asDiagonal().toDenseMatrix()), -2.0, 1e-14);
  EXPECT_NEAR(linalg::min_eigenvalue(MatrixXd::Identity(4, 4)), 1.0, 1e-14);
  MatrixXd a(2, 2);
  a << 2, 1, 1, 2;
  EXPECT_NEAR(linalg::min_eigenvalue(a), 1.0, 1e-14);
}

TEST(MinEigenvalue, RejectsAsymmetric) {
  MatrixXd a(2, 2);
  a << 1, 0.5, 0, 1;
  try {
    linalg::min_eigenvalue(a);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Symmetry);
  }
}

TEST(PsdDominates, Examples) {
  const MatrixXd i = MatrixXd::Identity(3, 3);
  EXPECT_TRUE(linalg::psd_dominates(2 * i, i, 0.0));
  EXPECT_FALSE(linalg::psd_dominates(i, 2 * i, 0.0));
  EXPECT_TRUE(linalg::psd_dominates(i, i, 0.0));
  EXPECT_THROW(linalg::psd_dominates(i, MatrixXd::Identity(2, 2), 0.0), Error);
}

TEST(PsdDominates, AntisymmetricUpToTolerance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd a = oracle::random_spd(4, rng);
    const MatrixXd b = a + 1e-12 * MatrixXd::Identity(4, 4);
    EXPECT_TRUE(linalg::psd_dominates(a, b, 1e-10));
    EXPECT_TRUE(linalg::psd_dominates(b, a, 1e-10));
    const MatrixXd c = a + oracle::random_spd(4, rng);
    EXPECT_TRUE(linalg::psd_dominates(c, a, 0.0));
    EXPECT_FALSE(linalg::psd_dominates(a, c, 1e-10));
  }
}

TEST(IsPsd, UsesTraceRelativeTolerance) {
  MatrixXd a = Eigen::Vector3d(1e6, 1e6, -1e-5).asDiagonal();
  EXPECT_TRUE(linalg::is_psd(a));
  a(2, 2) = -1.0;
  EXPECT_FALSE(linalg::is_psd(a));
}
