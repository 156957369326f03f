#include "retrofilter/spdlinalg.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "retrofilter/errors.hpp"

namespace retrofilter::linalg {
namespace {

void require_square(const MatrixRef& a, const char* what) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    std::ostringstream os;
    os << what << ": expected a non-empty square matrix, got " << a.rows() << "x" << a.cols();
    throw Error(ErrorKind::Dimension, os.str());
  }
}

void require_symmetric(const MatrixRef& a, const char* what) {
  const double scale = std::max(max_abs(a), 1e-300);
  const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-9 * scale)) {
    std::ostringstream os;
    os << what << ": matrix is not symmetric (max asymmetry " << asym << ")";
    throw Error(ErrorKind::Symmetry, os.str());
  }
}

double smallest_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::Numerical, "symmetric eigensolver did not converge");
  }
  return solver.eigenvalues()(0);  // ascending order
}

}  // namespace

Eigen::MatrixXd symmetrize(const MatrixRef& a) {
  require_square(a, "symmetrize");
  return 0.5 * (a + a.transpose());
}

double relative_tolerance(const MatrixRef& a, double rel) {
  require_square(a, "relative_tolerance");
  return rel * std::abs(a.trace()) / static_cast<double>(a.rows());
}

double max_abs(const MatrixRef& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

double min_eigenvalue(const MatrixRef& a) {
  require_square(a, "min_eigenvalue");
  require_symmetric(a, "min_eigenvalue");
  return smallest_eigenvalue(symmetrize(a));
}

Eigen::MatrixXd safe_invert(const MatrixRef& a, double singular_rel) {
  require_square(a, "safe_invert");
  require_symmetric(a, "safe_invert");
  const Eigen::MatrixXd sym = symmetrize(a);
  const double threshold = singular_rel * sym.trace() / static_cast<double>(sym.rows());
  const double lambda_min = smallest_eigenvalue(sym);
  if (!(lambda_min > threshold) || !(threshold >= 0.0)) {
    std::ostringstream os;
    os << "safe_invert: smallest eigenvalue " << lambda_min << " is below threshold " << threshold;
    throw SingularityError(os.str(), lambda_min);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sym);
  if (llt.info() != Eigen::Success) {
    throw SingularityError("safe_invert: Cholesky factorization failed", lambda_min);
  }
  const Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(sym.rows(), sym.cols()));
  return 0.5 * (inv + inv.transpose());
}

bool psd_dominates(const MatrixRef& a, const MatrixRef& b, double tol) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    std::ostringstream os;
    os << "psd_dominates: dimension mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows()
       << "x" << b.cols();
    throw Error(ErrorKind::Dimension, os.str());
  }
  return min_eigenvalue(a - b) >= -tol;
}

bool is_psd(const MatrixRef& a, double rel) {
  return min_eigenvalue(a) >= -relative_tolerance(a, rel);
}

}  // namespace retrofilter::linalg
