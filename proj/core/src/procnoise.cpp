#include "retrofilter/procnoise.hpp"

#include <cmath>
#include <sstream>

#include "retrofilter/errors.hpp"
#include "retrofilter/spdlinalg.hpp"

namespace retrofilter::procnoise {

InformationGainCurve::InformationGainCurve(const Eigen::MatrixXd& p_post,
                                           const Eigen::MatrixXd& p_prev_post,
                                           const Eigen::MatrixXd& transition,
                                           const Eigen::MatrixXd& basis)
    : post_information_(linalg::safe_invert(p_post)),
      propagated_(linalg::symmetrize(transition * p_prev_post * transition.transpose())),
      basis_(linalg::symmetrize(basis)) {
  const auto n = p_post.rows();
  if (p_prev_post.rows() != n || transition.rows() != n || transition.cols() != n ||
      basis_.rows() != n) {
    throw Error(ErrorKind::Dimension, "information gain curve: inconsistent matrix dimensions");
  }
}

Eigen::MatrixXd InformationGainCurve::at(double eta) const {
  if (!(eta >= 0.0)) {
    throw Error(ErrorKind::Domain, "j_of_eta: eta must be nonnegative");
  }
  return linalg::symmetrize(post_information_ - linalg::safe_invert(propagated_ + eta * basis_));
}

double InformationGainCurve::min_eigenvalue_at(double eta) const {
  return linalg::min_eigenvalue(at(eta));
}

double InformationGainCurve::psd_tolerance(double rel) const {
  return linalg::relative_tolerance(post_information_, rel);
}

Eigen::MatrixXd j_of_eta(double eta, const Eigen::MatrixXd& p_post,
                         const Eigen::MatrixXd& p_prev_post, const Eigen::MatrixXd& transition,
                         const Eigen::MatrixXd& basis) {
  return InformationGainCurve(p_post, p_prev_post, transition, basis).at(eta);
}

EtaEstimate estimate_eta(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_prev_post,
                         const Eigen::MatrixXd& transition, const Eigen::MatrixXd& basis,
                         const EtaSearchOptions& options) {
  if (!(options.eta_init > 0.0) || !(options.eta_max >= options.eta_init) ||
      !(options.rel_tol > 0.0) || !(options.tol_psd_rel >= 0.0)) {
    throw Error(ErrorKind::Domain, "estimate_eta: invalid search options");
  }
  if (!(linalg::max_abs(basis) > 0.0)) {
    throw Error(ErrorKind::Domain, "estimate_eta: noise basis is zero");
  }
  const InformationGainCurve curve(p_post, p_prev_post, transition, basis);
  const double tol = curve.psd_tolerance(options.tol_psd_rel);
  auto feasible = [&](double eta, double& min_eig) {
    min_eig = curve.min_eigenvalue_at(eta);
    return min_eig >= -tol;
  };

  EtaEstimate out;
  out.tol_psd = tol;
  double min_eig = 0.0;
  if (feasible(0.0, min_eig)) {
    out.min_eig_at_solution = min_eig;
    return out;
  }

  double lower = 0.0;
  double upper = options.eta_init;
  double upper_min_eig = 0.0;
  int iterations = 0;
  while (!feasible(upper, upper_min_eig)) {
    ++iterations;
    if (upper >= options.eta_max) {
      std::ostringstream os;
      os << "estimate_eta: information gain indefinite (min eigenvalue " << upper_min_eig
         << ") at eta_max " << options.eta_max;
      throw Error(ErrorKind::EstimationFailure, os.str());
    }
    lower = upper;
    upper = std::min(10.0 * upper, options.eta_max);
  }

  // Feasibility must persist above the bracket.
  double probe_min_eig = 0.0;
  const double probe = std::min(10.0 * upper, std::max(options.eta_max, upper));
  if (!feasible(probe, probe_min_eig)) {
    std::ostringstream os;
    os << "estimate_eta: feasibility not monotone in eta (feasible at " << upper
       << ", infeasible at " << probe << ")";
    throw Error(ErrorKind::Numerical, os.str());
  }

  while (upper - lower > options.rel_tol * upper) {
    if (++iterations > options.max_iterations) {
      throw Error(ErrorKind::Convergence, "estimate_eta: bisection iteration limit reached");
    }
    const double mid = 0.5 * (lower + upper);
    double mid_min_eig = 0.0;
    if (feasible(mid, mid_min_eig)) {
      upper = mid;
      upper_min_eig = mid_min_eig;
    } else {
      lower = mid;
    }
  }

  out.eta_hat = upper;
  out.lower = lower;
  out.upper = upper;
  out.iterations = iterations;
  out.min_eig_at_solution = upper_min_eig;
  return out;
}

}  // namespace retrofilter::procnoise
