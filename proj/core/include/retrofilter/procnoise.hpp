#pragma once

#include <Eigen/Core>

namespace retrofilter::procnoise {

struct EtaSearchOptions {
  /// First nonzero trial intensity [m^2/s^3].
  double eta_init = 1e-6;
  /// Largest intensity tried before giving up [m^2/s^3].
  double eta_max = 1e4;
  /// Bisection stops once (upper - lower) <= rel_tol * upper.
  double rel_tol = 1e-6;
  /// PSD tolerance relative to trace(P_post⁻¹) / N.
  double tol_psd_rel = 1e-9;
  int max_iterations = 200;
};

struct EtaEstimate {
  /// Smallest feasible intensity found; the upper end of the final bracket.
  double eta_hat = 0.0;
  /// Largest intensity known to be infeasible (0 when eta_hat == 0).
  double lower = 0.0;
  double upper = 0.0;
  int iterations = 0;
  double min_eig_at_solution = 0.0;
  /// Absolute PSD tolerance that was applied.
  double tol_psd = 0.0;
};

/// J(eta) = P_post⁻¹ - (F P_prev Fᵀ + eta B)⁻¹.
Eigen::MatrixXd j_of_eta(double eta, const Eigen::MatrixXd& p_post,
                         const Eigen::MatrixXd& p_prev_post, const Eigen::MatrixXd& transition,
                         const Eigen::MatrixXd& basis);

/// Information gain as a function of the unknown intensity, with the
/// eta-independent pieces factored out.
class InformationGainCurve {
 public:
  InformationGainCurve(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_prev_post,
                       const Eigen::MatrixXd& transition, const Eigen::MatrixXd& basis);

  Eigen::MatrixXd at(double eta) const;
  double min_eigenvalue_at(double eta) const;
  /// Absolute tolerance `rel * trace(P_post⁻¹) / N`.
  double psd_tolerance(double rel) const;

 private:
  Eigen::MatrixXd post_information_;
  Eigen::MatrixXd propagated_;
  Eigen::MatrixXd basis_;
};

/// Conservative intensity estimate: the smallest eta >= 0 whose information
/// gain is PSD within tolerance. Checks eta = 0, then grows a bracket by 10x
/// from `eta_init` and bisects it.
///
/// Throws EstimationFailure if the gain is still indefinite at `eta_max`, and
/// Numerical if feasibility is found not to be monotone in eta.
EtaEstimate estimate_eta(const Eigen::MatrixXd& p_post, const Eigen::MatrixXd& p_prev_post,
                         const Eigen::MatrixXd& transition, const Eigen::MatrixXd& basis,
                         const EtaSearchOptions& options = {});

}  // namespace retrofilter::procnoise
