#pragma once

#include <Eigen/Core>

namespace retrofilter::linalg {

/// Default relative PSD tolerance: eigenvalues down to -kPsdRelTol * trace/dim
/// are accepted as nonnegative.
inline constexpr double kPsdRelTol = 1e-9;

/// Default relative singularity threshold used by safe_invert.
inline constexpr double kSingularRelTol = 1e-12;

using MatrixRef = Eigen::Ref<const Eigen::MatrixXd>;

/// (A + Aᵀ)/2. Throws a dimension error for non-square input.
Eigen::MatrixXd symmetrize(const MatrixRef& a);

/// `rel * |trace(a)| / dim`, the scale-free tolerance used for PSD checks.
double relative_tolerance(const MatrixRef& a, double rel = kPsdRelTol);

/// Smallest eigenvalue of a symmetric matrix (symmetric eigensolver).
/// Throws a symmetry error if `a` is asymmetric beyond 1e-9 of its largest entry.
double min_eigenvalue(const MatrixRef& a);

/// Inverse of a symmetric positive definite matrix via Cholesky.
///
/// The smallest eigenvalue must exceed `singular_rel * trace/dim`; otherwise a
/// SingularityError carrying that eigenvalue is thrown. The result is
/// symmetrized.
Eigen::MatrixXd safe_invert(const MatrixRef& a, double singular_rel = kSingularRelTol);

/// True iff min_eigenvalue(a - b) >= -tol.
bool psd_dominates(const MatrixRef& a, const MatrixRef& b, double tol);

/// True iff min_eigenvalue(a) >= -relative_tolerance(a, rel).
bool is_psd(const MatrixRef& a, double rel = kPsdRelTol);

/// Largest absolute entry.
double max_abs(const MatrixRef& a);

}  // namespace retrofilter::linalg
