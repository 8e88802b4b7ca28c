#pragma once

#include <Eigen/Dense>

namespace svi {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Solves A x = b by LU with partial pivoting.
///
/// A pivot counts as zero when its magnitude falls below 1e-14 times the
/// infinity norm of the corresponding (permuted) row of A; in that case
/// SingularJacobian is thrown instead of returning garbage.
Vec lu_solve(const Mat& A, const Vec& b);

/// Same test as lu_solve, without solving anything.
bool lu_singular(const Mat& A);

/// Infinity norm; zero for empty vectors.
inline double inf_norm(const Vec& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace svi
