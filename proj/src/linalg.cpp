#include "svi/linalg.hpp"

#include "svi/errors.hpp"

namespace svi {

namespace {

constexpr double kPivotTol = 1e-14;

bool singular_factor(const Mat& A, const Eigen::PartialPivLU<Mat>& lu) {
  const Mat PA = lu.permutationP() * A;
  const Mat& LU = lu.matrixLU();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    const double row = PA.row(i).lpNorm<Eigen::Infinity>();
    if (!(std::abs(LU(i, i)) > kPivotTol * row)) return true;
  }
  return false;
}

}  // namespace

Vec lu_solve(const Mat& A, const Vec& b) {
  if (A.rows() != A.cols() || A.rows() != b.size())
    throw DimensionError("lu_solve: shape mismatch");
  if (A.rows() == 0) return Vec();
  Eigen::PartialPivLU<Mat> lu(A);
  if (singular_factor(A, lu)) throw SingularJacobian("lu_solve: singular matrix");
  return lu.solve(b);
}

bool lu_singular(const Mat& A) {
  if (A.rows() == 0) return false;
  Eigen::PartialPivLU<Mat> lu(A);
  return singular_factor(A, lu);
}

}  // namespace svi
