#pragma once

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "sympmor/errors.hpp"

namespace sympmor {

/// Upper-triangular factor U with U^T U = M.
///
/// Pivots within 1e-12 * max|M_ii| of zero are accepted as semidefinite
/// directions and produce a zero row (the periodic wave operator has the
/// constant mode in its kernel). A pivot below that band is reported as
/// indefinite, naming its index.
template <typename Derived>
auto cholesky_factor(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (m.rows() != m.cols()) throw ShapeError("cholesky_factor: matrix must be square");
  const Eigen::Index n = m.rows();
  Matrix u = Matrix::Zero(n, n);
  if (n == 0) return u;
  const Scalar scale = m.diagonal().cwiseAbs().maxCoeff();
  const Scalar sym_defect = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (sym_defect > Scalar(1e-12) * std::max(scale, Scalar(1)))
    throw ShapeError("cholesky_factor: matrix is not symmetric");
  const Scalar pivot_tol = Scalar(1e-12) * scale;

  for (Eigen::Index j = 0; j < n; ++j) {
    Scalar d = m(j, j) - u.col(j).head(j).squaredNorm();
    if (d < -pivot_tol)
      throw NumericalError("cholesky_factor: matrix is not positive semidefinite at pivot " +
                           std::to_string(j));
    if (d <= pivot_tol) continue;  // semidefinite direction: row j stays zero
    const Scalar ujj = std::sqrt(d);
    u(j, j) = ujj;
    for (Eigen::Index c = j + 1; c < n; ++c)
      u(j, c) = (m(j, c) - u.col(j).head(j).dot(u.col(c).head(j))) / ujj;
  }
  return u;
}

}  // namespace sympmor
