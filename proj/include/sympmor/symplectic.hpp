// Symplectic linear algebra: the canonical form, symplectic inverses,
// symplectic Gram-Schmidt and ortho-symplectic basis construction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sympmor/errors.hpp"

namespace sympmor {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// The canonical Poisson matrix J_2n = [[0, I], [-I, 0]], kept implicit.
class CanonicalForm {
 public:
  explicit CanonicalForm(Eigen::Index half_dim) : n_(half_dim) {
    if (half_dim <= 0) throw ShapeError("CanonicalForm: half dimension must be positive");
  }

  Eigen::Index half_dim() const { return n_; }
  Eigen::Index dim() const { return 2 * n_; }

  /// J v, i.e. (q, p) -> (p, -q). Works column-wise on matrices.
  template <typename Derived>
  auto apply(const Eigen::MatrixBase<Derived>& v) const {
    check_rows(v.rows());
    using Plain = typename Derived::PlainObject;
    Plain out(v.rows(), v.cols());
    out.topRows(n_) = v.bottomRows(n_);
    out.bottomRows(n_) = -v.topRows(n_);
    return out;
  }

  /// J^T v, i.e. (q, p) -> (-p, q).
  template <typename Derived>
  auto apply_transpose(const Eigen::MatrixBase<Derived>& v) const {
    check_rows(v.rows());
    using Plain = typename Derived::PlainObject;
    Plain out(v.rows(), v.cols());
    out.topRows(n_) = -v.bottomRows(n_);
    out.bottomRows(n_) = v.topRows(n_);
    return out;
  }

  /// Dense J_2n. Only for small dimensions and tests.
  template <typename Scalar = double>
  Mat<Scalar> dense() const {
    Mat<Scalar> j = Mat<Scalar>::Zero(2 * n_, 2 * n_);
    j.topRightCorner(n_, n_).setIdentity();
    j.bottomLeftCorner(n_, n_) = -Mat<Scalar>::Identity(n_, n_);
    return j;
  }

 private:
  void check_rows(Eigen::Index rows) const {
    if (rows != 2 * n_) throw ShapeError("CanonicalForm: vector length does not match 2n");
  }

  Eigen::Index n_;
};

/// A^+ = J_2k^T A^T J_2n.
template <typename Derived>
auto symplectic_inverse(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.rows() % 2 != 0 || a.cols() % 2 != 0 || a.rows() == 0 || a.cols() == 0)
    throw ShapeError("symplectic_inverse: row and column counts must be even and nonzero");
  const CanonicalForm jn(a.rows() / 2);
  const CanonicalForm jk(a.cols() / 2);
  // (J_2n^T A)^T = A^T J_2n
  Mat<Scalar> at_jn = jn.apply_transpose(a.eval()).transpose();
  return Mat<Scalar>(jk.apply_transpose(at_jn));
}

/// Time-ordered snapshot matrix, one 2n-state per column.
template <typename Scalar>
class SnapshotSet {
 public:
  SnapshotSet() = default;

  SnapshotSet(std::vector<Scalar> times, Mat<Scalar> states)
      : times_(std::move(times)), states_(std::move(states)) {
    if (static_cast<Eigen::Index>(times_.size()) != states_.cols())
      throw ShapeError("SnapshotSet: column count must equal time count");
    if (states_.rows() % 2 != 0) throw ShapeError("SnapshotSet: state dimension must be even");
    for (std::size_t i = 1; i < times_.size(); ++i)
      if (!(times_[i] > times_[i - 1]))
        throw ShapeError("SnapshotSet: times must be strictly increasing");
    if (!states_.allFinite()) throw NumericalError("SnapshotSet: non-finite entries");
  }

  Eigen::Index dim() const { return states_.rows(); }
  Eigen::Index half_dim() const { return states_.rows() / 2; }
  Eigen::Index size() const { return states_.cols(); }
  bool empty() const { return states_.cols() == 0; }

  const std::vector<Scalar>& times() const { return times_; }
  const Mat<Scalar>& states() const { return states_; }
  auto state(Eigen::Index i) const { return states_.col(i); }

 private:
  std::vector<Scalar> times_;
  Mat<Scalar> states_;
};

/// Orthonormal and symplectic 2n x 2k basis A = [E | J^T E].
template <typename Scalar>
class OrthoSymplecticBasis {
 public:
  static constexpr double kTolerance = 1e-10;

  OrthoSymplecticBasis() = default;

  /// Builds A from the k "e" columns; partners are J^T e. Throws if the
  /// result violates the orthonormality or symplecticity bounds.
  explicit OrthoSymplecticBasis(const Mat<Scalar>& e_columns) : e_(e_columns) {
    if (e_.rows() % 2 != 0 || e_.rows() == 0)
      throw ShapeError("OrthoSymplecticBasis: row count must be even and nonzero");
    if (e_.cols() > e_.rows() / 2)
      throw ShapeError("OrthoSymplecticBasis: k must not exceed n");
    rebuild();
    const auto [ortho, sympl] = defects();
    if (ortho > kTolerance || sympl > kTolerance)
      throw NumericalError("OrthoSymplecticBasis: invariant violated (orthonormality defect " +
                           std::to_string(static_cast<double>(ortho)) + ", symplecticity defect " +
                           std::to_string(static_cast<double>(sympl)) + ")");
  }

  /// Identity basis of R^2n (k = n).
  static OrthoSymplecticBasis identity(Eigen::Index n) {
    Mat<Scalar> e = Mat<Scalar>::Zero(2 * n, n);
    e.topRows(n).setIdentity();
    return OrthoSymplecticBasis(e);
  }

  Eigen::Index full_dim() const { return a_.rows(); }
  Eigen::Index half_dim() const { return a_.rows() / 2; }
  Eigen::Index k() const { return e_.cols(); }
  Eigen::Index size() const { return 2 * e_.cols(); }
  bool empty() const { return e_.cols() == 0; }

  const Mat<Scalar>& matrix() const { return a_; }
  const Mat<Scalar>& e_columns() const { return e_; }
  Mat<Scalar> inverse() const { return empty() ? Mat<Scalar>() : symplectic_inverse(a_); }

  /// max-norm defects of A^T A - I and A^T J A - J.
  std::pair<Scalar, Scalar> defects() const {
    if (empty()) return {Scalar(0), Scalar(0)};
    const Eigen::Index two_k = a_.cols();
    const CanonicalForm jn(half_dim());
    const Mat<Scalar> ortho = a_.transpose() * a_ - Mat<Scalar>::Identity(two_k, two_k);
    const Mat<Scalar> sympl =
        a_.transpose() * jn.apply(a_) - CanonicalForm(two_k / 2).dense<Scalar>();
    return {ortho.cwiseAbs().maxCoeff(), sympl.cwiseAbs().maxCoeff()};
  }

  /// Appends the pair (e, J^T e) without re-validating the whole basis.
  void append(const Vec<Scalar>& e) {
    if (!empty() && e.size() != e_.rows()) throw ShapeError("OrthoSymplecticBasis: length mismatch");
    if (empty() && e.size() % 2 != 0) throw ShapeError("OrthoSymplecticBasis: odd length");
    Mat<Scalar> next(e.size(), e_.cols() + 1);
    if (!empty()) next.leftCols(e_.cols()) = e_;
    next.col(e_.cols()) = e;
    e_ = std::move(next);
    rebuild();
  }

 private:
  void rebuild() {
    const CanonicalForm jn(e_.rows() / 2);
    a_.resize(e_.rows(), 2 * e_.cols());
    a_.leftCols(e_.cols()) = e_;
    a_.rightCols(e_.cols()) = jn.apply_transpose(e_);
  }

  Mat<Scalar> e_;
  Mat<Scalar> a_;
};

/// Relative residual threshold below which a candidate is already spanned.
inline constexpr double kDegenerateThreshold = 1e-12;

/// J-orthogonalizes v against the basis: removes the symplectic projection
/// A A^+ v and the Euclidean projection A A^T v, twice, then normalizes.
/// Returns nullopt when v lies in span(A) up to the degeneracy threshold.
template <typename Scalar>
std::optional<Vec<Scalar>> symplectic_gram_schmidt(const Vec<Scalar>& v,
                                                   const OrthoSymplecticBasis<Scalar>& basis) {
  const Scalar v_norm = v.norm();
  if (!(v_norm > Scalar(0))) return std::nullopt;
  Vec<Scalar> w = v;
  if (!basis.empty()) {
    if (v.size() != basis.full_dim()) throw ShapeError("symplectic_gram_schmidt: length mismatch");
    const Mat<Scalar>& a = basis.matrix();
    const Mat<Scalar> a_plus = basis.inverse();
    for (int pass = 0; pass < 2; ++pass) {
      w -= a * (a_plus * w);
      w -= a * (a.transpose() * w);
    }
  }
  const Scalar w_norm = w.norm();
  if (w_norm <= Scalar(kDegenerateThreshold) * v_norm) return std::nullopt;
  return Vec<Scalar>(w / w_norm);
}

/// ||z_i - A A^+ z_i||_2 for every snapshot column, by direct projection.
template <typename Scalar>
Vec<Scalar> projection_errors(const Mat<Scalar>& states, const OrthoSymplecticBasis<Scalar>& basis) {
  if (basis.empty()) return states.colwise().norm().transpose();
  const Mat<Scalar> residual = states - basis.matrix() * (basis.inverse() * states);
  return residual.colwise().norm().transpose();
}

template <typename Scalar>
struct GreedyResult {
  OrthoSymplecticBasis<Scalar> basis;
  /// max_t projection error after each enrichment, starting with the
  /// initial pair {z0, J^T z0}.
  std::vector<Scalar> max_errors;
  /// snapshot index chosen at each enrichment (0 for the initial pair).
  std::vector<Eigen::Index> selected;
};

/// Greedy symplectic basis: start from z0, then repeatedly add the
/// J-orthogonalized snapshot worst approximated by the current span.
/// Stops when the worst error is <= tol or the basis has 2 * max_k columns.
template <typename Scalar>
GreedyResult<Scalar> greedy_basis_with_history(const SnapshotSet<Scalar>& snapshots, Scalar tol,
                                               Eigen::Index max_k) {
  if (snapshots.empty()) throw ShapeError("greedy_basis: empty snapshot set");
  if (max_k <= 0) throw ShapeError("greedy_basis: max_k must be positive");
  const Mat<Scalar>& z = snapshots.states();
  const Eigen::Index n = snapshots.half_dim();
  const Scalar z0_norm = z.col(0).norm();
  if (!(z0_norm > Scalar(0))) throw ShapeError("greedy_basis: first snapshot must be nonzero");
  max_k = std::min(max_k, n);

  GreedyResult<Scalar> out;
  out.basis.append(z.col(0) / z0_norm);
  out.selected.push_back(0);

  // Residuals are updated incrementally: for an ortho-symplectic basis
  // A A^+ = A A^T, so each new pair removes its own rank-2 projection.
  Mat<Scalar> residual = z;
  const CanonicalForm jn(n);
  auto remove_pair = [&](const Vec<Scalar>& e) {
    const Vec<Scalar> f = jn.apply_transpose(e);
    residual.noalias() -= e * (e.transpose() * residual);
    residual.noalias() -= f * (f.transpose() * residual);
  };
  remove_pair(out.basis.e_columns().col(0));

  std::vector<bool> exhausted(static_cast<std::size_t>(z.cols()), false);
  while (true) {
    const Vec<Scalar> errors = residual.colwise().norm().transpose();
    const Scalar worst = errors.maxCoeff();
    out.max_errors.push_back(worst);
    if (!(worst > tol) || out.basis.k() >= max_k) break;

    // Candidates by decreasing error; stable sort keeps the earliest
    // instant first on ties.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(z.cols()));
    for (Eigen::Index i = 0; i < z.cols(); ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return errors(a) > errors(b); });
    std::optional<Vec<Scalar>> e_next;
    Eigen::Index chosen = -1;
    for (Eigen::Index idx : order) {
      if (exhausted[static_cast<std::size_t>(idx)] || !(errors(idx) > Scalar(0))) continue;
      e_next = symplectic_gram_schmidt<Scalar>(z.col(idx), out.basis);
      if (e_next) {
        chosen = idx;
        break;
      }
      exhausted[static_cast<std::size_t>(idx)] = true;
    }
    if (!e_next) break;
    out.basis.append(*e_next);
    out.selected.push_back(chosen);
    remove_pair(*e_next);
  }

  const auto [ortho, sympl] = out.basis.defects();
  if (ortho > OrthoSymplecticBasis<Scalar>::kTolerance ||
      sympl > OrthoSymplecticBasis<Scalar>::kTolerance)
    throw NumericalError("greedy_basis: basis lost ortho-symplecticity");
  return out;
}

template <typename Scalar>
OrthoSymplecticBasis<Scalar> greedy_basis(const SnapshotSet<Scalar>& snapshots, Scalar tol,
                                          Eigen::Index max_k) {
  return greedy_basis_with_history(snapshots, tol, max_k).basis;
}

/// [Q | P]: the n x 2N matrix of position and momentum parts side by side.
template <typename Scalar>
Mat<Scalar> stacked_phase_matrix(const SnapshotSet<Scalar>& snapshots) {
  const Eigen::Index n = snapshots.half_dim();
  const Eigen::Index m = snapshots.size();
  Mat<Scalar> stacked(n, 2 * m);
  stacked.leftCols(m) = snapshots.states().topRows(n);
  stacked.rightCols(m) = snapshots.states().bottomRows(n);
  return stacked;
}

namespace detail {

template <typename Scalar>
Eigen::Index numerical_rank(const Vec<Scalar>& sigma) {
  if (sigma.size() == 0 || !(sigma(0) > Scalar(0))) return 0;
  const Scalar cutoff = sigma(0) * Scalar(kDegenerateThreshold);
  Eigen::Index r = 0;
  while (r < sigma.size() && sigma(r) > cutoff) ++r;
  return r;
}

template <typename Scalar>
struct LeftSvd {
  Mat<Scalar> u;
  Vec<Scalar> sigma;
};

template <typename Scalar>
LeftSvd<Scalar> left_svd(const Mat<Scalar>& m) {
  Eigen::BDCSVD<Mat<Scalar>> svd(m, Eigen::ComputeThinU);
  return {svd.matrixU(), svd.singularValues()};
}

void warn(const std::string& message);

}  // namespace detail

/// Cotangent lift: A = diag(Phi, Phi) with Phi the k leading left singular
/// vectors of [Q | P]. If the stacked matrix has numerical rank below k,
/// k is reduced to that rank and a warning is emitted.
template <typename Scalar>
OrthoSymplecticBasis<Scalar> cotangent_lift(const SnapshotSet<Scalar>& snapshots, Eigen::Index k) {
  if (snapshots.empty()) throw ShapeError("cotangent_lift: empty snapshot set");
  const Eigen::Index n = snapshots.half_dim();
  if (k <= 0 || k > n) throw ShapeError("cotangent_lift: k must lie in [1, n]");
  if (k > snapshots.size()) throw ShapeError("cotangent_lift: k exceeds snapshot count");
  const auto svd = detail::left_svd<Scalar>(stacked_phase_matrix(snapshots));
  const Eigen::Index rank = detail::numerical_rank(svd.sigma);
  if (rank == 0) throw ShapeError("cotangent_lift: snapshots are all zero");
  if (rank < k) {
    detail::warn("cotangent_lift: numerical rank " + std::to_string(rank) +
                 " is below requested k = " + std::to_string(k) + "; reducing k");
    k = rank;
  }
  Mat<Scalar> e = Mat<Scalar>::Zero(2 * n, k);
  e.topRows(n) = svd.u.leftCols(k);
  return OrthoSymplecticBasis<Scalar>(e);
}

/// Standard POD: the m leading left singular vectors of the snapshot matrix.
template <typename Scalar>
Mat<Scalar> pod_basis(const SnapshotSet<Scalar>& snapshots, Eigen::Index m) {
  if (snapshots.empty()) throw ShapeError("pod_basis: empty snapshot set");
  if (m <= 0 || m > snapshots.dim()) throw ShapeError("pod_basis: m must lie in [1, 2n]");
  if (m > snapshots.size()) throw ShapeError("pod_basis: m exceeds snapshot count");
  const auto svd = detail::left_svd<Scalar>(snapshots.states());
  const Eigen::Index rank = detail::numerical_rank(svd.sigma);
  if (rank == 0) throw ShapeError("pod_basis: snapshots are all zero");
  if (rank < m) {
    detail::warn("pod_basis: numerical rank " + std::to_string(rank) +
                 " is below requested m = " + std::to_string(m) + "; reducing m");
    m = rank;
  }
  return svd.u.leftCols(m);
}

enum class SpectrumMode { pod, cotangent };

/// Descending singular values of the raw (pod) or stacked (cotangent) matrix.
template <typename Scalar>
Vec<Scalar> singular_value_report(const SnapshotSet<Scalar>& snapshots, SpectrumMode mode) {
  if (snapshots.empty()) throw ShapeError("singular_value_report: empty snapshot set");
  const Mat<Scalar> m =
      mode == SpectrumMode::pod ? snapshots.states() : stacked_phase_matrix(snapshots);
  Eigen::BDCSVD<Mat<Scalar>> svd(m);
  return svd.singularValues();
}

}  // namespace sympmor
