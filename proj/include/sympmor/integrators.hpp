// One-step integrators shared by the full, reduced and baseline models.
#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include <Eigen/Dense>

#include "sympmor/errors.hpp"
#include "sympmor/symplectic.hpp"

namespace sympmor {

/// Stormer-Verlet in partitioned (Lobatto IIIA-IIIB) form for
///
///   z' = L z + c + N(z),   z = (q, p),
///
/// where the linear part and the constant may differ between the evaluation
/// at the start of the step (q_n, p_{n+1/2}) and at its end
/// (q_{n+1}, p_{n+1/2}). Implicit stages are linear solves with factorized
/// blocks; a nonlinear part, if present, is resolved by fixed-point
/// iteration around those solves.
template <typename Scalar>
class PartitionedVerlet {
 public:
  using Field = std::function<Vec<Scalar>(const Vec<Scalar>&)>;

  static constexpr int kMaxIterations = 60;

  PartitionedVerlet() = default;

  PartitionedVerlet(Mat<Scalar> l_start, Mat<Scalar> l_end, Scalar dt, Field nonlinear = {})
      : l_start_(std::move(l_start)), l_end_(std::move(l_end)), dt_(dt),
        nonlinear_(std::move(nonlinear)) {
    const Eigen::Index dim = l_start_.rows();
    if (dim % 2 != 0 || l_start_.cols() != dim || l_end_.rows() != dim || l_end_.cols() != dim)
      throw ShapeError("PartitionedVerlet: operators must be square with even dimension");
    if (!(dt > Scalar(0))) throw ShapeError("PartitionedVerlet: dt must be positive");
    m_ = dim / 2;
    const Mat<Scalar> eye = Mat<Scalar>::Identity(m_, m_);
    half_step_solver_.compute(eye - Scalar(0.5) * dt_ * l_start_.bottomRightCorner(m_, m_));
    position_solver_.compute(eye - Scalar(0.5) * dt_ * l_end_.topLeftCorner(m_, m_));
  }

  Scalar dt() const { return dt_; }
  Eigen::Index half_dim() const { return m_; }

  /// Advances z by one step. c_start / c_end are the constants of the start
  /// and end evaluations. Optionally reports the two stage states.
  Vec<Scalar> step(const Vec<Scalar>& z, const Vec<Scalar>& c_start, const Vec<Scalar>& c_end,
                   Vec<Scalar>* stage_start = nullptr, Vec<Scalar>* stage_end = nullptr) const {
    const Scalar h = Scalar(0.5) * dt_;
    const auto q = z.head(m_);
    const auto p = z.tail(m_);

    Vec<Scalar> z1(2 * m_);
    z1.head(m_) = q;
    // p_{n+1/2} = p_n + h * F_p(q_n, p_{n+1/2})
    const Vec<Scalar> rhs1 = p + h * (l_start_.bottomLeftCorner(m_, m_) * q + c_start.tail(m_));
    z1.tail(m_) = half_step_solver_.solve(rhs1);
    if (nonlinear_) {
      iterate([&](Vec<Scalar>& ph) {
        z1.tail(m_) = ph;
        const Vec<Scalar> nl = nonlinear_(z1);
        return Vec<Scalar>(half_step_solver_.solve(rhs1 + h * nl.tail(m_)));
      }, z1, m_, m_);
    }
    const Vec<Scalar> nl1 = nonlinear_ ? nonlinear_(z1) : Vec<Scalar>::Zero(2 * m_);

    // q_{n+1} = q_n + h * (F_q(z1) + F_q(z2))
    const Vec<Scalar> fq1 = l_start_.topRows(m_) * z1 + c_start.head(m_) + nl1.head(m_);
    Vec<Scalar> z2(2 * m_);
    z2.tail(m_) = z1.tail(m_);
    const Vec<Scalar> rhs2 =
        q + h * (fq1 + l_end_.topRightCorner(m_, m_) * z1.tail(m_) + c_end.head(m_));
    z2.head(m_) = position_solver_.solve(rhs2);
    if (nonlinear_) {
      iterate([&](Vec<Scalar>& qn) {
        z2.head(m_) = qn;
        const Vec<Scalar> nl = nonlinear_(z2);
        return Vec<Scalar>(position_solver_.solve(rhs2 + h * nl.head(m_)));
      }, z2, 0, m_);
    }
    const Vec<Scalar> nl2 = nonlinear_ ? nonlinear_(z2) : Vec<Scalar>::Zero(2 * m_);

    // p_{n+1} = p_{n+1/2} + h * F_p(z2)
    Vec<Scalar> out = z2;
    out.tail(m_) += h * (l_end_.bottomRows(m_) * z2 + c_end.tail(m_) + nl2.tail(m_));
    if (stage_start) *stage_start = z1;
    if (stage_end) *stage_end = z2;
    return out;
  }

 private:
  // Fixed-point iteration on the block [offset, offset + len) of `stage`.
  template <typename Update>
  void iterate(Update&& update, Vec<Scalar>& stage, Eigen::Index offset, Eigen::Index len) const {
    Vec<Scalar> current = stage.segment(offset, len);
    for (int it = 0; it < kMaxIterations; ++it) {
      Vec<Scalar> next = update(current);
      const Scalar change = (next - current).norm();
      current = std::move(next);
      if (change <= Scalar(1e-13) * (Scalar(1) + current.norm())) {
        stage.segment(offset, len) = current;
        return;
      }
    }
    throw NumericalError("PartitionedVerlet: implicit stage did not converge");
  }

  Mat<Scalar> l_start_;
  Mat<Scalar> l_end_;
  Scalar dt_{};
  Eigen::Index m_{};
  Field nonlinear_;
  Eigen::PartialPivLU<Mat<Scalar>> half_step_solver_;
  Eigen::PartialPivLU<Mat<Scalar>> position_solver_;
};

/// Classical fourth-order Runge-Kutta step for y' = rhs(y).
template <typename Scalar, typename Rhs>
Vec<Scalar> rk4_step(const Rhs& rhs, const Vec<Scalar>& y, Scalar dt) {
  const Vec<Scalar> k1 = rhs(y);
  const Vec<Scalar> k2 = rhs(Vec<Scalar>(y + Scalar(0.5) * dt * k1));
  const Vec<Scalar> k3 = rhs(Vec<Scalar>(y + Scalar(0.5) * dt * k2));
  const Vec<Scalar> k4 = rhs(Vec<Scalar>(y + dt * k3));
  return y + dt / Scalar(6) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

}  // namespace sympmor
