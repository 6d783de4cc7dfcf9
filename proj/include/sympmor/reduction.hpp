// Reduced models: the Reduced Dissipative Hamiltonian (RDH) construction,
// symplectic Galerkin projection, and the PSD / POD baselines.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sympmor/cholesky.hpp"
#include "sympmor/errors.hpp"
#include "sympmor/integrators.hpp"
#include "sympmor/symplectic.hpp"
#include "sympmor/tdd.hpp"

namespace sympmor {

/// How the reduced factor and susceptibility are formed.
enum class ReducedFactorRule {
  /// K A = W L~ (thin QR, positive diagonal): L~ is the Cholesky factor of
  /// A^T K^T K A, W an orthonormal basis of range(K A) for the auxiliary
  /// variable, and chi~ = W^T chi W.
  projected,
  /// L~ = chol(A^T K^T K A), chi~ = A^T chi A, auxiliary lifted by A.
  congruence,
  /// L~ = A^T L A with L = chol(K^T K), chi~ = A^T chi A, lifted by A.
  direct,
};

template <typename Scalar>
struct ReducedTddSystem {
  /// The reduced model; a TDD system of half-dimension k.
  TddSystem<Scalar> system;
  OrthoSymplecticBasis<Scalar> basis;
  /// Lifts the reduced auxiliary variable: f ~ aux_basis * f~.
  Mat<Scalar> aux_basis;
  ReducedFactorRule rule = ReducedFactorRule::projected;

  const Mat<Scalar>& factor() const { return system.factor(); }
  const Mat<Scalar>& chi() const { return system.chi(); }
  const Vec<Scalar>& y0() const { return system.z0(); }
};

namespace detail {

/// Thin QR with a nonnegative diagonal in R.
template <typename Scalar>
std::pair<Mat<Scalar>, Mat<Scalar>> positive_thin_qr(const Mat<Scalar>& m) {
  Eigen::HouseholderQR<Mat<Scalar>> qr(m);
  const Eigen::Index c = m.cols();
  Mat<Scalar> q = qr.householderQ() * Mat<Scalar>::Identity(m.rows(), c);
  Mat<Scalar> r = qr.matrixQR().topRows(c).template triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < c; ++i) {
    if (r(i, i) < Scalar(0)) {
      r.row(i) *= Scalar(-1);
      q.col(i) *= Scalar(-1);
    }
  }
  return {std::move(q), std::move(r)};
}

template <typename Scalar>
void check_basis(const TddSystem<Scalar>& system, const OrthoSymplecticBasis<Scalar>& basis,
                 const char* who) {
  if (basis.empty()) throw ShapeError(std::string(who) + ": empty basis");
  if (basis.full_dim() != system.dim())
    throw ShapeError(std::string(who) + ": basis dimension does not match the system");
}

}  // namespace detail

/// Builds the RDH reduced model on an ortho-symplectic basis A:
///   y' = J L~^T f~ + J A^T (g(A y) - z_bd) + A^+ u,
///   f~ + chi~ int f~ = L~ y,   y(0) = A^+ z0.
template <typename Scalar>
ReducedTddSystem<Scalar> rdh_reduce(const TddSystem<Scalar>& system,
                                    const OrthoSymplecticBasis<Scalar>& basis,
                                    ReducedFactorRule rule = ReducedFactorRule::projected) {
  detail::check_basis(system, basis, "rdh_reduce");
  const Mat<Scalar>& a = basis.matrix();
  const Mat<Scalar> a_plus = basis.inverse();
  const Mat<Scalar> ka = system.factor() * a;

  Mat<Scalar> l_tilde;
  Mat<Scalar> chi_tilde;
  Mat<Scalar> aux_basis;
  switch (rule) {
    case ReducedFactorRule::projected: {
      auto [w, r] = detail::positive_thin_qr(ka);
      l_tilde = std::move(r);
      chi_tilde = w.transpose() * system.chi() * w;
      aux_basis = std::move(w);
      break;
    }
    case ReducedFactorRule::congruence:
      l_tilde = cholesky_factor(Mat<Scalar>(ka.transpose() * ka));
      chi_tilde = a.transpose() * system.chi() * a;
      aux_basis = a;
      break;
    case ReducedFactorRule::direct: {
      const Mat<Scalar> l = cholesky_factor(Mat<Scalar>(system.factor().transpose() * system.factor()));
      l_tilde = a.transpose() * l * a;
      chi_tilde = a.transpose() * system.chi() * a;
      aux_basis = a;
      break;
    }
  }
  if (!l_tilde.allFinite() || !chi_tilde.allFinite())
    throw NumericalError("rdh_reduce: reduced operators are not finite");
  chi_tilde = Scalar(0.5) * (chi_tilde + chi_tilde.transpose());

  ReducedTddSystem<Scalar> out;
  out.system = TddSystem<Scalar>(l_tilde, chi_tilde, a_plus * system.z0());
  out.system.set_boundary(a.transpose() * system.boundary());
  if (system.has_input()) out.system.set_input(a_plus * system.input());
  if (system.nonlinear()) {
    const auto term = *system.nonlinear();
    out.system.set_nonlinear(NonlinearTerm<Scalar>{
        [term, a](const Vec<Scalar>& y) { return Vec<Scalar>(a.transpose() * term.gradient(a * y)); },
        [term, a](const Vec<Scalar>& y) { return term.potential(Vec<Scalar>(a * y)); }});
  }
  if (system.dissipation()) out.system.set_dissipation(a_plus * *system.dissipation() * a);
  out.basis = basis;
  out.aux_basis = std::move(aux_basis);
  out.rule = rule;
  return out;
}

/// Symplectic Galerkin projection of the conservative part: the RDH model of
/// the system with chi = 0, i.e. y' = J grad H(A y) with H~(y) = H(A y).
template <typename Scalar>
ReducedTddSystem<Scalar> symplectic_galerkin(const TddSystem<Scalar>& system,
                                             const OrthoSymplecticBasis<Scalar>& basis,
                                             ReducedFactorRule rule = ReducedFactorRule::projected) {
  TddSystem<Scalar> conservative = system;
  conservative.scale_susceptibility(Scalar(0));
  return rdh_reduce(conservative, basis, rule);
}

/// z = A y for every column.
template <typename Scalar>
Mat<Scalar> reconstruct(const Mat<Scalar>& basis, const Mat<Scalar>& y) {
  if (basis.cols() != y.rows()) throw ShapeError("reconstruct: basis and coordinates do not match");
  return basis * y;
}

template <typename Scalar>
SnapshotSet<Scalar> reconstruct(const Mat<Scalar>& basis, const SnapshotSet<Scalar>& y) {
  return SnapshotSet<Scalar>(y.times(), reconstruct(basis, y.states()));
}

enum class BaselineKind { psd, pod };

/// A linear(-plus-nonlinear) reduced ODE y' = M y + c + N(y) from the
/// dissipative form z' = J K^T K z - D z + u + J (g(z) - z_bd).
template <typename Scalar>
struct BaselineReduced {
  BaselineKind kind = BaselineKind::psd;
  Mat<Scalar> projection;  // A or V, 2n x m
  Mat<Scalar> op;          // M, m x m
  Vec<Scalar> constant;    // c
  std::function<Vec<Scalar>(const Vec<Scalar>&)> nonlinear;  // N(y), may be empty
  Vec<Scalar> y0;
  /// The full system, for energy evaluation H(V y).
  TddSystem<Scalar> full;

  Vec<Scalar> rhs(const Vec<Scalar>& y) const {
    Vec<Scalar> out = op * y + constant;
    if (nonlinear) out += nonlinear(y);
    return out;
  }
};

/// PSD baseline: symplectic Galerkin projection of the dissipative system
/// without strings, y' = J A^T K^T K A y - A^+ D A y + A^+ u + J A^T (g - z_bd).
template <typename Scalar>
BaselineReduced<Scalar> psd_baseline(const TddSystem<Scalar>& system,
                                     const OrthoSymplecticBasis<Scalar>& basis) {
  detail::check_basis(system, basis, "psd_baseline");
  if (!system.dissipation())
    throw ShapeError("psd_baseline: the system carries no damping operator D; "
                     "build it with one of the benchmark constructors");
  const Mat<Scalar>& a = basis.matrix();
  const Mat<Scalar> a_plus = basis.inverse();
  const CanonicalForm jk(basis.k());
  const Mat<Scalar> ka = system.factor() * a;

  BaselineReduced<Scalar> out;
  out.kind = BaselineKind::psd;
  out.projection = a;
  out.op = jk.apply(Mat<Scalar>(ka.transpose() * ka)) - a_plus * *system.dissipation() * a;
  out.constant = a_plus * system.input() - jk.apply(Vec<Scalar>(a.transpose() * system.boundary()));
  if (system.nonlinear()) {
    const auto grad = system.nonlinear()->gradient;
    out.nonlinear = [grad, a, jk](const Vec<Scalar>& y) {
      return Vec<Scalar>(jk.apply(Vec<Scalar>(a.transpose() * grad(a * y))));
    };
  }
  out.y0 = a_plus * system.z0();
  out.full = system;
  return out;
}

/// The full dissipative model itself, as a PSD model on the identity basis.
template <typename Scalar>
BaselineReduced<Scalar> dissipative_full_model(const TddSystem<Scalar>& system) {
  return psd_baseline(system, OrthoSymplecticBasis<Scalar>::identity(system.half_dim()));
}

/// POD baseline: Galerkin projection y' = V^T (J K^T K - D) V y + ... on an
/// orthonormal V, integrated with classical RK4.
template <typename Scalar>
BaselineReduced<Scalar> pod_baseline(const TddSystem<Scalar>& system, const Mat<Scalar>& v) {
  if (v.rows() != system.dim() || v.cols() == 0) throw ShapeError("pod_baseline: V must be 2n x m");
  if (!system.dissipation())
    throw ShapeError("pod_baseline: the system carries no damping operator D; "
                     "build it with one of the benchmark constructors");
  const CanonicalForm jn(system.half_dim());
  const Mat<Scalar> gram = system.factor().transpose() * system.factor();
  BaselineReduced<Scalar> out;
  out.kind = BaselineKind::pod;
  out.projection = v;
  out.op = v.transpose() * (jn.apply(gram) - *system.dissipation()) * v;
  out.constant = v.transpose() * (system.input() - jn.apply(system.boundary()));
  if (system.nonlinear()) {
    const auto grad = system.nonlinear()->gradient;
    out.nonlinear = [grad, v, jn](const Vec<Scalar>& y) {
      return Vec<Scalar>(v.transpose() * jn.apply(grad(v * y)));
    };
  }
  out.y0 = v.transpose() * system.z0();
  out.full = system;
  return out;
}

/// Largest real part of the eigenvalues of the linear part.
template <typename Scalar>
Scalar spectral_abscissa(const Mat<Scalar>& op) {
  Eigen::EigenSolver<Mat<Scalar>> eig(op, false);
  return eig.eigenvalues().real().maxCoeff();
}

/// Integrates a baseline model: Stormer-Verlet stages for PSD, RK4 for POD.
/// Snapshots hold the reduced coordinates y; hamiltonian holds H(V y).
/// A non-finite state stops the run early and sets `diverged`.
template <typename Scalar>
struct BaselineRun {
  RunReport<Scalar> report;
  bool diverged = false;
  std::int64_t diverged_at = -1;
};

template <typename Scalar>
BaselineRun<Scalar> integrate_baseline(const BaselineReduced<Scalar>& model, Scalar t_end, Scalar dt,
                                       Eigen::Index stride = 1) {
  if (t_end < Scalar(0) || !(dt > Scalar(0))) throw ShapeError("integrate_baseline: bad T or dt");
  if (stride <= 0) throw ShapeError("integrate_baseline: stride must be positive");
  const auto started = std::chrono::steady_clock::now();
  const auto steps = static_cast<std::int64_t>(std::llround(t_end / dt));
  const Mat<Scalar> kv = model.full.factor() * model.projection;
  const CanonicalForm jn(model.full.half_dim());

  std::optional<PartitionedVerlet<Scalar>> verlet;
  if (model.kind == BaselineKind::psd) {
    if (model.op.rows() % 2 != 0) throw ShapeError("integrate_baseline: PSD model must be even-dimensional");
    verlet.emplace(model.op, model.op, dt, model.nonlinear);
  }

  BaselineRun<Scalar> run;
  RunReport<Scalar>& report = run.report;
  std::vector<Scalar> snap_times;
  std::vector<Vec<Scalar>> snap_y;
  Vec<Scalar> y = model.y0;
  auto record = [&](std::int64_t step) {
    const Vec<Scalar> z = model.projection * y;
    const Vec<Scalar> kz = kv * y;
    const Scalar h = Scalar(0.5) * kz.squaredNorm() + model.full.potential(z);
    const Vec<Scalar> grad = model.full.factor().transpose() * kz + model.full.potential_gradient(z);
    const Vec<Scalar> zdot = model.projection * model.rhs(y);
    report.times.push_back(dt * Scalar(step));
    report.hamiltonian.push_back(h);
    report.string_energy.push_back(Scalar(0));
    report.extended_energy.push_back(h);
    report.passivity_residual.push_back(grad.dot(zdot) - grad.dot(model.full.input()));
    if (step % stride == 0) {
      snap_times.push_back(dt * Scalar(step));
      snap_y.push_back(y);
    }
  };
  record(0);
  for (std::int64_t i = 1; i <= steps; ++i) {
    Vec<Scalar> next;
    if (verlet) {
      next = verlet->step(y, model.constant, model.constant);
    } else {
      next = rk4_step<Scalar>([&](const Vec<Scalar>& v) { return model.rhs(v); }, y, dt);
    }
    if (!next.allFinite()) {
      run.diverged = true;
      run.diverged_at = i;
      break;
    }
    y = std::move(next);
    record(i);
  }
  Mat<Scalar> ys(model.projection.cols(), static_cast<Eigen::Index>(snap_y.size()));
  for (Eigen::Index c = 0; c < ys.cols(); ++c) ys.col(c) = snap_y[static_cast<std::size_t>(c)];
  report.snapshots = SnapshotSet<Scalar>(std::move(snap_times), std::move(ys));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return run;
}

template <typename Scalar>
struct ErrorSeries {
  std::vector<Scalar> per_instant;
  Scalar max = Scalar(0);
  Scalar mean = Scalar(0);
};

/// Per-instant ||z_full - z_red||_2 * weight plus max and time-mean.
/// Pass weight = sqrt(dx) for grid functions, 1 for ODE states.
template <typename Scalar>
ErrorSeries<Scalar> l2_error(const SnapshotSet<Scalar>& full, const SnapshotSet<Scalar>& reduced,
                             Scalar weight = Scalar(1)) {
  if (full.size() != reduced.size() || full.dim() != reduced.dim())
    throw ShapeError("l2_error: snapshot sets differ in shape");
  for (Eigen::Index i = 0; i < full.size(); ++i) {
    const Scalar a = full.times()[static_cast<std::size_t>(i)];
    const Scalar b = reduced.times()[static_cast<std::size_t>(i)];
    if (std::abs(a - b) > Scalar(1e-9) * std::max(Scalar(1), std::abs(a)))
      throw ShapeError("l2_error: snapshot instants do not match");
  }
  ErrorSeries<Scalar> out;
  if (full.size() == 0) return out;
  const Vec<Scalar> norms = (full.states() - reduced.states()).colwise().norm().transpose() * weight;
  out.per_instant.assign(norms.data(), norms.data() + norms.size());
  out.max = norms.maxCoeff();
  out.mean = norms.mean();
  return out;
}

}  // namespace sympmor
