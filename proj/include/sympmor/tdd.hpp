// Time-dispersive-dissipative (TDD) systems and their hidden-string
// Hamiltonian extension:
//
//   z' = J K^T f + J (g(z) - z_bd) + u,    f(t) + chi * int_0^t f ds = K z,
//
// with a constant symmetric positive-semidefinite susceptibility chi. The
// strings are never discretized: their coupling term reduces to the running
// integral of f, and their energy to int_0^t f^T chi f ds.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sympmor/errors.hpp"
#include "sympmor/integrators.hpp"
#include "sympmor/symplectic.hpp"

namespace sympmor {

/// Conservative nonlinear force: gradient g(z) and its scalar potential G(z).
template <typename Scalar>
struct NonlinearTerm {
  std::function<Vec<Scalar>(const Vec<Scalar>&)> gradient;
  std::function<Scalar(const Vec<Scalar>&)> potential;
};

/// PSD square root by symmetric eigendecomposition. Eigenvalues in
/// [-1e-12 * max(1, |M|), 0) are clamped to zero; anything lower throws.
template <typename Scalar>
Mat<Scalar> psd_sqrt(const Mat<Scalar>& m) {
  if (m.rows() != m.cols()) throw ShapeError("psd_sqrt: matrix must be square");
  if (m.size() == 0) return m;
  const Scalar scale = std::max(Scalar(1), m.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(Scalar(0.5) * (m + m.transpose()));
  Vec<Scalar> lambda = eig.eigenvalues();
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) < Scalar(-1e-12) * scale)
      throw ShapeError("psd_sqrt: matrix has a negative eigenvalue " +
                       std::to_string(static_cast<double>(lambda(i))));
    lambda(i) = std::sqrt(std::max(lambda(i), Scalar(0)));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

template <typename Scalar>
class TddSystem {
 public:
  TddSystem() = default;

  TddSystem(Mat<Scalar> factor, Mat<Scalar> chi, Vec<Scalar> z0)
      : k_(std::move(factor)), chi_(std::move(chi)), z0_(std::move(z0)) {
    const Eigen::Index dim = k_.rows();
    if (dim == 0 || dim % 2 != 0 || k_.cols() != dim)
      throw ShapeError("TddSystem: K must be 2n x 2n");
    if (chi_.rows() != dim || chi_.cols() != dim) throw ShapeError("TddSystem: chi must be 2n x 2n");
    if (z0_.size() != dim) throw ShapeError("TddSystem: z0 must have length 2n");
    const Scalar scale = std::max(Scalar(1), chi_.cwiseAbs().maxCoeff());
    if ((chi_ - chi_.transpose()).cwiseAbs().maxCoeff() > Scalar(1e-12) * scale)
      throw ShapeError("TddSystem: chi must be symmetric");
    chi_ = Scalar(0.5) * (chi_ + chi_.transpose());
    sqrt_chi_ = psd_sqrt(chi_);
    u_ = Vec<Scalar>::Zero(dim);
    z_bd_ = Vec<Scalar>::Zero(dim);
  }

  Eigen::Index half_dim() const { return k_.rows() / 2; }
  Eigen::Index dim() const { return k_.rows(); }

  const Mat<Scalar>& factor() const { return k_; }
  const Mat<Scalar>& chi() const { return chi_; }
  const Mat<Scalar>& sqrt_chi() const { return sqrt_chi_; }
  const Vec<Scalar>& z0() const { return z0_; }
  const Vec<Scalar>& input() const { return u_; }
  const Vec<Scalar>& boundary() const { return z_bd_; }
  bool has_input() const { return has_input_; }
  const std::optional<NonlinearTerm<Scalar>>& nonlinear() const { return nonlinear_; }

  /// Damping operator D of the originating system z' = J K^T K z - D z,
  /// needed only by the PSD and POD baselines.
  const std::optional<Mat<Scalar>>& dissipation() const { return dissipation_; }

  TddSystem& set_input(Vec<Scalar> u) {
    if (u.size() != dim()) throw ShapeError("TddSystem: input must have length 2n");
    u_ = std::move(u);
    has_input_ = true;
    return *this;
  }
  TddSystem& set_boundary(Vec<Scalar> z_bd) {
    if (z_bd.size() != dim()) throw ShapeError("TddSystem: boundary vector must have length 2n");
    z_bd_ = std::move(z_bd);
    return *this;
  }
  TddSystem& set_nonlinear(NonlinearTerm<Scalar> term) {
    if (!term.gradient || !term.potential)
      throw ShapeError("TddSystem: nonlinear term needs both gradient and potential");
    nonlinear_ = std::move(term);
    return *this;
  }
  TddSystem& set_dissipation(Mat<Scalar> d) {
    if (d.rows() != dim() || d.cols() != dim()) throw ShapeError("TddSystem: D must be 2n x 2n");
    dissipation_ = std::move(d);
    return *this;
  }
  TddSystem& set_z0(Vec<Scalar> z0) {
    if (z0.size() != dim()) throw ShapeError("TddSystem: z0 must have length 2n");
    z0_ = std::move(z0);
    return *this;
  }
  /// Scales chi (and D) by `factor`; 0 gives the conservative limit.
  TddSystem& scale_susceptibility(Scalar factor) {
    if (factor < Scalar(0)) throw ShapeError("TddSystem: susceptibility scale must be >= 0");
    chi_ *= factor;
    sqrt_chi_ *= std::sqrt(factor);
    if (dissipation_) *dissipation_ *= factor;
    return *this;
  }

  /// Potential part of the energy: G(z) - z_bd^T z.
  Scalar potential(const Vec<Scalar>& z) const {
    Scalar v = -z_bd_.dot(z);
    if (nonlinear_) v += nonlinear_->potential(z);
    return v;
  }
  /// g(z) - z_bd.
  Vec<Scalar> potential_gradient(const Vec<Scalar>& z) const {
    Vec<Scalar> grad = -z_bd_;
    if (nonlinear_) grad += nonlinear_->gradient(z);
    return grad;
  }
  /// Energy of the conservative system, 1/2 |K z|^2 + G(z) - z_bd^T z.
  Scalar hamiltonian(const Vec<Scalar>& z) const {
    return Scalar(0.5) * (k_ * z).squaredNorm() + potential(z);
  }

 private:
  Mat<Scalar> k_;
  Mat<Scalar> chi_;
  Mat<Scalar> sqrt_chi_;
  Vec<Scalar> z0_;
  Vec<Scalar> u_;
  Vec<Scalar> z_bd_;
  bool has_input_ = false;
  std::optional<NonlinearTerm<Scalar>> nonlinear_;
  std::optional<Mat<Scalar>> dissipation_;
};

/// One-step quadrature int_{t_n}^{t_n+1} f ds ~ dt * sum_i w_i f_{n+1-i}.
struct QuadratureRule {
  std::vector<double> unit_weights;

  static QuadratureRule trapezoid() { return {{0.5, 0.5}}; }
  /// Third-order Adams-Moulton; starts with the trapezoid rule.
  static QuadratureRule adams_moulton3() { return {{5.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0}}; }

  std::size_t history_length() const { return unit_weights.size() - 1; }
};

/// Memory of the hidden strings for one trajectory. Holds the latest
/// committed auxiliary values f_n, f_{n-1}, ..., the running integral of f
/// up to t_n, the string energy int f^T chi f, and the input work.
template <typename Scalar>
class StringAccumulator {
 public:
  StringAccumulator() = default;

  StringAccumulator(Eigen::Index dim, QuadratureRule rule = QuadratureRule::trapezoid())
      : rule_(std::move(rule)), integral_(Vec<Scalar>::Zero(dim)) {
    if (rule_.unit_weights.size() < 2) throw ShapeError("StringAccumulator: rule needs >= 2 weights");
  }

  const QuadratureRule& rule() const { return rule_; }
  const Vec<Scalar>& integral() const { return integral_; }
  Scalar string_energy() const { return string_energy_; }
  Scalar input_work() const { return input_work_; }
  const std::deque<Vec<Scalar>>& f_history() const { return f_history_; }
  bool empty() const { return f_history_.empty(); }

  /// Weights (times dt) active for the next step: the full rule once enough
  /// history exists, the trapezoid rule before that.
  std::vector<Scalar> active_weights(Scalar dt) const {
    const QuadratureRule& r = f_history_.size() >= rule_.history_length()
                                  ? rule_
                                  : trapezoid_;
    std::vector<Scalar> w;
    for (double c : r.unit_weights) w.push_back(Scalar(c) * dt);
    return w;
  }

  /// Known part of int_0^{t_n+1} f ds: integral + sum_{i>=1} w_i f_{n+1-i}.
  /// With empty history this is just the integral.
  Vec<Scalar> history_term(Scalar dt) const {
    Vec<Scalar> known = integral_;
    const auto w = active_weights(dt);
    for (std::size_t i = 1; i < w.size() && i - 1 < f_history_.size(); ++i)
      known += w[i] * f_history_[i - 1];
    return known;
  }

  /// Records f at t = 0 without advancing the integrals.
  void commit_initial(const Vec<Scalar>& f0, Scalar rate0, Scalar power0) {
    if (!f_history_.empty()) throw ShapeError("StringAccumulator: already initialized");
    push(f0, rate0, power0);
  }

  /// Commits the end-of-step auxiliary f_{n+1} with its dissipation rate
  /// f^T chi f and input power, advancing all running integrals.
  void commit(const Vec<Scalar>& f, Scalar rate, Scalar power, Scalar dt) {
    const auto w = active_weights(dt);
    integral_ += w[0] * f;
    Scalar de = w[0] * rate;
    Scalar dw = w[0] * power;
    for (std::size_t i = 1; i < w.size() && i - 1 < f_history_.size(); ++i) {
      integral_ += w[i] * f_history_[i - 1];
      de += w[i] * rate_history_[i - 1];
      dw += w[i] * power_history_[i - 1];
    }
    string_energy_ += de;
    input_work_ += dw;
    push(f, rate, power);
  }

 private:
  void push(const Vec<Scalar>& f, Scalar rate, Scalar power) {
    f_history_.push_front(f);
    rate_history_.push_front(rate);
    power_history_.push_front(power);
    const std::size_t keep = std::max<std::size_t>(rule_.history_length(), 1);
    while (f_history_.size() > keep) {
      f_history_.pop_back();
      rate_history_.pop_back();
      power_history_.pop_back();
    }
  }

  QuadratureRule rule_ = QuadratureRule::trapezoid();
  QuadratureRule trapezoid_ = QuadratureRule::trapezoid();
  std::deque<Vec<Scalar>> f_history_;
  std::deque<Scalar> rate_history_;
  std::deque<Scalar> power_history_;
  Vec<Scalar> integral_;
  Scalar string_energy_ = Scalar(0);
  Scalar input_work_ = Scalar(0);
};

/// State of the extended system at a step boundary.
template <typename Scalar>
struct ExtendedState {
  Vec<Scalar> z;
  Vec<Scalar> f;
  StringAccumulator<Scalar> accumulator;
  Scalar t = Scalar(0);
  /// Autonomization energy, e' = -(input power); never feeds back.
  Scalar e = Scalar(0);
  std::int64_t step = 0;
};

/// Solves the discretized auxiliary equation at the next node:
///   (I + w_0 chi) f = K z - chi * (integral + sum_{i>=1} w_i f_{n+1-i}).
template <typename Scalar>
Vec<Scalar> solve_auxiliary(const TddSystem<Scalar>& system, const Vec<Scalar>& z,
                            const StringAccumulator<Scalar>& acc, Scalar dt) {
  if (z.size() != system.dim()) throw ShapeError("solve_auxiliary: state length mismatch");
  if (!(dt > Scalar(0))) throw ShapeError("solve_auxiliary: dt must be positive");
  const Scalar w0 = acc.active_weights(dt).front();
  const Mat<Scalar> lhs = Mat<Scalar>::Identity(system.dim(), system.dim()) + w0 * system.chi();
  const Vec<Scalar> rhs = system.factor() * z - system.chi() * acc.history_term(dt);
  Eigen::LDLT<Mat<Scalar>> ldlt(lhs);
  if (ldlt.info() != Eigen::Success) throw NumericalError("solve_auxiliary: singular system");
  return ldlt.solve(rhs);
}

/// Energy of the dissipative system at a committed state, 1/2 |f|^2 + V(z).
/// f equals K times the state of the originating dissipative system, so this
/// is the quantity that decays; with chi = 0 it is H(z).
template <typename Scalar>
Scalar system_energy(const TddSystem<Scalar>& system, const ExtendedState<Scalar>& state) {
  return Scalar(0.5) * state.f.squaredNorm() + system.potential(state.z);
}

/// Conserved total: system energy + string energy + autonomization energy.
template <typename Scalar>
Scalar extended_hamiltonian(const TddSystem<Scalar>& system, const ExtendedState<Scalar>& state) {
  return system_energy(system, state) + state.accumulator.string_energy() + state.e;
}

/// Power delivered by the input, (K^T f + grad V)^T u.
template <typename Scalar>
Scalar input_power(const TddSystem<Scalar>& system, const Vec<Scalar>& z, const Vec<Scalar>& f) {
  if (!system.has_input()) return Scalar(0);
  return (system.factor().transpose() * f + system.potential_gradient(z)).dot(system.input());
}

/// Instantaneous d/dt of the system energy along the vector field at the
/// state: grad^T z' - f^T chi f with grad = K^T f + grad V.
template <typename Scalar>
Scalar energy_rate(const TddSystem<Scalar>& system, const Vec<Scalar>& z, const Vec<Scalar>& f) {
  const Vec<Scalar> grad = system.factor().transpose() * f + system.potential_gradient(z);
  const CanonicalForm j(system.half_dim());
  const Vec<Scalar> zdot = j.apply(grad) + system.input();
  return grad.dot(zdot) - f.dot(system.chi() * f);
}

/// dH/dt minus the supplied power; nonpositive for a passive trajectory.
template <typename Scalar>
Scalar passivity_residual(const TddSystem<Scalar>& system, const ExtendedState<Scalar>& state,
                          Scalar dh_dt) {
  return dh_dt - input_power(system, state.z, state.f);
}

/// Time series and snapshots of one trajectory.
template <typename Scalar>
struct RunReport {
  std::vector<Scalar> times;
  std::vector<Scalar> hamiltonian;
  std::vector<Scalar> string_energy;
  std::vector<Scalar> extended_energy;
  std::vector<Scalar> passivity_residual;
  SnapshotSet<Scalar> snapshots;
  /// Auxiliary f at the snapshot instants (same columns as `snapshots`).
  Mat<Scalar> aux_snapshots;
  /// max over steps of |f + chi I - K z|_max / (1 + |K z|_max).
  Scalar max_volterra_residual = Scalar(0);
  double wall_seconds = 0.0;
};

/// Stormer-Verlet for the extended system with a fixed step.
///
/// The evaluation at (q_n, p_{n+1/2}) uses the auxiliary at node t_n,
/// f = K Z - chi I_n, from the committed integral. The evaluations at
/// (q_{n+1}, p_{n+1/2}) solve the head of the quadrature at t_{n+1}. After
/// the step the end-of-step f_{n+1} is solved once more and committed.
template <typename Scalar>
class TddIntegrator {
 public:
  TddIntegrator(const TddSystem<Scalar>& system, Scalar dt,
                QuadratureRule rule = QuadratureRule::trapezoid())
      : system_(&system), dt_(dt), rule_(std::move(rule)), j_(system.half_dim()) {
    if (!(dt > Scalar(0))) throw ShapeError("TddIntegrator: dt must be positive");
    const Mat<Scalar>& k = system.factor();
    const Mat<Scalar> gram = k.transpose() * k;
    l_start_ = j_.apply(gram);
    kt_chi_ = k.transpose() * system.chi();
    c_const_ = system.input() - j_.apply(system.boundary());
    if (system.nonlinear()) {
      const auto grad = system.nonlinear()->gradient;
      nonlinear_ = [grad, j = j_](const Vec<Scalar>& z) { return Vec<Scalar>(j.apply(grad(z))); };
    }
    setup_for(Scalar(rule_.unit_weights.front()) * dt);
    setup_for(Scalar(0.5) * dt);
  }

  const TddSystem<Scalar>& system() const { return *system_; }
  Scalar dt() const { return dt_; }

  ExtendedState<Scalar> initial_state() const {
    ExtendedState<Scalar> s;
    s.z = system_->z0();
    s.f = system_->factor() * s.z;
    s.accumulator = StringAccumulator<Scalar>(system_->dim(), rule_);
    s.accumulator.commit_initial(s.f, s.f.dot(system_->chi() * s.f),
                                 input_power(*system_, s.z, s.f));
    return s;
  }

  void step(ExtendedState<Scalar>& s) const {
    const Scalar w0 = s.accumulator.active_weights(dt_).front();
    const Setup& setup = setup_for(w0);
    const Vec<Scalar> c_start = c_const_ - j_.apply(Vec<Scalar>(kt_chi_ * s.accumulator.integral()));
    const Vec<Scalar> s_chi_known = setup.s_chi * s.accumulator.history_term(dt_);
    const Vec<Scalar> c_end =
        c_const_ - j_.apply(Vec<Scalar>(system_->factor().transpose() * s_chi_known));

    Vec<Scalar> z_next = setup.verlet.step(s.z, c_start, c_end);
    if (!z_next.allFinite()) throw NumericalError("TddIntegrator: non-finite state", s.step + 1);
    Vec<Scalar> f_next = setup.s_k * z_next - s_chi_known;
    const Scalar rate = f_next.dot(system_->chi() * f_next);
    const Scalar power = input_power(*system_, z_next, f_next);
    s.accumulator.commit(f_next, rate, power, dt_);
    s.z = std::move(z_next);
    s.f = std::move(f_next);
    s.t += dt_;
    s.e = -s.accumulator.input_work();
    ++s.step;
  }

  /// |f + chi I - K z|_max / (1 + |K z|_max) at a committed state.
  Scalar volterra_residual(const ExtendedState<Scalar>& s) const {
    const Vec<Scalar> kz = system_->factor() * s.z;
    const Vec<Scalar> r = s.f + system_->chi() * s.accumulator.integral() - kz;
    return r.cwiseAbs().maxCoeff() / (Scalar(1) + kz.cwiseAbs().maxCoeff());
  }

 private:
  struct Setup {
    Scalar w0;
    Mat<Scalar> s_k;    // (I + w0 chi)^{-1} K
    Mat<Scalar> s_chi;  // (I + w0 chi)^{-1} chi
    PartitionedVerlet<Scalar> verlet;
  };

  const Setup& setup_for(Scalar w0) const {
    for (const auto& s : setups_)
      if (std::abs(s.w0 - w0) <= Scalar(1e-15) * std::abs(w0)) return s;
    const Mat<Scalar>& k = system_->factor();
    const Eigen::Index dim = system_->dim();
    Eigen::LDLT<Mat<Scalar>> ldlt(Mat<Scalar>::Identity(dim, dim) + w0 * system_->chi());
    if (ldlt.info() != Eigen::Success) throw NumericalError("TddIntegrator: singular auxiliary system");
    Setup s{w0, ldlt.solve(k), ldlt.solve(system_->chi()), {}};
    const Mat<Scalar> gram_end = k.transpose() * s.s_k;
    s.verlet = PartitionedVerlet<Scalar>(l_start_, j_.apply(gram_end), dt_, nonlinear_);
    setups_.push_back(std::move(s));
    return setups_.back();
  }

  const TddSystem<Scalar>* system_;
  Scalar dt_;
  QuadratureRule rule_;
  CanonicalForm j_;
  Mat<Scalar> l_start_;
  Mat<Scalar> kt_chi_;
  Vec<Scalar> c_const_;
  typename PartitionedVerlet<Scalar>::Field nonlinear_;
  mutable std::deque<Setup> setups_;
};

/// One extended Stormer-Verlet step (builds a fresh integrator; use
/// TddIntegrator directly for repeated steps).
template <typename Scalar>
ExtendedState<Scalar> verlet_step(const TddSystem<Scalar>& system, ExtendedState<Scalar> state,
                                  Scalar dt) {
  TddIntegrator<Scalar> integrator(system, dt, state.accumulator.rule());
  integrator.step(state);
  return state;
}

/// Integrates from z0 over [0, T] and records energies at every step and
/// snapshots (z and f) every `stride` steps, always including t = 0.
template <typename Scalar>
RunReport<Scalar> integrate(const TddSystem<Scalar>& system, Scalar t_end, Scalar dt,
                            Eigen::Index stride = 1,
                            QuadratureRule rule = QuadratureRule::trapezoid()) {
  if (t_end < Scalar(0)) throw ShapeError("integrate: T must be nonnegative");
  if (stride <= 0) throw ShapeError("integrate: stride must be positive");
  const auto started = std::chrono::steady_clock::now();
  const TddIntegrator<Scalar> integrator(system, dt, std::move(rule));
  const auto steps = static_cast<std::int64_t>(std::llround(t_end / dt));

  RunReport<Scalar> report;
  std::vector<Scalar> snap_times;
  std::vector<Vec<Scalar>> snap_z;
  std::vector<Vec<Scalar>> snap_f;
  ExtendedState<Scalar> s = integrator.initial_state();
  auto record = [&]() {
    const Scalar h = system_energy(system, s);
    report.times.push_back(s.t);
    report.hamiltonian.push_back(h);
    report.string_energy.push_back(s.accumulator.string_energy());
    report.extended_energy.push_back(extended_hamiltonian(system, s));
    report.passivity_residual.push_back(
        passivity_residual(system, s, energy_rate(system, s.z, s.f)));
    if (s.step % stride == 0) {
      snap_times.push_back(s.t);
      snap_z.push_back(s.z);
      snap_f.push_back(s.f);
    }
  };
  record();
  for (std::int64_t i = 0; i < steps; ++i) {
    integrator.step(s);
    // recompute time from the step index to avoid drift in the time axis
    s.t = dt * Scalar(s.step);
    report.max_volterra_residual =
        std::max(report.max_volterra_residual, integrator.volterra_residual(s));
    record();
  }

  Mat<Scalar> z(system.dim(), static_cast<Eigen::Index>(snap_z.size()));
  report.aux_snapshots.resize(system.dim(), z.cols());
  for (Eigen::Index c = 0; c < z.cols(); ++c) {
    z.col(c) = snap_z[static_cast<std::size_t>(c)];
    report.aux_snapshots.col(c) = snap_f[static_cast<std::size_t>(c)];
  }
  report.snapshots = SnapshotSet<Scalar>(std::move(snap_times), std::move(z));
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace sympmor
