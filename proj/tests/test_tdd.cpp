#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sympmor/cholesky.hpp"
#include "sympmor/tdd.hpp"
#include "support.hpp"

using namespace sympmor;
using testing::max_abs;

namespace {

constexpr double kOmega = 2.0;
constexpr double kDamping = 0.3;

// q'' + r q' + w^2 q = 0 with q(0) = 1, q'(0) = 0, as a one-dof TDD system:
// K = diag(w, 1), chi = diag(0, r).
TddSystem<double> oscillator(double r = kDamping) {
  Matrix k = Matrix::Zero(2, 2);
  k(0, 0) = kOmega;
  k(1, 1) = 1.0;
  Matrix chi = Matrix::Zero(2, 2);
  chi(1, 1) = r;
  TddSystem<double> s(k, chi, (Vector(2) << 1.0, 0.0).finished());
  s.set_dissipation(chi);
  return s;
}

double exact_q(double t, double r = kDamping) {
  const double wd = std::sqrt(kOmega * kOmega - 0.25 * r * r);
  return std::exp(-0.5 * r * t) * (std::cos(wd * t) + 0.5 * r / wd * std::sin(wd * t));
}

double max_q_error(double dt, double t_end) {
  const auto run = integrate(oscillator(), t_end, dt, 1);
  double err = 0.0;
  for (Eigen::Index i = 0; i < run.snapshots.size(); ++i)
    err = std::max(err, std::abs(run.snapshots.state(i)(0) - exact_q(run.snapshots.times()[i])));
  return err;
}

double max_drift(const std::vector<double>& series) {
  double d = 0.0;
  for (double v : series) d = std::max(d, std::abs(v - series.front()));
  return d;
}

}  // namespace

TEST_CASE("cholesky factor of a 2x2 SPD matrix") {
  Matrix m(2, 2);
  m << 4, 2, 2, 3;
  const Matrix u = cholesky_factor(m);
  Matrix expected(2, 2);
  expected << 2, 1, 0, std::sqrt(2.0);
  CHECK(max_abs(u - expected) <= 1e-15);
}

TEST_CASE("cholesky factor accepts semidefinite matrices") {
  CHECK(max_abs(cholesky_factor(Matrix::Zero(3, 3))) == 0.0);
  Matrix m(2, 2);
  m << 1, 1, 1, 1;
  const Matrix u = cholesky_factor(m);
  Matrix expected(2, 2);
  expected << 1, 1, 0, 0;
  CHECK(max_abs(u - expected) <= 1e-15);
  CHECK(max_abs(u.transpose() * u - m) <= 1e-15);
}

TEST_CASE("cholesky factor rejects indefinite and nonsymmetric input") {
  Matrix m(2, 2);
  m << 1, 2, 2, 1;
  try {
    (void)cholesky_factor(m);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    CHECK(std::string(e.what()).find("pivot 1") != std::string::npos);
  }
  Matrix n(2, 2);
  n << 1, 0, 1, 1;
  CHECK_THROWS_AS(cholesky_factor(n), ShapeError);
}

TEST_CASE("psd square root") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const Matrix s = psd_sqrt<double>(m);
  CHECK(max_abs(s * s - m) <= 1e-14);
  CHECK(max_abs(s - s.transpose()) <= 1e-15);
  Matrix neg = -Matrix::Identity(2, 2);
  CHECK_THROWS_AS(psd_sqrt<double>(neg), ShapeError);
}

TEST_CASE("system construction checks shapes and symmetry") {
  CHECK_THROWS_AS(TddSystem<double>(Matrix::Identity(3, 3), Matrix::Zero(3, 3), Vector::Zero(3)),
                  ShapeError);
  CHECK_THROWS_AS(TddSystem<double>(Matrix::Identity(2, 2), Matrix::Zero(4, 4), Vector::Zero(2)),
                  ShapeError);
  Matrix chi(2, 2);
  chi << 0, 1, 0, 0;
  CHECK_THROWS_AS(TddSystem<double>(Matrix::Identity(2, 2), chi, Vector::Zero(2)), ShapeError);
  auto s = oscillator();
  CHECK_THROWS_AS(s.set_input(Vector::Zero(3)), ShapeError);
  CHECK_THROWS_AS(s.scale_susceptibility(-1.0), ShapeError);
}

TEST_CASE("adams-moulton accumulator starts with the trapezoid rule") {
  StringAccumulator<double> acc(2, QuadratureRule::adams_moulton3());
  const auto w = acc.active_weights(0.1);
  REQUIRE(w.size() == 2);
  CHECK(w[0] == doctest::Approx(0.05));
  acc.commit_initial(Vector::Ones(2), 0.0, 0.0);
  acc.commit(Vector::Ones(2), 0.0, 0.0, 0.1);
  const auto w3 = acc.active_weights(0.1);
  REQUIRE(w3.size() == 3);
  CHECK(w3[0] == doctest::Approx(5.0 / 120.0));
  CHECK(acc.integral()(0) == doctest::Approx(0.1));
}

TEST_CASE("trapezoid accumulator integrates a linear function exactly") {
  StringAccumulator<double> acc(1);
  const double dt = 0.25;
  acc.commit_initial(Vector::Zero(1), 0.0, 0.0);
  for (int i = 1; i <= 8; ++i) acc.commit(Vector::Constant(1, dt * i), 0.0, 0.0, dt);
  CHECK(acc.integral()(0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("damped oscillator follows the closed form") {
  CHECK(max_q_error(1e-3, 10.0) <= 2e-6);
}

TEST_CASE("damped oscillator error is second order in dt") {
  const double e1 = max_q_error(1e-2, 10.0);
  const double e2 = max_q_error(5e-3, 10.0);
  const double e3 = max_q_error(2.5e-3, 10.0);
  for (double ratio : {e1 / e2, e2 / e3}) {
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("auxiliary satisfies the brute-force discrete Volterra relation") {
  const auto b = testing::desk_wave(40);
  const double dt = b.dt;
  const auto run = integrate(b.system, 1.0, dt, 1);
  const Matrix& f = run.aux_snapshots;
  const Matrix& z = run.snapshots.states();
  Vector integral = Vector::Zero(b.system.dim());
  double worst = 0.0;
  for (Eigen::Index n = 1; n < f.cols(); ++n) {
    integral += 0.5 * dt * (f.col(n - 1) + f.col(n));
    const Vector kz = b.system.factor() * z.col(n);
    const Vector r = f.col(n) + b.system.chi() * integral - kz;
    worst = std::max(worst, max_abs(r) / (1.0 + max_abs(kz)));
  }
  CHECK(worst <= 1e-12);
  CHECK(run.max_volterra_residual <= 1e-12);
}

TEST_CASE("zero susceptibility reproduces classical leapfrog") {
  auto b = testing::desk_wave();
  b.system.scale_susceptibility(0.0);
  const Eigen::Index n = b.system.half_dim();
  const double dt = b.dt;
  const auto run = integrate(b.system, 100 * dt, dt, 100);

  const Matrix kq = b.system.factor().topLeftCorner(n, n);
  const Matrix stiffness = kq.transpose() * kq;
  Vector q = b.system.z0().head(n);
  Vector p = b.system.z0().tail(n);
  for (int i = 0; i < 100; ++i) {
    p -= 0.5 * dt * stiffness * q;
    q += dt * p;
    p -= 0.5 * dt * stiffness * q;
  }
  Vector expected(2 * n);
  expected << q, p;
  const Vector got = run.snapshots.state(run.snapshots.size() - 1);
  CHECK(max_abs(got - expected) <= 1e-13 * std::max(1.0, max_abs(expected)));
}

TEST_CASE("conservative limit conserves the Hamiltonian up to O(dt^2) oscillation") {
  auto s = oscillator(0.0);
  const auto run = integrate(s, 50.0, 0.01, 10);
  CHECK(max_drift(run.hamiltonian) <= 1e-4 * run.hamiltonian.front());
  CHECK(max_drift(run.string_energy) == 0.0);
}

TEST_CASE("extended energy error shrinks quadratically") {
  const auto coarse = integrate(oscillator(), 10.0, 0.02, 10);
  const auto fine = integrate(oscillator(), 10.0, 0.01, 10);
  const double ratio = max_drift(coarse.extended_energy) / max_drift(fine.extended_energy);
  CHECK(ratio >= 3.0);
  CHECK(ratio <= 5.0);
}

TEST_CASE("string energy never decreases and the system energy decays") {
  const auto b = testing::desk_wave();
  const auto run = integrate(b.system, 2.0, b.dt, 50);
  for (std::size_t i = 1; i < run.string_energy.size(); ++i)
    CHECK(run.string_energy[i] >= run.string_energy[i - 1]);
  CHECK(run.hamiltonian.back() < run.hamiltonian.front());
  CHECK(max_drift(run.extended_energy) <= 1e-4 * run.extended_energy.front());
}

TEST_CASE("passivity residual without input is nonpositive") {
  const auto b = testing::desk_wave();
  const auto run = integrate(b.system, 1.0, b.dt, 50);
  for (double r : run.passivity_residual) CHECK(r <= 1e-12);
}

TEST_CASE("passivity residual vanishes without dissipation or input") {
  auto b = testing::desk_wave();
  b.system.scale_susceptibility(0.0);
  const auto run = integrate(b.system, 1.0, b.dt, 50);
  const double scale = run.hamiltonian.front();
  for (double r : run.passivity_residual) CHECK(std::abs(r) <= 1e-12 * std::max(1.0, scale));
}

TEST_CASE("energy rate agrees with a centered difference of the energy") {
  auto error_at = [](double dt) {
    const auto run = integrate(oscillator(), 2.0, dt, 1);
    auto s = oscillator();
    double worst = 0.0;
    for (std::size_t n = 1; n + 1 < run.hamiltonian.size(); ++n) {
      const double fd = (run.hamiltonian[n + 1] - run.hamiltonian[n - 1]) / (2.0 * dt);
      const Vector z = run.snapshots.state(static_cast<Eigen::Index>(n));
      const Vector f = run.aux_snapshots.col(static_cast<Eigen::Index>(n));
      worst = std::max(worst, std::abs(fd - energy_rate(s, z, f)));
    }
    return worst;
  };
  const double coarse = error_at(0.02);
  const double fine = error_at(0.01);
  CHECK(fine <= 1e-3);
  CHECK(coarse / fine >= 3.0);
  CHECK(coarse / fine <= 5.0);
}

TEST_CASE("input work enters the extended energy") {
  auto s = oscillator();
  s.set_input((Vector(2) << 0.0, 0.5).finished());
  const auto run = integrate(s, 10.0, 0.005, 10);
  CHECK(max_drift(run.extended_energy) <= 1e-4);
  // without the autonomization term the balance would be off by the work done
  double spread = 0.0;
  for (std::size_t i = 0; i < run.hamiltonian.size(); ++i)
    spread = std::max(spread, std::abs(run.hamiltonian[i] + run.string_energy[i] -
                                       run.hamiltonian.front()));
  CHECK(spread > 1e-2);
}

TEST_CASE("integrate records every step and strided snapshots") {
  const auto run = integrate(oscillator(), 1.0, 0.1, 3);
  CHECK(run.times.size() == 11);
  CHECK(run.snapshots.size() == 4);
  CHECK(run.snapshots.times().back() == doctest::Approx(0.9));
  CHECK(run.aux_snapshots.cols() == 4);
  CHECK_THROWS_AS(integrate(oscillator(), 1.0, 0.1, 0), ShapeError);
  CHECK_THROWS_AS(integrate(oscillator(), 1.0, -0.1, 1), ShapeError);
}

TEST_CASE("single verlet step matches the integrator") {
  auto s = oscillator();
  TddIntegrator<double> integrator(s, 0.05);
  auto a = integrator.initial_state();
  auto b = a;
  integrator.step(a);
  b = verlet_step(s, b, 0.05);
  CHECK(max_abs(a.z - b.z) == 0.0);
  CHECK(max_abs(a.f - b.f) == 0.0);
}
