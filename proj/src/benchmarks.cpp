#include "sympmor/benchmarks.hpp"

#include <cmath>
#include <algorithm>
#include <utility>
#include <string>

#include <Eigen/Eigenvalues>

#include "sympmor/cholesky.hpp"
#include "sympmor/errors.hpp"

namespace sympmor {

namespace {

Matrix block_diag(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows() + b.rows(), a.cols() + b.cols());
  out.topLeftCorner(a.rows(), a.cols()) = a;
  out.bottomRightCorner(b.rows(), b.cols()) = b;
  return out;
}

double broadcast(const std::vector<double>& values, int i) {
  return values.size() == 1 ? values.front() : values[static_cast<std::size_t>(i)];
}

}  // namespace

double DampingProfile::at(int i, int n) const {
  if (rule == Rule::constant) return value;
  return start + (end - start) * static_cast<double>(i) / static_cast<double>(n);
}

void WaveConfig::validate() const {
  if (n < 3) throw ConfigError("wave: N must be at least 3");
  if (!(length > 0.0)) throw ConfigError("wave: L must be positive");
  if (!(dt > 0.0)) throw ConfigError("wave: dt must be positive");
  if (!(c2 > 0.0)) throw ConfigError("wave: c2 must be positive");
  for (int i = 1; i <= n; ++i) {
    const double r = damping.at(i, n);
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("wave: damping values must lie in [0, 1]");
  }
}

void SineGordonConfig::validate() const {
  if (n < 3) throw ConfigError("sine-gordon: N must be at least 3");
  if (!(length > 0.0)) throw ConfigError("sine-gordon: L must be positive");
  if (!(dt > 0.0)) throw ConfigError("sine-gordon: dt must be positive");
  if (!(std::abs(v) < 1.0)) throw ConfigError("sine-gordon: |v| must be below 1");
  if (!(r >= 0.0)) throw ConfigError("sine-gordon: r must be nonnegative");
}

void LadderConfig::validate() const {
  if (n < 1) throw ConfigError("ladder: n must be positive");
  if (!(dt > 0.0)) throw ConfigError("ladder: dt must be positive");
  auto check = [&](const std::vector<double>& v, const char* what, bool strict) {
    if (v.size() != 1 && v.size() != static_cast<std::size_t>(n))
      throw ConfigError(std::string("ladder: ") + what + " needs 1 or n entries");
    for (double x : v)
      if (strict ? !(x > 0.0) : !(x >= 0.0))
        throw ConfigError(std::string("ladder: ") + what + (strict ? " must be positive" : " must be nonnegative"));
  };
  check(capacitance, "capacitance", true);
  check(inductance, "inductance", true);
  check(resistance, "resistance", false);
  if (!(load >= 0.0)) throw ConfigError("ladder: load resistance must be nonnegative");
}

double cubic_spline(double s) {
  if (s < 0.0) s = -s;
  if (s <= 1.0) return 1.0 - 1.5 * s * s + 0.75 * s * s * s;
  if (s <= 2.0) return 0.25 * (2.0 - s) * (2.0 - s) * (2.0 - s);
  return 0.0;
}

Matrix periodic_forward_difference(int n, double dx) {
  Matrix d = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    d(i, i) = -1.0 / dx;
    d(i, (i + 1) % n) += 1.0 / dx;
  }
  return d;
}

Matrix dirichlet_laplacian(int n, double dx) {
  Matrix m = Matrix::Zero(n, n);
  const double s = 1.0 / (dx * dx);
  for (int i = 0; i < n; ++i) {
    m(i, i) = 2.0 * s;
    if (i > 0) m(i, i - 1) = -s;
    if (i + 1 < n) m(i, i + 1) = -s;
  }
  return m;
}

Benchmark build_wave(const WaveConfig& config) {
  config.validate();
  const int n = config.n;
  const double dx = config.length / n;
  Vector grid(n);
  Vector r(n);
  Vector z0 = Vector::Zero(2 * n);
  for (int i = 1; i <= n; ++i) {
    grid(i - 1) = i * dx;
    r(i - 1) = config.damping.at(i, n);
    z0(i - 1) = cubic_spline(10.0 * std::abs(grid(i - 1) - 0.5));
  }
  const Matrix k = block_diag(std::sqrt(config.c2) * periodic_forward_difference(n, dx),
                              Matrix::Identity(n, n));
  const Matrix chi = block_diag(Matrix::Zero(n, n), Matrix(r.asDiagonal()));

  Benchmark out{"wave", TddSystem<double>(k, chi, z0), config.dt, dx, grid};
  out.system.set_dissipation(chi);
  return out;
}

double kink(double x, double t, double x0, double v) {
  const double xi = (x - x0 - v * t) / std::sqrt(1.0 - v * v);
  return 4.0 * std::atan(std::exp(xi));
}

double kink_rate(double x, double t, double x0, double v) {
  const double gamma = 1.0 / std::sqrt(1.0 - v * v);
  const double xi = (x - x0 - v * t) * gamma;
  return -2.0 * v * gamma / std::cosh(xi);
}

Benchmark build_sine_gordon(const SineGordonConfig& config) {
  config.validate();
  const int m = config.n - 1;
  const double dx = config.length / config.n;
  const double x0 = config.center();
  Vector grid(m);
  Vector z0(2 * m);
  for (int i = 1; i <= m; ++i) {
    grid(i - 1) = i * dx;
    z0(i - 1) = kink(grid(i - 1), 0.0, x0, config.v);
    z0(m + i - 1) = kink_rate(grid(i - 1), 0.0, x0, config.v);
  }
  const Matrix k = block_diag(cholesky_factor(dirichlet_laplacian(m, dx)), Matrix::Identity(m, m));
  const Matrix chi =
      block_diag(Matrix::Zero(m, m), config.r * Matrix::Identity(m, m));

  Vector z_bd = Vector::Zero(2 * m);
  z_bd(0) += config.a / (dx * dx);
  z_bd(m - 1) += config.b / (dx * dx);

  Benchmark out{"sine-gordon", TddSystem<double>(k, chi, z0), config.dt, dx, grid};
  out.system.set_boundary(z_bd);
  out.system.set_dissipation(chi);
  out.system.set_nonlinear(NonlinearTerm<double>{
      [m](const Vector& z) {
        Vector g = Vector::Zero(z.size());
        g.head(m) = z.head(m).array().sin().matrix();
        return g;
      },
      [m](const Vector& z) { return (1.0 - z.head(m).array().cos()).sum(); }});
  return out;
}

Matrix ladder_structure(int dim) {
  Matrix s = Matrix::Zero(dim, dim);
  for (int i = 0; i + 1 < dim; ++i) {
    s(i, i + 1) = -1.0;
    s(i + 1, i) = 1.0;
  }
  return s;
}

Matrix canonical_transform(const Matrix& skew) {
  const Eigen::Index dim = skew.rows();
  if (dim == 0 || dim % 2 != 0 || skew.cols() != dim)
    throw ShapeError("canonical_transform: matrix must be square with even dimension");
  const double scale = std::max(1.0, skew.cwiseAbs().maxCoeff());
  if ((skew + skew.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ShapeError("canonical_transform: matrix is not skew-symmetric");

  Eigen::RealSchur<Matrix> schur(skew);
  if (schur.info() != Eigen::Success) throw NumericalError("canonical_transform: Schur decomposition failed");
  const Matrix& u = schur.matrixU();
  const Matrix& t = schur.matrixT();
  const Eigen::Index n = dim / 2;
  Matrix out(dim, dim);
  Eigen::Index pair = 0;
  for (Eigen::Index i = 0; i < dim;) {
    if (i + 1 >= dim || std::abs(t(i + 1, i)) <= 1e-12 * scale)
      throw NumericalError("canonical_transform: matrix is singular");
    // block [[a, b], [c, a]] with c ~ -b; orient so that beta > 0
    double beta = 0.5 * (t(i, i + 1) - t(i + 1, i));
    Eigen::Index first = i;
    Eigen::Index second = i + 1;
    if (beta < 0.0) {
      beta = -beta;
      std::swap(first, second);
    }
    const double s = std::sqrt(beta);
    out.col(pair) = s * u.col(first);
    out.col(n + pair) = s * u.col(second);
    ++pair;
    i += 2;
  }
  return out;
}

LadderModel build_ladder(const LadderConfig& config) {
  config.validate();
  const int n = config.n;
  const int dim = 2 * n;
  Vector q_diag(dim);
  Vector r_diag(dim);
  for (int i = 0; i < n; ++i) {
    q_diag(2 * i) = 1.0 / std::sqrt(broadcast(config.capacitance, i));
    q_diag(2 * i + 1) = 1.0 / std::sqrt(broadcast(config.inductance, i));
    r_diag(2 * i) = 0.0;
    r_diag(2 * i + 1) = broadcast(config.resistance, i);
  }
  r_diag(dim - 1) += config.load;

  LadderModel out;
  out.j_tilde = ladder_structure(dim);
  out.q = q_diag.asDiagonal();
  out.r = r_diag.asDiagonal();
  out.u = Vector::Zero(dim);
  out.u(0) = config.input;
  out.t = canonical_transform(out.j_tilde);
  out.t_inverse = out.t.inverse();

  // x = T x~: K = Q T, and the damping acting on f = K x~ is Q R Q^T.
  const Matrix k = out.q * out.t;
  const Matrix chi = out.q * out.r * out.q.transpose();
  out.benchmark = Benchmark{"ladder", TddSystem<double>(k, chi, Vector::Zero(dim)), config.dt, 1.0, Vector()};
  out.benchmark.system.set_input(out.t_inverse * out.u);
  out.benchmark.system.set_dissipation(out.t_inverse * out.r * out.q.transpose() * k);
  return out;
}

}  // namespace sympmor
