// The three test systems: dissipative linear wave, damped sine-Gordon, and
// the port-Hamiltonian ladder network, each assembled as a TddSystem.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sympmor/tdd.hpp"

namespace sympmor {

using Matrix = Mat<double>;
using Vector = Vec<double>;

/// Damping profile on the wave grid.
struct DampingProfile {
  enum class Rule { linear_ramp, constant };
  Rule rule = Rule::linear_ramp;
  /// linear_ramp: r_i = start + (end - start) * i / N.
  double start = 0.1;
  double end = 1.0;
  /// constant: r_i = value.
  double value = 0.0;

  static DampingProfile linear_ramp(double start, double end) {
    return {Rule::linear_ramp, start, end, 0.0};
  }
  static DampingProfile constant(double r) { return {Rule::constant, 0.0, 0.0, r}; }

  double at(int i, int n) const;
};

struct WaveConfig {
  double length = 1.0;
  int n = 500;
  double dt = 0.002;
  double c2 = 0.1;
  DampingProfile damping;

  void validate() const;
};

struct SineGordonConfig {
  double length = 50.0;
  int n = 500;
  double dt = 0.02;
  double v = 0.5;
  /// Kink centre; negative means length / 4.
  double x0 = -1.0;
  double a = 0.0;
  double b = 1.0;
  double r = 0.1;

  double center() const { return x0 < 0.0 ? 0.25 * length : x0; }
  void validate() const;
};

struct LadderConfig {
  int n = 50;
  /// Per-stage values; a single entry is broadcast to all stages.
  std::vector<double> capacitance{1.0};
  std::vector<double> inductance{1.0};
  std::vector<double> resistance{0.2};
  double load = 0.4;
  double input = 1.0;
  double dt = 0.05;

  void validate() const;
};

/// A benchmark ready to integrate. `system` carries the damping operator D
/// of its originating form z' = J K^T K z - D z for the baselines.
struct Benchmark {
  std::string name;
  TddSystem<double> system;
  double dt = 0.0;
  /// Grid spacing used to weight L2 errors; 1 for ODE systems.
  double dx = 1.0;
  /// Grid nodes (empty for the ladder).
  Vector grid;
};

/// Cubic spline bump of the wave initial condition.
double cubic_spline(double s);

/// Periodic forward difference divided by dx, (D q)_i = (q_{i+1} - q_i) / dx.
Matrix periodic_forward_difference(int n, double dx);

/// Negated Dirichlet second difference on n interior nodes, divided by dx^2.
Matrix dirichlet_laplacian(int n, double dx);

/// Wave on a periodic grid: K = diag(c D_x, I), chi = D = diag(0, r).
Benchmark build_wave(const WaveConfig& config);

/// Traveling kink q = 4 atan(exp((x - x0 - v t) / sqrt(1 - v^2))) and its
/// time derivative.
double kink(double x, double t, double x0, double v);
double kink_rate(double x, double t, double x0, double v);

/// Sine-Gordon on n - 1 interior nodes with Dirichlet data (a, b).
Benchmark build_sine_gordon(const SineGordonConfig& config);

/// The ladder in its original coordinates x' = (J~ - R) Q^T Q x + u, and the
/// transform x = T x~ with T J_2n T^T = J~.
struct LadderModel {
  Benchmark benchmark;
  Matrix j_tilde;
  Matrix q;
  Matrix r;
  Vector u;
  Matrix t;
  Matrix t_inverse;
};

LadderModel build_ladder(const LadderConfig& config);

/// Skew tridiagonal matrix with -1 on the superdiagonal and +1 below.
Matrix ladder_structure(int dim);

/// Invertible T with T J_2n T^T = S for a nonsingular skew-symmetric S.
Matrix canonical_transform(const Matrix& skew);

}  // namespace sympmor
