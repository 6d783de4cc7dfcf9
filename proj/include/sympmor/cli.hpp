// Command-line harness: configuration, benchmark assembly, and the
// run / basis / reduce / compare pipelines behind the `sympmor` tool.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sympmor/benchmarks.hpp"
#include "sympmor/io.hpp"
#include "sympmor/reduction.hpp"

namespace sympmor::cli {

enum class BasisMethod { greedy, cotangent, pod };

struct RunConfig {
  std::string benchmark = "wave";
  double dt = 0.0;
  double t_end = 0.0;
  Eigen::Index stride = 1;
  double chi_scale = 1.0;
  BasisMethod basis = BasisMethod::greedy;
  double greedy_tol = 0.0;
  /// Reduced dimensions 2k (or m for POD).
  std::vector<int> modes;
  /// Subset of {full, rdh, psd, pod}.
  std::vector<std::string> methods;
  ReducedFactorRule rule = ReducedFactorRule::projected;
  std::uint64_t seed = 0;
  /// The merged configuration, echoed into manifests.
  io::Json merged;
};

/// Defaults for a named benchmark (`wave`, `wave-lowdiss`, `sine-gordon`,
/// `ladder`).
io::Json default_config(const std::string& benchmark);

/// Layers defaults < config file < `--set` overrides and validates.
RunConfig resolve_config(const io::Json& user);

struct Problem {
  Benchmark benchmark;
  std::optional<LadderModel> ladder;
};

Problem build_problem(const RunConfig& config);

/// Ortho-symplectic basis of 2k columns from snapshots.
OrthoSymplecticBasis<double> symplectic_basis(const SnapshotSet<double>& snapshots, BasisMethod method,
                                              Eigen::Index k, double greedy_tol);

/// Threads for parallel cells: SYMPMOR_THREADS if set, else the hardware count.
unsigned thread_budget();

int main(int argc, char** argv);

}  // namespace sympmor::cli
