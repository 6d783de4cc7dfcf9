// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

#include "sympmor/benchmarks.hpp"
#include "sympmor/reduction.hpp"
#include "support.hpp"

using namespace sympmor;
using testing::max_abs;

namespace {

// Worst auxiliary residual seen by any run, checked by A9.
double g_volterra = 0.0;
std::mutex g_volterra_mutex;

template <typename Report>
const Report& track(const Report& run) {
  std::lock_guard lock(g_volterra_mutex);
  g_volterra = std::max(g_volterra, run.max_volterra_residual);
  return run;
}

RunReport<double> run_tdd(const TddSystem<double>& s, double t_end, double dt, Eigen::Index stride) {
  return track(integrate(s, t_end, dt, stride));
}

struct Verdict {
  std::string id;
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string sci(double x) { return fmt("%.3e", x); }

double balance(const RunReport<double>& run) {
  const double h0 = run.hamiltonian.front();
  double worst = 0.0;
  for (double e : run.extended_energy) worst = std::max(worst, std::abs(e - h0));
  return worst / h0;
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

OrthoSymplecticBasis<double> prefix(const OrthoSymplecticBasis<double>& b, Eigen::Index k) {
  return OrthoSymplecticBasis<double>(Matrix(b.e_columns().leftCols(k)));
}

double error_mean(const Matrix& full, const Matrix& approx, double weight) {
  if (approx.cols() != full.cols()) return std::numeric_limits<double>::infinity();
  return ((full - approx).colwise().norm() * weight).mean();
}

// Max over the shared instants of |H_red - H_full| / H_full(0).
double energy_error(const std::vector<double>& full, const std::vector<double>& red) {
  double worst = 0.0;
  for (std::size_t i = 0; i < std::min(full.size(), red.size()); ++i)
    worst = std::max(worst, std::abs(full[i] - red[i]));
  return red.size() < full.size() ? std::numeric_limits<double>::infinity() : worst / full.front();
}

TddSystem<double> oscillator(double r) {
  Matrix k = Matrix::Identity(2, 2);
  Matrix chi = Matrix::Zero(2, 2);
  chi(1, 1) = r;
  return TddSystem<double>(k, chi, (Vector(2) << 1.0, 0.0).finished());
}

// Shared wave data at desk scale.
struct WaveDesk {
  Benchmark bench = testing::desk_wave();
  double t_end = 7.5;
  Eigen::Index stride = 10;
  RunReport<double> full;
  BaselineRun<double> physical;
  OrthoSymplecticBasis<double> tdd_basis;
  OrthoSymplecticBasis<double> phys_basis;
};

WaveDesk& wave_desk() {
  static WaveDesk w = [] {
    WaveDesk d;
    d.full = run_tdd(d.bench.system, d.t_end, d.bench.dt, d.stride);
    d.physical = integrate_baseline(dissipative_full_model(d.bench.system), d.t_end, d.bench.dt, d.stride);
    d.tdd_basis = greedy_basis(d.full.snapshots, 0.0, 30);
    d.phys_basis = greedy_basis(d.physical.report.snapshots, 0.0, 30);
    return d;
  }();
  return w;
}

Verdict a1() {
  auto& w = wave_desk();
  double worst = 0.0;
  for (const auto* b : {&w.tdd_basis, &w.phys_basis})
    for (Eigen::Index k = 1; k <= b->k(); ++k) {
      const auto [o, s] = prefix(*b, k).defects();
      worst = std::max({worst, o, s});
    }
  for (Eigen::Index k : {10, 20, 30}) {
    const auto [o, s] = cotangent_lift(w.full.snapshots, k).defects();
    worst = std::max({worst, o, s});
  }
  return {"A1", worst <= 1e-10 && w.tdd_basis.k() == 30, "max defect " + sci(worst) + " up to 2k=60"};
}

Verdict a2() {
  const double r = 0.5;
  const double wd = std::sqrt(1.0 - 0.25 * r * r);
  auto err = [&](double dt) {
    const auto run = run_tdd(oscillator(r), 10.0, dt, 1);
    double e = 0.0;
    for (Eigen::Index i = 0; i < run.snapshots.size(); ++i) {
      const double t = run.snapshots.times()[static_cast<std::size_t>(i)];
      const double exact = std::exp(-0.5 * r * t) * (std::cos(wd * t) + 0.5 * r / wd * std::sin(wd * t));
      e = std::max(e, std::abs(run.snapshots.state(i)(0) - exact));
    }
    return e;
  };
  const double e1 = err(1e-2), e2 = err(5e-3), e3 = err(2.5e-3);
  const double r1 = e1 / e2, r2 = e2 / e3;
  const bool ok = r1 >= 3.5 && r1 <= 4.5 && r2 >= 3.5 && r2 <= 4.5;
  return {"A2", ok, "ratios " + fmt("%.3f", r1) + ", " + fmt("%.3f", r2)};
}

Verdict a3() {
  WaveConfig c;
  const auto b = build_wave(c);
  auto coarse = std::async(std::launch::async, [&] { return run_tdd(b.system, 7.5, c.dt, 100); });
  auto fine = std::async(std::launch::async, [&] { return run_tdd(b.system, 7.5, 0.5 * c.dt, 200); });
  const double e1 = balance(coarse.get());
  const double e2 = balance(fine.get());
  const double ratio = e1 / e2;
  const bool ok = e1 <= 1e-3 && ratio >= 3.0 && ratio <= 5.0;
  return {"A3", ok, "N=500 balance " + sci(e1) + ", halving ratio " + fmt("%.3f", ratio)};
}

Verdict a4() {
  auto& w = wave_desk();
  const auto red = rdh_reduce(w.bench.system, prefix(w.tdd_basis, 20));
  const double e = balance(run_tdd(red.system, w.t_end, w.bench.dt, w.stride));
  return {"A4", e <= 1e-3, "2k=40 balance " + sci(e)};
}

Verdict a5() {
  auto& w = wave_desk();
  const double weight = std::sqrt(w.bench.dx);
  const Matrix& full_z = w.full.snapshots.states();
  const Matrix& phys_z = w.physical.report.snapshots.states();
  const double dt = w.bench.dt;

  struct Out {
    double err;
    double energy;
    bool unstable = false;
  };
  auto rdh = [&](Eigen::Index k) {
    const auto basis = prefix(w.tdd_basis, k);
    const auto red = rdh_reduce(w.bench.system, basis);
    const auto run = run_tdd(red.system, w.t_end, dt, w.stride);
    return Out{error_mean(full_z, basis.matrix() * run.snapshots.states(), weight),
               energy_error(w.full.hamiltonian, run.hamiltonian)};
  };
  auto baseline = [&](const BaselineReduced<double>& model) {
    const auto run = integrate_baseline(model, w.t_end, dt, w.stride);
    const auto& h = run.report.hamiltonian;
    const double hmax = *std::max_element(h.begin(), h.end());
    return Out{error_mean(phys_z, model.projection * run.report.snapshots.states(), weight),
               energy_error(w.physical.report.hamiltonian, h),
               run.diverged || spectral_abscissa(model.op) > 1e-8 || hmax > 1.01 * h.front()};
  };
  auto r20 = std::async(std::launch::async, rdh, 10);
  auto r40 = std::async(std::launch::async, rdh, 20);
  auto r60 = std::async(std::launch::async, rdh, 30);
  auto p40 = std::async(std::launch::async, [&] { return baseline(psd_baseline(w.bench.system, prefix(w.phys_basis, 20))); });
  auto p60 = std::async(std::launch::async, [&] { return baseline(psd_baseline(w.bench.system, w.phys_basis)); });
  auto pod = std::async(std::launch::async, [&] {
    return baseline(pod_baseline(w.bench.system, pod_basis(w.physical.report.snapshots, 40)));
  });
  const Out o20 = r20.get(), o40 = r40.get(), o60 = r60.get(), q40 = p40.get(), q60 = p60.get(), v40 = pod.get();

  const bool decreasing = o20.err > o40.err && o40.err > o60.err;
  const bool beats_psd = o40.err < q60.err;
  double best_symplectic = 0.0;
  for (const Out* o : {&o20, &o40, &o60, &q40, &q60}) best_symplectic = std::max(best_symplectic, o->energy);
  const bool pod_worse = v40.unstable || v40.energy >= 10.0 * best_symplectic;
  const std::string detail =
      "rdh mean err " + sci(o20.err) + " > " + sci(o40.err) + " > " + sci(o60.err) + " [" +
      (decreasing ? "ok" : "no") + "]; rdh40 " + sci(o40.err) + " < psd60 " + sci(q60.err) + " [" +
      (beats_psd ? "ok" : "no") + "]; pod40 energy err " + sci(v40.energy) + (v40.unstable ? " unstable" : " stable") +
      " vs 10x max symplectic " + sci(10.0 * best_symplectic) + " [" + (pod_worse ? "ok" : "no") + "]";
  return {"A5", decreasing && beats_psd && pod_worse, detail};
}

Verdict a6() {
  WaveConfig c;
  c.n = 100;
  c.damping = DampingProfile::constant(1e-5);
  const auto b = build_wave(c);
  const double t_end = 7.5;
  const Eigen::Index stride = 10;
  const double weight = std::sqrt(b.dx);
  const auto full = run_tdd(b.system, t_end, b.dt, stride);
  const auto physical = integrate_baseline(dissipative_full_model(b.system), t_end, b.dt, stride);
  const auto basis = greedy_basis(full.snapshots, 0.0, 20);
  const auto red = rdh_reduce(b.system, basis);
  const auto rdh = run_tdd(red.system, t_end, b.dt, stride);
  const auto psd = integrate_baseline(psd_baseline(b.system, basis), t_end, b.dt, stride);
  const Matrix z_rdh = basis.matrix() * rdh.snapshots.states();
  const Matrix z_psd = basis.matrix() * psd.report.snapshots.states();
  const double diff = error_mean(z_rdh, z_psd, weight);
  const double e_rdh = error_mean(full.snapshots.states(), z_rdh, weight);
  const double e_psd = error_mean(physical.report.snapshots.states(), z_psd, weight);
  const double bound = 1e-2 * std::min(e_rdh, e_psd);
  return {"A6", diff <= bound,
          "rdh-psd " + sci(diff) + " vs 1% of min(" + sci(e_rdh) + ", " + sci(e_psd) + ")"};
}

Verdict a7() {
  LadderConfig c;
  const auto l = build_ladder(c);
  const auto& s = l.benchmark.system;
  const double t_end = 100.0;
  const auto full = run_tdd(s, t_end, c.dt, 1);
  double worst = *std::max_element(full.passivity_residual.begin(), full.passivity_residual.end());
  const auto basis = cotangent_lift(full.snapshots, 15);
  for (Eigen::Index k : {5, 10, 15}) {
    const auto red = rdh_reduce(s, prefix(basis, k));
    const auto run = run_tdd(red.system, t_end, c.dt, 1);
    worst = std::max(worst, *std::max_element(run.passivity_residual.begin(), run.passivity_residual.end()));
  }
  return {"A7", worst <= 1e-8, "max residual " + sci(worst) + " (full, 2k=10,20,30)"};
}

Verdict a8() {
  testing::Rng rng(8);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix k = testing::random_factor(rng, 8);
    const Matrix chi = testing::random_psd(rng, 8, 4, 0.5);
    const TddSystem<double> s(k, chi, rng.vector(8));
    const auto basis = testing::random_basis(rng, 4, 2);
    // reduce then extend
    const auto red = rdh_reduce(s, basis);
    // extend then reduce: project the extended equations onto (A, W)
    const Matrix& w = red.aux_basis;
    const Matrix coupling = basis.inverse() * CanonicalForm(4).dense() * k.transpose() * w;
    const Matrix aux = w.transpose() * k * basis.matrix();
    const Matrix chi_p = w.transpose() * chi * w;
    worst = std::max({worst, max_abs(CanonicalForm(2).dense() * red.factor().transpose() - coupling),
                      max_abs(red.factor() - aux), max_abs(red.chi() - chi_p)});
  }
  return {"A8", worst <= 1e-12, "max operator difference " + sci(worst)};
}

Verdict a10() {
  // speed: r = 0 with consistent boundary data
  SineGordonConfig c;
  c.n = 100;
  c.r = 0.0;
  c.b = 2.0 * std::numbers::pi;
  const auto b0 = build_sine_gordon(c);
  const Eigen::Index m = b0.system.half_dim();
  const auto free_run = run_tdd(b0.system, 20.0, b0.dt, 10);
  std::vector<double> ts, xs;
  for (Eigen::Index i = 0; i < free_run.snapshots.size(); ++i) {
    const auto q = free_run.snapshots.state(i).head(m);
    for (Eigen::Index j = 0; j + 1 < m; ++j)
      if (q(j) < std::numbers::pi && q(j + 1) >= std::numbers::pi) {
        const double s = (std::numbers::pi - q(j)) / (q(j + 1) - q(j));
        ts.push_back(free_run.snapshots.times()[static_cast<std::size_t>(i)]);
        xs.push_back(b0.grid(j) + s * b0.dx);
        break;
      }
  }
  const double tm = mean(ts), xm = mean(xs);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    num += (ts[i] - tm) * (xs[i] - xm);
    den += (ts[i] - tm) * (ts[i] - tm);
  }
  const double speed = num / den;
  const bool speed_ok = ts.size() == static_cast<std::size_t>(free_run.snapshots.size()) &&
                        std::abs(speed - c.v) <= 0.02 * c.v;

  // damping: default benchmark settings
  SineGordonConfig d;
  d.n = 100;
  d.x0 = 12.5;
  const auto b = build_sine_gordon(d);
  const double t_end = 40.0;
  const Eigen::Index stride = 10;
  const auto full = run_tdd(b.system, t_end, b.dt, stride);
  auto kinetic = [&](const Matrix& f) {
    std::vector<double> out;
    for (Eigen::Index i = 0; i < f.cols(); ++i) out.push_back(0.5 * f.col(i).tail(m).squaredNorm());
    return out;
  };
  const auto k_full = kinetic(full.aux_snapshots);
  const double peak = *std::max_element(k_full.begin(), k_full.end());
  const bool decay_ok = k_full.back() < 0.1 * peak;

  const auto basis = greedy_basis(full.snapshots, 0.0, 30);
  auto k_error = [&](Eigen::Index k) {
    const auto red = rdh_reduce(b.system, prefix(basis, k));
    const auto run = run_tdd(red.system, t_end, b.dt, stride);
    const auto k_red = kinetic(red.aux_basis * run.aux_snapshots);
    std::vector<double> diff;
    for (std::size_t i = 0; i < k_full.size(); ++i) diff.push_back(std::abs(k_red[i] - k_full[i]));
    return mean(diff);
  };
  auto e20 = std::async(std::launch::async, k_error, 10);
  auto e60 = std::async(std::launch::async, k_error, 30);
  const double k20 = e20.get(), k60 = e60.get();
  const bool order_ok = k60 < k20;
  return {"A10", speed_ok && decay_ok && order_ok,
          "speed " + fmt("%.4f", speed) + " [" + (speed_ok ? "ok" : "no") + "]; K(40)/peak " +
              sci(k_full.back() / peak) + " [" + (decay_ok ? "ok" : "no") + "]; K err 2k=60 " + sci(k60) +
              " < 2k=20 " + sci(k20) + " [" + (order_ok ? "ok" : "no") + "]"};
}

Verdict a11() {
  const auto b = testing::desk_wave();
  const auto basis = OrthoSymplecticBasis<double>::identity(b.system.half_dim());
  const double t_end = 1000 * b.dt;
  const auto full = run_tdd(b.system, t_end, b.dt, 1);
  const auto red = run_tdd(rdh_reduce(b.system, basis).system, t_end, b.dt, 1);
  const double diff = max_abs(basis.matrix() * red.snapshots.states() - full.snapshots.states());
  return {"A11", diff <= 1e-8, "max deviation " + sci(diff) + " over 1000 steps"};
}

}  // namespace

int main() {
  std::vector<std::function<Verdict()>> jobs = {a1, a2, a3, a4, a5, a6, a7, a8, a10, a11};
  std::vector<std::future<Verdict>> pending;
  wave_desk();
  for (auto& job : jobs) pending.push_back(std::async(std::launch::async, job));
  std::vector<Verdict> verdicts;
  for (auto& p : pending) verdicts.push_back(p.get());
  verdicts.insert(verdicts.begin() + 8,
                  Verdict{"A9", g_volterra <= 1e-10, "max auxiliary residual " + sci(g_volterra) + " over all runs"});

  int failed = 0;
  for (const auto& v : verdicts) {
    std::printf("%-4s %s  %s\n", v.id.c_str(), v.pass ? "PASS" : "FAIL", v.detail.c_str());
    failed += v.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(verdicts.size()) - failed, verdicts.size());
  return failed == 0 ? 0 : 1;
}
