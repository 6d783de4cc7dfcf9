#include "sympmor/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include <CLI11.hpp>

#include "sympmor/errors.hpp"
#include "sympmor/version.hpp"

namespace sympmor::cli {

namespace fs = std::filesystem;
using io::Json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kBenchmarks = {"wave", "wave-lowdiss", "sine-gordon", "ladder"};

template <typename T>
T get(const Json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("config: missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config: key '" + key + "' has the wrong type");
  }
}

BasisMethod parse_basis(const std::string& s) {
  if (s == "greedy") return BasisMethod::greedy;
  if (s == "cotangent") return BasisMethod::cotangent;
  if (s == "pod") return BasisMethod::pod;
  throw ConfigError("config: unknown basis method '" + s + "' (greedy, cotangent, pod)");
}

ReducedFactorRule parse_rule(const std::string& s) {
  if (s == "projected") return ReducedFactorRule::projected;
  if (s == "congruence") return ReducedFactorRule::congruence;
  if (s == "direct") return ReducedFactorRule::direct;
  throw ConfigError("config: unknown reduction rule '" + s + "' (projected, congruence, direct)");
}

std::vector<double> sample(const std::vector<double>& series, Eigen::Index stride, Eigen::Index count) {
  std::vector<double> out(static_cast<std::size_t>(count), kNaN);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i * stride);
    if (idx < series.size()) out[static_cast<std::size_t>(i)] = series[idx];
  }
  return out;
}

std::string label(const std::string& method, int modes) { return method + "_k" + std::to_string(modes); }

/// Runs fn(i) for i in [0, count) on up to `threads` workers; the first
/// exception is rethrown after all workers stop.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

unsigned thread_budget() {
  if (const char* env = std::getenv("SYMPMOR_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

Json default_config(const std::string& benchmark) {
  Json common = {{"benchmark", benchmark},
                 {"chi", 1.0},
                 {"basis", {{"method", "greedy"}, {"tol", 0.0}}},
                 {"methods", {"rdh", "psd", "pod"}},
                 {"rule", "projected"},
                 {"seed", 0}};
  Json specific;
  if (benchmark == "wave" || benchmark == "wave-lowdiss") {
    Json damping = benchmark == "wave"
                       ? Json{{"rule", "linear_ramp"}, {"start", 0.1}, {"end", 1.0}}
                       : Json{{"rule", "constant"}, {"value", 1e-5}};
    specific = {{"L", 1.0}, {"N", 500}, {"dt", 0.002}, {"c2", 0.1}, {"damping", damping},
                {"T", 7.5}, {"stride", 10},
                {"modes", benchmark == "wave" ? Json{20, 40, 60} : Json{40}}};
    if (benchmark == "wave-lowdiss") specific["methods"] = {"rdh", "psd"};
  } else if (benchmark == "sine-gordon") {
    specific = {{"L", 50.0}, {"N", 500}, {"dt", 0.02}, {"v", 0.5}, {"x0", 12.5}, {"a", 0.0},
                {"b", 1.0},  {"r", 0.1}, {"T", 40.0}, {"stride", 10}, {"modes", {20, 40, 60}}};
  } else if (benchmark == "ladder") {
    specific = {{"n", 50}, {"capacitance", 1.0}, {"inductance", 1.0}, {"resistance", 0.2},
                {"load", 0.4}, {"input", 1.0}, {"dt", 0.05}, {"T", 100.0}, {"stride", 10},
                {"modes", {10, 20, 30}}, {"basis", {{"method", "cotangent"}, {"tol", 0.0}}}};
  } else {
    throw ConfigError("unknown benchmark '" + benchmark + "' (wave, wave-lowdiss, sine-gordon, ladder)");
  }
  common.merge_patch(specific);
  return common;
}

RunConfig resolve_config(const Json& user) {
  if (!user.is_object()) throw ConfigError("config: top level must be an object");
  const std::string name = user.value("benchmark", std::string("wave"));
  Json merged = default_config(name);
  merged.merge_patch(user);

  RunConfig c;
  c.benchmark = name;
  c.dt = get<double>(merged, "dt");
  c.t_end = get<double>(merged, "T");
  c.stride = get<Eigen::Index>(merged, "stride");
  c.chi_scale = get<double>(merged, "chi");
  const Json& basis = merged.at("basis");
  c.basis = parse_basis(get<std::string>(basis, "method"));
  c.greedy_tol = get<double>(basis, "tol");
  c.modes = get<std::vector<int>>(merged, "modes");
  c.methods = get<std::vector<std::string>>(merged, "methods");
  c.rule = parse_rule(get<std::string>(merged, "rule"));
  c.seed = get<std::uint64_t>(merged, "seed");

  if (!(c.dt > 0.0)) throw ConfigError("config: dt must be positive");
  if (!(c.t_end >= 0.0)) throw ConfigError("config: T must be nonnegative");
  if (c.stride <= 0) throw ConfigError("config: stride must be positive");
  if (!(c.chi_scale >= 0.0)) throw ConfigError("config: chi must be nonnegative");
  for (const auto& m : c.methods)
    if (m != "full" && m != "rdh" && m != "psd" && m != "pod")
      throw ConfigError("config: unknown method '" + m + "' (full, rdh, psd, pod)");
  const bool symplectic =
      std::any_of(c.methods.begin(), c.methods.end(), [](const std::string& m) { return m == "rdh" || m == "psd"; }) ||
      c.basis != BasisMethod::pod;
  for (int m : c.modes) {
    if (m <= 0) throw ConfigError("config: mode counts must be positive");
    if (symplectic && m % 2 != 0)
      throw ConfigError("config: mode count " + std::to_string(m) + " is odd; symplectic bases need 2k columns");
  }
  c.merged = merged;
  return c;
}

Problem build_problem(const RunConfig& config) {
  const Json& j = config.merged;
  Problem p;
  if (config.benchmark == "wave" || config.benchmark == "wave-lowdiss") {
    WaveConfig w;
    w.length = get<double>(j, "L");
    w.n = get<int>(j, "N");
    w.dt = config.dt;
    w.c2 = get<double>(j, "c2");
    const Json& d = j.at("damping");
    const std::string rule = get<std::string>(d, "rule");
    if (rule == "linear_ramp")
      w.damping = DampingProfile::linear_ramp(get<double>(d, "start"), get<double>(d, "end"));
    else if (rule == "constant")
      w.damping = DampingProfile::constant(get<double>(d, "value"));
    else
      throw ConfigError("config: damping rule must be linear_ramp or constant");
    p.benchmark = build_wave(w);
    p.benchmark.name = config.benchmark;
  } else if (config.benchmark == "sine-gordon") {
    SineGordonConfig s;
    s.length = get<double>(j, "L");
    s.n = get<int>(j, "N");
    s.dt = config.dt;
    s.v = get<double>(j, "v");
    s.x0 = get<double>(j, "x0");
    s.a = get<double>(j, "a");
    s.b = get<double>(j, "b");
    s.r = get<double>(j, "r");
    p.benchmark = build_sine_gordon(s);
  } else {
    LadderConfig l;
    l.n = get<int>(j, "n");
    auto values = [&](const char* key) {
      const Json& v = j.at(key);
      return v.is_array() ? v.get<std::vector<double>>() : std::vector<double>{v.get<double>()};
    };
    l.capacitance = values("capacitance");
    l.inductance = values("inductance");
    l.resistance = values("resistance");
    l.load = get<double>(j, "load");
    l.input = get<double>(j, "input");
    l.dt = config.dt;
    p.ladder = build_ladder(l);
    p.benchmark = p.ladder->benchmark;
  }
  if (config.chi_scale != 1.0) p.benchmark.system.scale_susceptibility(config.chi_scale);
  return p;
}

OrthoSymplecticBasis<double> symplectic_basis(const SnapshotSet<double>& snapshots, BasisMethod method,
                                              Eigen::Index k, double greedy_tol) {
  switch (method) {
    case BasisMethod::greedy:
      return greedy_basis(snapshots, greedy_tol, k);
    case BasisMethod::cotangent:
      return cotangent_lift(snapshots, k);
    case BasisMethod::pod:
      break;
  }
  throw ConfigError("a POD basis is not symplectic; choose greedy or cotangent");
}

namespace {

struct Context {
  RunConfig config;
  fs::path out;
  io::Manifest manifest;
  Context(RunConfig c, fs::path o) : config(std::move(c)), out(std::move(o)), manifest(out) {
    manifest.set_config(config.merged);
  }
};

void write_report(const fs::path& path, const RunReport<double>& r) {
  io::write_csv(path, {"t", "H", "E_string", "H_ext", "passivity_residual"},
                {r.times, r.hamiltonian, r.string_energy, r.extended_energy, r.passivity_residual});
}

int cmd_run_full(Context& ctx) {
  const Problem p = build_problem(ctx.config);
  const auto report = integrate(p.benchmark.system, ctx.config.t_end, ctx.config.dt, ctx.config.stride);
  write_report(ctx.out / "full_report.csv", report);
  io::write_snapshots(ctx.out / "snapshots.mtx", report.snapshots);
  io::write_matrix_market(ctx.out / "aux_snapshots.mtx", report.aux_snapshots);
  ctx.manifest.add_file("full_report.csv");
  ctx.manifest.add_file("snapshots.mtx");
  ctx.manifest.add_file("aux_snapshots.mtx");
  ctx.manifest.add_timing("run_full", report.wall_seconds);
  ctx.manifest.write();
  std::cout << "run-full: " << report.times.size() << " instants, " << report.snapshots.size()
            << " snapshots, max Volterra residual " << report.max_volterra_residual << '\n';
  return 0;
}

fs::path basis_path(const fs::path& dir, int modes) {
  return dir / ("basis_k" + std::to_string(modes) + ".mtx");
}

int cmd_build_basis(Context& ctx, const fs::path& snapshot_path) {
  const SnapshotSet<double> snaps = io::read_snapshots(snapshot_path);
  const auto started = std::chrono::steady_clock::now();
  for (int modes : ctx.config.modes) {
    Mat<double> m;
    if (ctx.config.basis == BasisMethod::pod) {
      m = pod_basis(snaps, modes);
    } else {
      const auto basis = symplectic_basis(snaps, ctx.config.basis, modes / 2, ctx.config.greedy_tol);
      const auto [ortho, sympl] = basis.defects();
      std::cout << "basis 2k=" << basis.size() << ": |A^T A - I|_max = " << ortho
                << ", |A^T J A - J|_max = " << sympl
                << ((ortho <= 1e-10 && sympl <= 1e-10) ? "  pass" : "  FAIL") << '\n';
      m = basis.matrix();
    }
    const fs::path path = basis_path(ctx.out, modes);
    io::write_matrix_market(path, m);
    ctx.manifest.add_file(path.filename().string());
  }
  const Vec<double> pod = singular_value_report(snaps, SpectrumMode::pod);
  const Vec<double> cot = singular_value_report(snaps, SpectrumMode::cotangent);
  const Eigen::Index len = std::min(pod.size(), cot.size());
  std::vector<double> idx;
  std::vector<double> a;
  std::vector<double> b;
  for (Eigen::Index i = 0; i < len; ++i) {
    idx.push_back(static_cast<double>(i + 1));
    a.push_back(pod(i));
    b.push_back(cot(i));
  }
  io::write_csv(ctx.out / "singular_values.csv", {"index", "sigma_pod", "sigma_cotangent"}, {idx, a, b});
  ctx.manifest.add_file("singular_values.csv");
  ctx.manifest.add_timing("build_basis",
                          std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count());
  ctx.manifest.write("manifest_basis.json");
  return 0;
}

OrthoSymplecticBasis<double> load_symplectic_basis(const fs::path& path, Eigen::Index dim) {
  const Mat<double> a = io::read_matrix_market(path);
  if (a.rows() != dim || a.cols() % 2 != 0 || a.cols() == 0)
    throw ConfigError(path.string() + ": basis shape does not match the benchmark");
  return OrthoSymplecticBasis<double>(Mat<double>(a.leftCols(a.cols() / 2)));
}

int cmd_reduce(Context& ctx, bool integrate_too) {
  const Problem p = build_problem(ctx.config);
  const auto& sys = p.benchmark.system;
  for (int modes : ctx.config.modes) {
    const auto basis = load_symplectic_basis(basis_path(ctx.out, modes), sys.dim());
    const auto red = rdh_reduce(sys, basis, ctx.config.rule);
    const std::string tag = "k" + std::to_string(modes);
    if (!integrate_too) {
      const std::vector<std::pair<std::string, Mat<double>>> files = {
          {"reduced_" + tag + "_factor.mtx", red.factor()},
          {"reduced_" + tag + "_chi.mtx", red.chi()},
          {"reduced_" + tag + "_y0.mtx", Mat<double>(red.y0())},
          {"reduced_" + tag + "_aux_basis.mtx", red.aux_basis}};
      for (const auto& [name, m] : files) {
        io::write_matrix_market(ctx.out / name, m);
        ctx.manifest.add_file(name);
      }
      std::cout << "reduce 2k=" << modes << ": chi~ asymmetry "
                << (red.chi() - red.chi().transpose()).cwiseAbs().maxCoeff() << '\n';
      continue;
    }
    const auto run = integrate(red.system, ctx.config.t_end, ctx.config.dt, ctx.config.stride);
    write_report(ctx.out / ("reduced_report_" + tag + ".csv"), run);
    io::write_snapshots(ctx.out / ("reduced_snapshots_" + tag + ".mtx"),
                        reconstruct(basis.matrix(), run.snapshots));
    ctx.manifest.add_file("reduced_report_" + tag + ".csv");
    ctx.manifest.add_file("reduced_snapshots_" + tag + ".mtx");
    ctx.manifest.add_timing("run_reduced_" + tag, run.wall_seconds);
  }
  ctx.manifest.write(integrate_too ? "manifest_run_reduced.json" : "manifest_reduce.json");
  return 0;
}

/// One (method, mode count) comparison cell, sampled at the snapshot instants.
struct Cell {
  std::string method;
  int modes = 0;
  std::vector<double> err;
  std::vector<double> err_raw;
  std::vector<double> h;
  std::vector<double> e_string;
  std::vector<double> h_ext;
  std::vector<double> kinetic;
  std::vector<double> component;
  bool unstable = false;
  double max_volterra = 0.0;
  double wall = 0.0;
};

struct Reference {
  RunReport<double> tdd;
  std::optional<BaselineRun<double>> physical;
  Eigen::Index count = 0;
};

std::vector<double> error_series(const Mat<double>& ref, const Mat<double>& approx, double weight) {
  std::vector<double> out(static_cast<std::size_t>(ref.cols()), kNaN);
  const Eigen::Index cols = std::min(ref.cols(), approx.cols());
  for (Eigen::Index i = 0; i < cols; ++i)
    out[static_cast<std::size_t>(i)] = (ref.col(i) - approx.col(i)).norm() * weight;
  return out;
}

std::vector<double> kinetic_series(const Mat<double>& momenta) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < momenta.cols(); ++i) out.push_back(0.5 * momenta.col(i).squaredNorm());
  return out;
}

std::vector<double> component_series(const Mat<double>& ref, const Mat<double>& approx) {
  const Eigen::Index cols = std::min(ref.cols(), approx.cols());
  std::vector<double> out(static_cast<std::size_t>(ref.rows()), kNaN);
  if (cols < ref.cols() || cols == 0) return out;
  const Vec<double> mean = (ref - approx).cwiseAbs().rowwise().mean();
  for (Eigen::Index i = 0; i < mean.size(); ++i) out[static_cast<std::size_t>(i)] = mean(i);
  return out;
}

void pad(std::vector<double>& v, Eigen::Index count) { v.resize(static_cast<std::size_t>(count), kNaN); }

int cmd_compare(Context& ctx) {
  const RunConfig& cfg = ctx.config;
  const Problem p = build_problem(cfg);
  const auto& sys = p.benchmark.system;
  const Eigen::Index n = sys.half_dim();
  const double weight = std::sqrt(p.benchmark.dx);
  const bool sine_gordon = cfg.benchmark == "sine-gordon";

  auto has = [&](const std::string& m) { return std::find(cfg.methods.begin(), cfg.methods.end(), m) != cfg.methods.end(); };
  const bool baselines = has("psd") || has("pod");

  Reference ref;
  ref.tdd = integrate(sys, cfg.t_end, cfg.dt, cfg.stride);
  ref.count = ref.tdd.snapshots.size();
  if (baselines) {
    ref.physical = integrate_baseline(dissipative_full_model(sys), cfg.t_end, cfg.dt, cfg.stride);
    if (ref.physical->diverged)
      throw NumericalError("compare: full dissipative model diverged", ref.physical->diverged_at);
  }
  const Mat<double>& full_z = ref.tdd.snapshots.states();
  const Mat<double>& full_f = ref.tdd.aux_snapshots;
  Mat<double> q_inverse;
  if (p.ladder) q_inverse = p.ladder->q.inverse();
  const Mat<double> full_x = p.ladder ? Mat<double>(q_inverse * full_f) : Mat<double>();

  int max_modes = 0;
  for (int m : cfg.modes) max_modes = std::max(max_modes, m);
  std::optional<OrthoSymplecticBasis<double>> rdh_basis;
  std::optional<OrthoSymplecticBasis<double>> psd_basis;
  Mat<double> pod_v;
  const BasisMethod symplectic_method = cfg.basis == BasisMethod::pod ? BasisMethod::greedy : cfg.basis;
  if (has("rdh")) rdh_basis = symplectic_basis(ref.tdd.snapshots, symplectic_method, max_modes / 2, cfg.greedy_tol);
  if (has("psd"))
    psd_basis = symplectic_basis(ref.physical->report.snapshots, symplectic_method, max_modes / 2, cfg.greedy_tol);
  if (has("pod")) pod_v = pod_basis(ref.physical->report.snapshots, max_modes);

  auto slice = [](const OrthoSymplecticBasis<double>& b, int modes) {
    const Eigen::Index k = std::min<Eigen::Index>(modes / 2, b.k());
    return OrthoSymplecticBasis<double>(Mat<double>(b.e_columns().leftCols(k)));
  };

  std::vector<Cell> cells;
  for (const auto& m : cfg.methods)
    for (int modes : cfg.modes) {
      if (m == "full" && modes != cfg.modes.front()) continue;
      Cell c;
      c.method = m;
      c.modes = m == "full" ? 0 : modes;
      cells.push_back(std::move(c));
    }

  auto run_cell = [&](std::size_t idx) {
    Cell& c = cells[idx];
    const auto started = std::chrono::steady_clock::now();
    if (c.method == "full") {
      c.err.assign(static_cast<std::size_t>(ref.count), 0.0);
      c.err_raw = c.err;
      c.h = sample(ref.tdd.hamiltonian, cfg.stride, ref.count);
      c.e_string = sample(ref.tdd.string_energy, cfg.stride, ref.count);
      c.h_ext = sample(ref.tdd.extended_energy, cfg.stride, ref.count);
      if (sine_gordon) c.kinetic = kinetic_series(full_f.bottomRows(n));
      if (p.ladder) c.component.assign(static_cast<std::size_t>(sys.dim()), 0.0);
      c.max_volterra = ref.tdd.max_volterra_residual;
    } else if (c.method == "rdh") {
      const auto basis = slice(*rdh_basis, c.modes);
      const auto red = rdh_reduce(sys, basis, cfg.rule);
      const auto run = integrate(red.system, cfg.t_end, cfg.dt, cfg.stride);
      const Mat<double> z = basis.matrix() * run.snapshots.states();
      const Mat<double> f = red.aux_basis * run.aux_snapshots;
      c.err = error_series(full_z, z, weight);
      c.err_raw = error_series(full_z, z, 1.0);
      c.h = sample(run.hamiltonian, cfg.stride, ref.count);
      c.e_string = sample(run.string_energy, cfg.stride, ref.count);
      c.h_ext = sample(run.extended_energy, cfg.stride, ref.count);
      if (sine_gordon) c.kinetic = kinetic_series(f.bottomRows(n));
      if (p.ladder) c.component = component_series(full_x, q_inverse * f);
      c.max_volterra = run.max_volterra_residual;
    } else {
      const bool psd = c.method == "psd";
      const BaselineReduced<double> model =
          psd ? psd_baseline(sys, slice(*psd_basis, c.modes))
              : pod_baseline(sys, Mat<double>(pod_v.leftCols(std::min<Eigen::Index>(c.modes, pod_v.cols()))));
      const auto run = integrate_baseline(model, cfg.t_end, cfg.dt, cfg.stride);
      const Mat<double> z = model.projection * run.report.snapshots.states();
      const Mat<double>& ref_z = ref.physical->report.snapshots.states();
      c.err = error_series(ref_z, z, weight);
      c.err_raw = error_series(ref_z, z, 1.0);
      c.h = sample(run.report.hamiltonian, cfg.stride, ref.count);
      c.e_string.assign(static_cast<std::size_t>(ref.count), 0.0);
      c.h_ext = c.h;
      if (sine_gordon) {
        c.kinetic = kinetic_series(z.bottomRows(n));
        pad(c.kinetic, ref.count);
      }
      if (p.ladder) c.component = component_series(full_x, p.ladder->t * z);
      const double h0 = run.report.hamiltonian.front();
      const double hmax = *std::max_element(run.report.hamiltonian.begin(), run.report.hamiltonian.end());
      c.unstable = run.diverged || spectral_abscissa(model.op) > 1e-8 ||
                   (!sys.has_input() && hmax > h0 + 1e-2 * std::abs(h0));
    }
    c.wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  };
  parallel_for(cells.size(), thread_budget(), run_cell);

  const std::vector<double> times = ref.tdd.snapshots.times();
  {
    std::vector<std::string> header{"t"};
    std::vector<std::vector<double>> cols{times};
    std::vector<std::vector<double>> raw{times};
    for (const auto& c : cells) {
      header.push_back("err_" + (c.method == "full" ? std::string("full") : label(c.method, c.modes)));
      cols.push_back(c.err);
      raw.push_back(c.err_raw);
    }
    io::write_csv(ctx.out / "errors.csv", header, cols);
    io::write_csv(ctx.out / "errors_unweighted.csv", header, raw);
    ctx.manifest.add_file("errors.csv");
    ctx.manifest.add_file("errors_unweighted.csv");
  }
  {
    std::vector<std::string> header{"t", "H_full", "E_string_full", "H_ext_full"};
    std::vector<std::vector<double>> cols{times, sample(ref.tdd.hamiltonian, cfg.stride, ref.count),
                                          sample(ref.tdd.string_energy, cfg.stride, ref.count),
                                          sample(ref.tdd.extended_energy, cfg.stride, ref.count)};
    for (const auto& c : cells) {
      if (c.method == "full") continue;
      const std::string l = label(c.method, c.modes);
      header.insert(header.end(), {"H_" + l, "E_string_" + l, "H_ext_" + l});
      cols.insert(cols.end(), {c.h, c.e_string, c.h_ext});
    }
    io::write_csv(ctx.out / "energy.csv", header, cols);
    ctx.manifest.add_file("energy.csv");
  }
  if (sine_gordon) {
    std::vector<std::string> header{"t", "K_full"};
    std::vector<std::vector<double>> cols{times, kinetic_series(full_f.bottomRows(n))};
    for (const auto& c : cells) {
      if (c.method == "full") continue;
      header.push_back("K_" + label(c.method, c.modes));
      cols.push_back(c.kinetic);
    }
    io::write_csv(ctx.out / "kinetic.csv", header, cols);
    ctx.manifest.add_file("kinetic.csv");
  }
  if (p.ladder) {
    std::vector<double> index;
    for (Eigen::Index i = 0; i < sys.dim(); ++i) index.push_back(static_cast<double>(i + 1));
    std::vector<std::string> header{"component"};
    std::vector<std::vector<double>> cols{index};
    for (const auto& c : cells) {
      if (c.method == "full") continue;
      header.push_back("err_" + label(c.method, c.modes));
      cols.push_back(c.component);
    }
    io::write_csv(ctx.out / "component_errors.csv", header, cols);
    ctx.manifest.add_file("component_errors.csv");
  }

  Json summary = Json::object();
  for (const auto& c : cells) {
    const std::string l = c.method == "full" ? "full" : label(c.method, c.modes);
    double sum = 0.0;
    double mx = 0.0;
    bool finite = true;
    for (double e : c.err) {
      if (!std::isfinite(e)) finite = false;
      sum += e;
      mx = std::max(mx, e);
    }
    Json entry = {{"mean_error", finite ? Json(sum / static_cast<double>(c.err.size())) : Json(nullptr)},
                  {"max_error", finite ? Json(mx) : Json(nullptr)},
                  {"unstable", c.unstable}};
    if (c.method == "rdh" || c.method == "full") entry["max_volterra_residual"] = c.max_volterra;
    summary[l] = entry;
    ctx.manifest.add_timing("cell_" + l, c.wall);
    std::cout << l << ": mean error " << (finite ? io::format_double(sum / static_cast<double>(c.err.size())) : "nan")
              << (c.unstable ? "  (unstable)" : "") << '\n';
  }
  Json cfg_echo = cfg.merged;
  cfg_echo["results"] = summary;
  ctx.manifest.set_config(cfg_echo);
  ctx.manifest.write();
  return 0;
}

int cmd_check(const fs::path& manifest) {
  const auto problems = io::Manifest::verify(manifest);
  for (const auto& pr : problems) std::cerr << "check: " << pr << '\n';
  if (problems.empty()) std::cout << "check: all files match " << manifest.string() << '\n';
  return problems.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Structure-preserving reduction of dissipative Hamiltonian systems"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string out_dir = "out";
  std::vector<std::string> overrides;
  std::string benchmark;
  app.add_option("--config", config_path, "JSON configuration file");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--set", overrides, "Dotted-path override key=value (repeatable)");
  app.add_option("--benchmark", benchmark, "Benchmark name")
      ->check(CLI::IsMember(kBenchmarks));

  auto* run_full = app.add_subcommand("run-full", "Integrate the full model and collect snapshots");
  std::string snapshots;
  auto* build_basis = app.add_subcommand("build-basis", "Build reduced bases from snapshots");
  build_basis->add_option("--snapshots", snapshots, "Snapshot file (default <out>/snapshots.mtx)");
  auto* reduce = app.add_subcommand("reduce", "Assemble RDH reduced operators from stored bases");
  auto* run_reduced = app.add_subcommand("run-reduced", "Integrate RDH reduced models from stored bases");
  auto* compare = app.add_subcommand("compare", "Compare RDH, PSD and POD against the full model");
  std::string manifest;
  auto* check = app.add_subcommand("check", "Verify a manifest's file hashes");
  check->add_option("--manifest", manifest, "Manifest file (default <out>/manifest.json)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const fs::path out(out_dir);
    if (check->parsed()) return cmd_check(manifest.empty() ? out / "manifest.json" : fs::path(manifest));

    Json user = config_path.empty() ? Json::object() : io::read_json(config_path);
    if (!benchmark.empty()) user["benchmark"] = benchmark;
    for (const auto& s : overrides) io::apply_override(user, s);
    Context ctx(resolve_config(user), out);
    fs::create_directories(out);

    if (run_full->parsed()) return cmd_run_full(ctx);
    if (build_basis->parsed())
      return cmd_build_basis(ctx, snapshots.empty() ? out / "snapshots.mtx" : fs::path(snapshots));
    if (reduce->parsed()) return cmd_reduce(ctx, false);
    if (run_reduced->parsed()) return cmd_reduce(ctx, true);
    if (compare->parsed()) return cmd_compare(ctx);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ShapeError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace sympmor::cli
