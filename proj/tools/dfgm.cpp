// Command-line front end: solve problems, benchmark kernel backends against
// each other, run the exact enumeration oracle, and evaluate the cycle-cost
// model. Exit codes: 0 success, 1 usage error, 2 validation/parse error,
// 3 divergence or result mismatch.

#include <CLI11.hpp>

#include <dfgm/bench.hpp>
#include <dfgm/cost_model.hpp>
#include <dfgm/oracle.hpp>
#include <dfgm/qp_problem.hpp>
#include <dfgm/solver.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitMismatch = 3;

std::string format_vector(const dfgm::Vector& v) {
  std::string out;
  for (dfgm::Index i = 0; i < v.size(); ++i) {
    if (i) out += ' ';
    out += dfgm::format_double(v[i]);
  }
  return out;
}

std::string format_solution(const dfgm::Solution& sol) {
  std::ostringstream out;
  out << "z: " << format_vector(sol.z) << '\n';
  out << "lambda: " << format_vector(sol.lambda) << '\n';
  out << "iters: " << sol.iters << '\n';
  out << "residual: " << dfgm::format_double(sol.primal_residual) << '\n';
  out << "gap: " << dfgm::format_double(sol.gap) << '\n';
  return out.str();
}

dfgm::QpProblem load_validated(const std::string& path) {
  dfgm::QpProblem p = dfgm::load_qp_file(path);
  if (const auto rep = dfgm::validate_qp(p); !rep.ok) {
    std::string msg = "problem failed validation:";
    for (const auto& v : rep.violations) msg += "\n  " + v;
    throw std::invalid_argument(msg);
  }
  return p;
}

struct SolveArgs {
  std::string file;
  int iters = 500;
  double tol = 0.0;
  std::string backend = "naive";
  int workers = 4;
  bool precondition = false;
  std::string out_file;
};

int run_solve(const SolveArgs& args) {
  dfgm::QpProblem p = load_validated(args.file);

  dfgm::SolverOptions opts;
  opts.max_iters = args.iters;
  opts.tol = args.tol;
  opts.precondition = args.precondition;
  opts.backend = dfgm::parse_backend(args.backend);
  if (opts.backend.kind == dfgm::BackendKind::parallel) opts.backend.workers = args.workers;

  if (p.m() > 0 && p.C.isZero(0.0))
    std::cerr << "warning: constraint matrix is zero; dual steps are guarded\n";

  const dfgm::Solution sol = dfgm::solve(p, opts);
  const std::string text = format_solution(sol);
  if (!args.out_file.empty()) {
    std::ofstream out(args.out_file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + args.out_file + "'");
    out << text;
    std::cout << "solved: iters=" << sol.iters
              << " residual=" << dfgm::format_double(sol.primal_residual)
              << " gap=" << dfgm::format_double(sol.gap) << '\n';
  } else {
    std::cout << text;
  }
  return kExitOk;
}

struct BenchArgs {
  std::string file;
  std::string backends;
  int reps = 10;
  int iters = 500;
  bool oracle = false;
};

int run_bench(const BenchArgs& args) {
  dfgm::QpProblem p = load_validated(args.file);

  std::vector<dfgm::Backend> backends;
  std::stringstream ss(args.backends);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) backends.push_back(dfgm::parse_backend(item));
  }

  dfgm::BenchOptions opts;
  opts.reps = args.reps;
  opts.max_iters = args.iters;
  opts.check_oracle = args.oracle;

  const dfgm::BenchReport report = dfgm::run_benchmark(p, backends, opts);
  std::cout << dfgm::render_report(report);
  return report.failed ? kExitMismatch : kExitOk;
}

int run_oracle(const std::string& file) {
  dfgm::QpProblem p = load_validated(file);
  const dfgm::OracleSolution sol = dfgm::solve_enumerate(p);
  if (!sol.optimal) {
    std::cerr << "oracle: no feasible candidate (problem infeasible?)\n";
    return kExitMismatch;
  }
  std::cout << "z: " << format_vector(sol.z) << '\n';
  std::cout << "lambda: " << format_vector(sol.lambda) << '\n';
  std::cout << "objective: " << dfgm::format_double(sol.objective) << '\n';
  std::cout << "active:";
  for (const auto idx : sol.active_set) std::cout << ' ' << idx;
  std::cout << '\n';
  return kExitOk;
}

struct EstimateArgs {
  std::string file;
  std::string config;
  int iters = 500;
  bool iters_given = false;
  double clock_mhz = 0.0;
};

int run_estimate(const EstimateArgs& args) {
  const dfgm::QpProblem p = dfgm::load_qp_file(args.file);
  if (p.m() < 1) throw std::invalid_argument("estimate: problem has no constraints (m = 0)");

  std::ifstream in(args.config, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + args.config + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  dfgm::EstimatorSettings settings = dfgm::load_estimator_settings(buf.str());
  if (args.iters_given) settings.iters = args.iters;

  const dfgm::CycleReport rep = dfgm::estimate_report(settings.iters, p.n(), p.m(),
                                                      settings.config, settings.c_pro,
                                                      settings.c_epi);
  std::string label = std::filesystem::path(args.config).stem().string();
  if (label.empty()) label = "config";
  std::cout << dfgm::render_report({{label, rep}}, args.clock_mhz);
  return kExitOk;
}

struct CalibrateArgs {
  std::string targets = "9000,1000,237";
  double tolerance = 0.15;
};

int run_calibrate(const CalibrateArgs& args) {
  dfgm::CalibrationTargets targets;
  targets.tolerance = args.tolerance;
  {
    std::stringstream ss(args.targets);
    std::string item;
    std::vector<double> values;
    while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    if (values.size() != 3) throw std::invalid_argument("--targets needs three comma-separated values");
    targets.naive = values[0];
    targets.opt_a = values[1];
    targets.opt_b = values[2];
  }

  const auto start = std::chrono::steady_clock::now();
  const std::optional<dfgm::Calibration> cal = dfgm::calibrate(targets);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (!cal) {
    std::cerr << "calibrate: no grid point meets the targets at tolerance "
              << args.tolerance << '\n';
    return kExitMismatch;
  }

  std::cout << "calibration found in " << static_cast<int>(elapsed * 1000) << " ms\n";
  std::cout << "dims: n = " << cal->n << ", m = " << cal->m << '\n';
  std::cout << "constants: L_mul = " << cal->naive_cfg.L_mul << ", L_add = " << cal->naive_cfg.L_add
            << ", c_loop = " << cal->naive_cfg.c_loop << ", c_vec = " << cal->naive_cfg.c_vec
            << '\n';
  std::cout << "speedups: naive->A " << cal->speedup_naive_a << "x, A->B " << cal->speedup_a_b
            << "x, worst miss " << cal->max_rel_error * 100.0 << "%\n\n";

  const dfgm::Cycles iters = 500;
  std::vector<dfgm::CycleColumn> cols = {
      {"Initial version", dfgm::estimate_report(iters, cal->n, cal->m, cal->naive_cfg)},
      {"Optimized version A", dfgm::estimate_report(iters, cal->n, cal->m, cal->opt_a_cfg)},
      {"Optimized version B", dfgm::estimate_report(iters, cal->n, cal->m, cal->opt_b_cfg)},
  };
  std::cout << dfgm::render_report(cols) << '\n';

  auto dump_cfg = [&](const char* name, const dfgm::KernelConfig& cfg) {
    dfgm::EstimatorSettings s;
    s.config = cfg;
    s.iters = iters;
    std::cout << "# " << name << '\n' << dfgm::save_estimator_settings(s) << '\n';
  };
  dump_cfg("initial version", cal->naive_cfg);
  dump_cfg("optimized version A", cal->opt_a_cfg);
  dump_cfg("optimized version B", cal->opt_b_cfg);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual fast gradient method QP solver and HLS-style cycle estimator"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "solve a QP problem file");
  solve_cmd->add_option("file", solve_args.file, "problem file")->required();
  solve_cmd->add_option("--iters", solve_args.iters, "iteration budget")->capture_default_str();
  solve_cmd->add_option("--tol", solve_args.tol, "early-stop tolerance on gap and residual")
      ->capture_default_str();
  solve_cmd->add_option("--backend", solve_args.backend, "naive|tree|blocked|parallel")
      ->capture_default_str();
  solve_cmd->add_option("--workers", solve_args.workers, "worker count for parallel backend")
      ->capture_default_str();
  solve_cmd->add_flag("--precondition", solve_args.precondition, "diagonal dual scaling");
  solve_cmd->add_option("--out", solve_args.out_file, "write the solution to this file");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "time solves across kernel backends");
  bench_cmd->add_option("file", bench_args.file, "problem file")->required();
  bench_cmd->add_option("--backends", bench_args.backends, "comma list, e.g. naive,tree,parallel:4")
      ->required();
  bench_cmd->add_option("--reps", bench_args.reps, "repetitions per backend (first is warm-up)")
      ->capture_default_str();
  bench_cmd->add_option("--iters", bench_args.iters, "iteration budget")->capture_default_str();
  bench_cmd->add_flag("--oracle", bench_args.oracle, "cross-check against the enumeration oracle");

  std::string oracle_file;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact active-set enumeration solve");
  oracle_cmd->add_option("file", oracle_file, "problem file")->required();

  EstimateArgs est_args;
  auto* est_cmd = app.add_subcommand("estimate", "cycle estimate for a problem under a config");
  est_cmd->add_option("file", est_args.file, "problem file (supplies the dimensions)")->required();
  est_cmd->add_option("--config", est_args.config, "estimator config file")->required();
  auto* est_iters = est_cmd->add_option("--iters", est_args.iters, "iteration count")
                        ->capture_default_str();
  est_cmd->add_option("--clock-mhz", est_args.clock_mhz,
                      "display cycles also as milliseconds at this clock");

  CalibrateArgs cal_args;
  auto* cal_cmd = app.add_subcommand("calibrate", "grid-search the cost-model calibration");
  cal_cmd->add_option("--targets", cal_args.targets, "three per-iteration latency targets")
      ->capture_default_str();
  cal_cmd->add_option("--tolerance", cal_args.tolerance, "max relative miss per target")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  est_args.iters_given = est_iters->count() > 0;

  try {
    if (solve_cmd->parsed()) return run_solve(solve_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
    if (oracle_cmd->parsed()) return run_oracle(oracle_file);
    if (est_cmd->parsed()) return run_estimate(est_args);
    if (cal_cmd->parsed()) return run_calibrate(cal_args);
  } catch (const dfgm::DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitMismatch;
  } catch (const dfgm::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitUsage;
}
