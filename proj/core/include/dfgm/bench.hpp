#pragma once

#include <dfgm/cost_model.hpp>
#include <dfgm/kernels.hpp>
#include <dfgm/qp_problem.hpp>
#include <dfgm/solver.hpp>

#include <string>
#include <vector>

namespace dfgm {

struct BenchRow {
  std::string backend;
  double median_s = 0.0;
  double p95_s = 0.0;
  double per_iter_s = 0.0;
  double checksum = 0.0;  // plain sequential sum of the solution entries
  int iters = 0;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  std::string environment;
  bool failed = false;
  std::string failure_detail;
};

struct BenchOptions {
  int reps = 10;           // >= 3; the first rep is warm-up and not timed
  int max_iters = 500;
  double tol = 0.0;
  bool precondition = false;
  bool check_oracle = false;  // compare against solve_enumerate (needs m <= 20)
};

/// Solves the problem reps times per backend with identical options, timing
/// solve() only. Solutions are cross-checked entrywise across backends at
/// 1e-6 relative (and against the oracle at 1e-3 relative when requested);
/// a mismatch or divergence marks the report failed rather than throwing.
BenchReport run_benchmark(const QpProblem& p, const std::vector<Backend>& backends,
                          const BenchOptions& opts);

/// Fixed-width text table for a benchmark report. Rejects empty reports.
std::string render_report(const BenchReport& report);

/// One column of a cycle-estimate table.
struct CycleColumn {
  std::string label;
  CycleReport report;
};

/// Fixed-width text table for cost-model estimates. Deterministic: equal
/// inputs give byte-identical output. clock_mhz > 0 adds a milliseconds
/// conversion next to the sample latency.
std::string render_report(const std::vector<CycleColumn>& columns, double clock_mhz = 0.0);

}  // namespace dfgm
