#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace dfgm {

using Cycles = std::int64_t;

/// Directive set for the analytic matvec latency model. Latencies are in
/// clock cycles. `unroll` is the inner-loop (reduction) unroll factor;
/// kUnrollFull resolves to the full reduction length at estimate time.
/// `II` is the outer row loop's pipeline initiation interval, 0 meaning the
/// row loop is not pipelined. `row_par` rows run concurrently (this assumes
/// the arrays are partitioned across that many banks).
struct KernelConfig {
  Cycles L_mul = 3;
  Cycles L_add = 4;
  Cycles unroll = 1;  // 0 = full
  Cycles II = 0;      // 0 = not pipelined
  Cycles row_par = 1;
  Cycles c_loop = 0;  // per-trip loop control overhead, non-pipelined loops only
  Cycles c_fixed = 0; // per-kernel fixed overhead
  Cycles c_vec = 1;   // per-element cost of the surrounding vector ops
};

inline constexpr Cycles kUnrollFull = 0;

struct ResourceEstimate {
  Cycles mults = 0;
  Cycles adders = 0;
  Cycles mem_banks = 0;
};

struct CycleReport {
  Cycles iter_cycles = 0;
  Cycles solve_cycles = 0;
  Cycles mults = 0;
  Cycles adders = 0;
  Cycles mem_banks = 0;
};

/// Throws std::invalid_argument if any field is out of range.
void validate_config(const KernelConfig& cfg);

/// Latency of one p x q matrix-vector product under cfg.
///
/// Not pipelined (II = 0), unroll = 1:
///   p * (q*(L_mul + L_add + c_loop) + c_loop) + c_fixed
/// Not pipelined, unroll u >= 2: each row runs ceil(q/u) chunk passes,
///   row body depth B = L_mul + ceil(log2 u)*L_add + (ceil(q/u)-1)*(L_mul+L_add),
///   cycles = p * (B + ceil(q/u)*c_loop + c_loop) + c_fixed
/// Pipelined (II >= 1):
///   cycles = B + (ceil(p/row_par) - 1)*II + c_fixed
/// unroll and row_par are clamped to q and p respectively.
Cycles estimate_matvec_cycles(Cycles rows, Cycles cols, const KernelConfig& cfg);

/// One main-loop iteration: the two matvecs (n x m then m x n) plus the
/// surrounding vector ops at c_vec per element, c_vec*(n + m) total.
Cycles estimate_iteration_cycles(Cycles n, Cycles m, const KernelConfig& cfg);

/// iters * estimate_iteration_cycles(n, m, cfg) + c_pro + c_epi.
Cycles estimate_solve_cycles(Cycles iters, Cycles n, Cycles m, const KernelConfig& cfg,
                             Cycles c_pro = 0, Cycles c_epi = 0);

/// The bare sample-latency arithmetic, iters * iter_cycles + c_pro + c_epi,
/// for when the per-iteration latency is already known.
Cycles sample_cycles(Cycles iters, Cycles iter_cycles, Cycles c_pro = 0, Cycles c_epi = 0);

/// Qualitative resource proxies: mults = u*row_par, adders = (u-1)*row_par
/// (a u-leaf adder tree), mem_banks = u*row_par partitioned banks. A full
/// unroll resolves against max(n, m), the widest reduction in the loop.
ResourceEstimate estimate_resources(Cycles n, Cycles m, const KernelConfig& cfg);

/// Convenience bundle of the above for reporting.
CycleReport estimate_report(Cycles iters, Cycles n, Cycles m, const KernelConfig& cfg,
                            Cycles c_pro = 0, Cycles c_epi = 0);

/// Estimator inputs as read from a config file of `key = value` lines
/// ('#' comments). Keys are the KernelConfig field names plus iters, c_pro,
/// c_epi; `unroll` also accepts the literal `full`.
struct EstimatorSettings {
  KernelConfig config;
  Cycles iters = 500;
  Cycles c_pro = 0;
  Cycles c_epi = 0;
};

EstimatorSettings load_estimator_settings(std::string_view text);
std::string save_estimator_settings(const EstimatorSettings& s);

/// Calibration: a grid search for problem dimensions and latency constants
/// such that three directive ladders land near the target per-iteration
/// latencies:
///   naive       unroll=1, II=0, row_par=1
///   optimized A + full/partial unroll, pipelined rows, row_par=1
///   optimized B same as A with row_par raised
struct CalibrationTargets {
  double naive = 9000.0;
  double opt_a = 1000.0;
  double opt_b = 237.0;
  double tolerance = 0.15;        // max relative miss per config
  double min_speedup_naive_a = 8.0;
  double min_speedup_a_b = 3.5;
};

struct Calibration {
  Cycles n = 0;
  Cycles m = 0;
  KernelConfig naive_cfg;
  KernelConfig opt_a_cfg;
  KernelConfig opt_b_cfg;
  Cycles naive_cycles = 0;
  Cycles opt_a_cycles = 0;
  Cycles opt_b_cycles = 0;
  double max_rel_error = 0.0;
  double speedup_naive_a = 0.0;
  double speedup_a_b = 0.0;
};

/// Exhaustive search over a bounded grid (dims, L_mul/L_add/c_loop/c_vec,
/// unroll, II, row partitioning). Returns the feasible point with the
/// smallest worst-case relative miss, or nullopt if the grid contains none.
/// Deterministic; runs in a few seconds.
std::optional<Calibration> calibrate(const CalibrationTargets& targets = {});

/// The calibration this repo ships, found by `calibrate` with the default
/// targets and frozen here so reports and tests do not re-run the search.
Calibration default_calibration();

}  // namespace dfgm
