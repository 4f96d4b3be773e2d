#include <dfgm/bench.hpp>

#include <dfgm/oracle.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

namespace dfgm {

namespace {

double sequential_sum(const Vector& v) {
  double acc = 0.0;
  for (Index i = 0; i < v.size(); ++i) acc += v[i];
  return acc;
}

double median_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const size_t k = xs.size();
  if (k % 2 == 1) return xs[k / 2];
  return 0.5 * (xs[k / 2 - 1] + xs[k / 2]);
}

double p95_of(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const size_t k = xs.size();
  const size_t idx = static_cast<size_t>(std::ceil(0.95 * static_cast<double>(k)));
  return xs[std::min(k - 1, idx == 0 ? 0 : idx - 1)];
}

std::string describe_environment() {
  std::ostringstream out;
  out << "eigen " << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.'
      << EIGEN_MINOR_VERSION << ", " << std::thread::hardware_concurrency() << " hw threads";
#if defined(__VERSION__)
  out << ", compiler " << __VERSION__;
#endif
  return out.str();
}

std::string format_time(double seconds) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(3);
  if (seconds < 1e-3)
    out << seconds * 1e6 << " us";
  else if (seconds < 1.0)
    out << seconds * 1e3 << " ms";
  else
    out << seconds << " s";
  return out.str();
}

// Minimal fixed-width renderer shared by both table flavors.
std::string render_table(const std::vector<std::string>& headers,
                         const std::vector<std::pair<std::string, std::vector<std::string>>>& rows) {
  std::vector<size_t> widths(headers.size());
  size_t label_width = 0;
  for (size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
  for (const auto& [label, cells] : rows) {
    label_width = std::max(label_width, label.size());
    for (size_t c = 0; c < cells.size(); ++c) widths[c] = std::max(widths[c], cells[c].size());
  }
  label_width = std::max(label_width, std::string("Metric").size());

  std::ostringstream out;
  auto pad = [](const std::string& s, size_t w) {
    std::string padded = s;
    padded.resize(w, ' ');
    return padded;
  };
  out << pad("Metric", label_width);
  for (size_t c = 0; c < headers.size(); ++c) out << " | " << pad(headers[c], widths[c]);
  out << '\n';
  out << std::string(label_width, '-');
  for (size_t c = 0; c < headers.size(); ++c) out << "-+-" << std::string(widths[c], '-');
  out << '\n';
  for (const auto& [label, cells] : rows) {
    out << pad(label, label_width);
    for (size_t c = 0; c < cells.size(); ++c) out << " | " << pad(cells[c], widths[c]);
    out << '\n';
  }
  return out.str();
}

}  // namespace

BenchReport run_benchmark(const QpProblem& p, const std::vector<Backend>& backends,
                          const BenchOptions& opts) {
  if (backends.empty()) throw std::invalid_argument("run_benchmark: no backends given");
  if (opts.reps < 3) throw std::invalid_argument("run_benchmark: reps must be >= 3");
  if (const auto rep = validate_qp(p); !rep.ok)
    throw std::invalid_argument("run_benchmark: problem failed validation");

  BenchReport report;
  report.environment = describe_environment();

  std::vector<Vector> solutions;
  using clock = std::chrono::steady_clock;

  for (const Backend& backend : backends) {
    SolverOptions sopts;
    sopts.max_iters = opts.max_iters;
    sopts.tol = opts.tol;
    sopts.precondition = opts.precondition;
    sopts.backend = backend;

    BenchRow row;
    row.backend = backend.name();
    std::vector<double> times;
    times.reserve(static_cast<size_t>(opts.reps - 1));
    Solution last;
    try {
      for (int rep = 0; rep < opts.reps; ++rep) {
        const auto start = clock::now();
        last = solve(p, sopts);
        const auto stop = clock::now();
        if (rep > 0)  // first rep is warm-up
          times.push_back(std::chrono::duration<double>(stop - start).count());
      }
    } catch (const DivergenceError& e) {
      report.failed = true;
      report.failure_detail = row.backend + ": " + e.what();
      return report;
    }

    row.median_s = median_of(times);
    row.p95_s = p95_of(times);
    row.iters = last.iters;
    row.per_iter_s = last.iters > 0 ? row.median_s / last.iters : 0.0;
    row.checksum = sequential_sum(last.z);
    report.rows.push_back(row);
    solutions.push_back(last.z);
  }

  // Cross-check the backends against each other.
  for (size_t i = 1; i < solutions.size(); ++i) {
    const double scale = 1.0 + solutions[0].cwiseAbs().maxCoeff();
    const double diff = (solutions[i] - solutions[0]).cwiseAbs().maxCoeff();
    if (diff > 1e-6 * scale) {
      report.failed = true;
      report.failure_detail = "backend mismatch: " + report.rows[i].backend + " vs " +
                              report.rows[0].backend + " differs by " + format_double(diff);
      return report;
    }
  }

  if (opts.check_oracle) {
    if (p.m() > 20) {
      report.failed = true;
      report.failure_detail = "oracle check requires m <= 20";
      return report;
    }
    const OracleSolution truth = solve_enumerate(p);
    if (!truth.optimal) {
      report.failed = true;
      report.failure_detail = "oracle found no feasible candidate";
      return report;
    }
    const double scale = 1.0 + truth.z.cwiseAbs().maxCoeff();
    const double diff = (solutions[0] - truth.z).cwiseAbs().maxCoeff();
    if (diff > 1e-3 * scale) {
      report.failed = true;
      report.failure_detail = "oracle mismatch: solver differs by " + format_double(diff);
      return report;
    }
  }
  return report;
}

std::string render_report(const BenchReport& report) {
  if (report.rows.empty()) throw std::invalid_argument("render_report: empty benchmark report");

  std::vector<std::string> headers;
  for (const auto& row : report.rows) headers.push_back(row.backend);

  std::vector<std::pair<std::string, std::vector<std::string>>> rows(5);
  rows[0].first = "Single iteration latency";
  rows[1].first = "Sample computation latency";
  rows[2].first = "p95 sample latency";
  rows[3].first = "Iterations";
  rows[4].first = "Solution checksum";
  for (const auto& row : report.rows) {
    rows[0].second.push_back(format_time(row.per_iter_s));
    rows[1].second.push_back(format_time(row.median_s));
    rows[2].second.push_back(format_time(row.p95_s));
    rows[3].second.push_back(std::to_string(row.iters));
    rows[4].second.push_back(format_double(row.checksum));
  }

  std::string out = render_table(headers, rows);
  out += "environment: " + report.environment + "\n";
  if (report.failed) out += "FAILED: " + report.failure_detail + "\n";
  return out;
}

std::string render_report(const std::vector<CycleColumn>& columns, double clock_mhz) {
  if (columns.empty()) throw std::invalid_argument("render_report: no estimate columns");

  std::vector<std::string> headers;
  for (const auto& col : columns) headers.push_back(col.label);

  auto cycles_cell = [&](Cycles c, bool with_ms) {
    std::string cell = std::to_string(c) + " clk";
    if (with_ms && clock_mhz > 0.0) {
      std::ostringstream ms;
      ms.setf(std::ios::fixed);
      ms.precision(3);
      ms << static_cast<double>(c) / (clock_mhz * 1e3);
      cell += " (" + ms.str() + " ms)";
    }
    return cell;
  };

  std::vector<std::pair<std::string, std::vector<std::string>>> rows(5);
  rows[0].first = "Single iteration latency";
  rows[1].first = "Sample computation latency";
  rows[2].first = "Multipliers";
  rows[3].first = "Adders";
  rows[4].first = "Memory banks";
  for (const auto& col : columns) {
    rows[0].second.push_back(cycles_cell(col.report.iter_cycles, false));
    rows[1].second.push_back(cycles_cell(col.report.solve_cycles, true));
    rows[2].second.push_back(std::to_string(col.report.mults));
    rows[3].second.push_back(std::to_string(col.report.adders));
    rows[4].second.push_back(std::to_string(col.report.mem_banks));
  }
  return render_table(headers, rows);
}

}  // namespace dfgm
