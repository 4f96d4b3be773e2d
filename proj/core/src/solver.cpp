#include <dfgm/solver.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <string>

namespace dfgm {

namespace {

constexpr double kRayleighRelTol = 1e-6;
constexpr int kMaxPowerSteps = 500;
constexpr double kSafetyFactor = 1.01;

// One power-iteration run from a given start, Rayleigh-quotient stopping
// rule. The estimate is a lower bound on the top eigenvalue.
double power_run(const std::function<Vector(const Vector&)>& apply, Vector w) {
  Vector u = apply(w);
  double estimate = w.dot(u) / w.dot(w);
  for (int step = 1; step < kMaxPowerSteps; ++step) {
    const double norm = u.norm();
    if (norm == 0.0) break;
    w = u / norm;
    u = apply(w);
    const double prev = estimate;
    estimate = w.dot(u);
    if (std::abs(estimate - prev) < kRayleighRelTol * std::abs(estimate)) break;
  }
  return estimate;
}

// Largest eigenvalue of w -> C_rows H^-1 C_rows' w by power iteration from
// the all-ones start. Returns nullopt if the operator is identically zero.
std::optional<double> power_iteration_lmax(const Matrix& C, const Eigen::LLT<Matrix>& chol_H) {
  const Index m = C.rows();
  auto apply = [&](const Vector& w) -> Vector {
    return C * chol_H.solve(C.transpose() * w);
  };

  Vector w = Vector::Ones(m);
  Vector u = apply(w);
  if (u.isZero(0.0)) {
    // The ones vector can sit in the kernel (e.g. paired rows c and -c).
    // Probe canonical directions; a PSD operator that kills the whole
    // basis is zero.
    bool found = false;
    for (Index i = 0; i < m && !found; ++i) {
      w = Vector::Unit(m, i);
      u = apply(w);
      found = !u.isZero(0.0);
    }
    if (!found) return std::nullopt;
  }
  // Resume from the surviving direction.
  double estimate = w.dot(u) / w.dot(w);
  Vector w2 = u;
  for (int step = 1; step < kMaxPowerSteps; ++step) {
    const double norm = w2.norm();
    if (norm == 0.0) break;
    w2 /= norm;
    const Vector u2 = apply(w2);
    const double prev = estimate;
    estimate = w2.dot(u2);
    w2 = u2;
    if (std::abs(estimate - prev) < kRayleighRelTol * std::abs(estimate)) break;
  }
  return estimate;
}

// Top eigenvalue of the Jacobi-scaled dual operator. Scaling flattens the
// diagonal to one, which for small m routinely makes the ones vector an
// exact *minor* eigenvector (any 2x2 symmetric matrix with equal diagonal
// has (1,1) as an eigenvector), so a single fixed start stalls on the wrong
// eigenvalue. Run from several fixed starts and keep the best estimate;
// the basis starts make a blind spot impossible for m <= 8.
double scaled_lmax(const Matrix& scaled_C, const Eigen::LLT<Matrix>& chol_H) {
  const Index m = scaled_C.rows();
  auto apply = [&](const Vector& w) -> Vector {
    return scaled_C * chol_H.solve(scaled_C.transpose() * w);
  };
  double best = 0.0;
  auto probe = [&](const Vector& start) { best = std::max(best, power_run(apply, start)); };
  probe(Vector::Ones(m));
  Vector alternating(m);
  for (Index i = 0; i < m; ++i) alternating[i] = (i % 2 == 0) ? 1.0 : -1.0;
  probe(alternating);
  for (Index i = 0; i < std::min<Index>(m, 8); ++i) probe(Vector::Unit(m, i));
  return best;
}

}  // namespace

double estimate_lipschitz(const QpProblem& p, const Eigen::LLT<Matrix>& chol_H) {
  if (p.m() < 1) throw std::invalid_argument("estimate_lipschitz: requires m >= 1");
  const auto lmax = power_iteration_lmax(p.C, chol_H);
  if (!lmax) return std::numeric_limits<double>::min();
  return *lmax * kSafetyFactor;
}

Precomputed prologue(const QpProblem& p, const SolverOptions& opts) {
  Precomputed pre;
  pre.chol_H.compute(p.H);
  if (pre.chol_H.info() != Eigen::Success)
    throw FactorizationError("prologue: H is not positive definite");

  pre.v = -pre.chol_H.solve(p.g);
  const Index m = p.m();
  if (m == 0) {
    pre.M.resize(p.n(), 0);
    return pre;
  }

  pre.M = -pre.chol_H.solve(Matrix(p.C.transpose()));
  pre.L = estimate_lipschitz(p, pre.chol_H);
  pre.zero_dual_operator = (pre.L == std::numeric_limits<double>::min());

  if (opts.precondition && !pre.zero_dual_operator) {
    // Diagonal dual metric D_i = (C H^-1 C')_ii, floored at 1e-12 of the
    // largest entry, with the Lipschitz bound recomputed in that metric so
    // the per-row steps 1/(L_scaled D_i) stay a majorizer.
    const Matrix dual_hessian = Matrix(-(p.C * pre.M));
    Vector diag = dual_hessian.diagonal();
    const double floor = 1e-12 * diag.maxCoeff();
    pre.D = diag.cwiseMax(floor);

    Matrix scaled_C = p.C;
    for (Index i = 0; i < m; ++i) scaled_C.row(i) /= std::sqrt(pre.D[i]);
    const double lmax = scaled_lmax(scaled_C, pre.chol_H);
    pre.L_scaled = lmax > 0.0 ? lmax * kSafetyFactor : 1.0;
  }
  return pre;
}

DualState make_initial_state(const QpProblem& p, const std::optional<Vector>& lambda0) {
  DualState s;
  const Index m = p.m();
  if (lambda0) {
    if (lambda0->size() != m) throw DimensionError("warm start duals have wrong length");
    s.lambda = project_nonneg(*lambda0);
  } else {
    s.lambda = Vector::Zero(m);
  }
  s.y = s.lambda;
  s.t = 1.0;
  s.k = 0;
  s.z = Vector::Zero(p.n());
  s.r = Vector::Zero(m);
  return s;
}

void iterate_once(const Precomputed& pre, const QpProblem& p, DualState& s,
                  const Backend& backend) {
  const Index m = p.m();
  if (m == 0) {
    s.z = pre.v;
    s.k += 1;
    return;
  }

  s.z = axpy(1.0, matvec(pre.M, s.y, backend), pre.v);
  if (!s.z.allFinite()) throw DivergenceError(s.k, "primal iterate not finite");

  s.r = axpy(-1.0, p.d, matvec(p.C, s.z, backend));
  if (!s.r.allFinite()) throw DivergenceError(s.k, "constraint residual not finite");

  Vector lambda_next(m);
  if (pre.D.size() > 0) {
    for (Index i = 0; i < m; ++i) {
      const double cand = s.y[i] + s.r[i] / (pre.L_scaled * pre.D[i]);
      lambda_next[i] = cand < 0.0 ? 0.0 : cand;
    }
  } else {
    const double inv_L = 1.0 / pre.L;
    for (Index i = 0; i < m; ++i) {
      const double cand = s.y[i] + s.r[i] * inv_L;
      lambda_next[i] = cand < 0.0 ? 0.0 : cand;
    }
  }
  if (!lambda_next.allFinite()) throw DivergenceError(s.k, "dual iterate not finite");

  const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * s.t * s.t));
  const double beta = (s.t - 1.0) / t_next;
  s.y = lambda_next + beta * (lambda_next - s.lambda);
  s.lambda.swap(lambda_next);
  s.t = t_next;
  s.k += 1;
}

Solution epilogue(const Precomputed& pre, const QpProblem& p, const DualState& s,
                  const Backend& backend) {
  const Index m = p.m();
  Solution out;
  out.iters = s.k;
  out.lambda = s.lambda;

  out.z = m > 0 ? axpy(1.0, matvec(pre.M, s.lambda, backend), pre.v) : pre.v;

  const Vector hz = matvec(p.H, out.z, backend);
  out.objective = 0.5 * dot(out.z, hz, backend) + dot(p.g, out.z, backend);

  if (m > 0) {
    const Vector r = axpy(-1.0, p.d, matvec(p.C, out.z, backend));
    out.primal_residual = std::max(0.0, r.maxCoeff());
    const double dual_objective = out.objective + dot(s.lambda, r, backend);
    out.gap = std::abs(out.objective - dual_objective);
  }
  return out;
}

Solution solve(const QpProblem& p, const SolverOptions& opts,
               const std::optional<Vector>& warm_lambda) {
  if (opts.max_iters < 1) throw std::invalid_argument("solve: max_iters must be >= 1");
  if (opts.tol < 0.0) throw std::invalid_argument("solve: tol must be >= 0");
  if (const auto rep = validate_qp(p); !rep.ok) {
    std::string msg = "solve: invalid problem:";
    for (const auto& v : rep.violations) msg += " " + v + ";";
    throw std::invalid_argument(msg);
  }

  const Precomputed pre = prologue(p, opts);
  DualState s = make_initial_state(p, warm_lambda);

  if (p.m() == 0) {
    s.z = pre.v;
    return epilogue(pre, p, s, opts.backend);
  }

  for (int iter = 0; iter < opts.max_iters; ++iter) {
    iterate_once(pre, p, s, opts.backend);
    if (opts.tol > 0.0) {
      // Convergence is judged at the dual iterate itself, the same point
      // the epilogue will report.
      const Vector z = axpy(1.0, matvec(pre.M, s.lambda, opts.backend), pre.v);
      const Vector r = axpy(-1.0, p.d, matvec(p.C, z, opts.backend));
      const double residual = std::max(0.0, r.maxCoeff());
      const double gap = std::abs(dot(s.lambda, r, opts.backend));
      if (gap <= opts.tol && residual <= opts.tol) break;
    }
  }
  return epilogue(pre, p, s, opts.backend);
}

}  // namespace dfgm
