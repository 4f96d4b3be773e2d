#pragma once

#include <dfgm/kernels.hpp>
#include <dfgm/qp_problem.hpp>
#include <dfgm/types.hpp>

#include <Eigen/Cholesky>

#include <optional>

namespace dfgm {

/// Prologue products. M and v map duals straight to the primal minimizer of
/// the Lagrangian, z(lambda) = M lambda + v; L bounds the dual gradient's
/// Lipschitz constant lambda_max(C H^-1 C').
struct Precomputed {
  Eigen::LLT<Matrix> chol_H;
  Matrix M;             // n x m, -H^-1 C'
  Vector v;             // n,     -H^-1 g
  double L = 0.0;       // 1.01 * power-iteration estimate; unused when m == 0
  Vector D;             // m, diagonal dual metric; empty unless preconditioning
  double L_scaled = 0.0;  // Lipschitz bound in the D-scaled metric
  bool zero_dual_operator = false;  // C H^-1 C' was identically zero
};

struct SolverOptions {
  int max_iters = 500;
  double tol = 0.0;  // 0 = fixed-iteration mode
  Backend backend = Backend::naive();
  bool precondition = false;
};

/// State carried across main-loop cycles.
struct DualState {
  Vector lambda;  // dual iterate, >= 0
  Vector y;       // momentum-extrapolated dual point
  double t = 1.0; // momentum scalar
  int k = 0;      // iteration counter
  Vector z;       // scratch: current primal
  Vector r;       // scratch: constraint residual Cz - d
};

struct Solution {
  Vector z;
  Vector lambda;
  int iters = 0;
  double primal_residual = 0.0;  // max(0, max_i (Cz - d)_i)
  double gap = 0.0;              // |primal objective - dual objective|
  double objective = 0.0;        // 1/2 z'Hz + g'z
};

/// Power iteration on w -> C H^-1 C' w from the all-ones start vector,
/// stopping when the Rayleigh estimate moves by < 1e-6 relative or after
/// 500 steps; the result carries a 1.01 safety factor. If the ones vector
/// happens to be annihilated (opposing constraint rows do this), canonical
/// basis vectors are probed in order; if every probe dies the operator is
/// zero and the smallest positive double is returned as a step guard.
/// Requires m >= 1.
double estimate_lipschitz(const QpProblem& p, const Eigen::LLT<Matrix>& chol_H);

/// Factorizes H and forms M, v, L (and the diagonal metric D with its own
/// Lipschitz bound when opts.precondition). Throws FactorizationError if H
/// is not positive definite.
Precomputed prologue(const QpProblem& p, const SolverOptions& opts);

/// lambda = y = 0 (or the warm-start duals projected nonnegative), t = 1.
DualState make_initial_state(const QpProblem& p, const std::optional<Vector>& lambda0 = {});

/// One main-loop cycle, in order: z = M y + v; r = C z - d; dual ascent step
/// projected to >= 0; momentum update. Both matvecs go through the backend.
/// Throws DivergenceError when z, r or the projected dual goes non-finite.
/// With m == 0 this only sets z = v and bumps the counter.
void iterate_once(const Precomputed& pre, const QpProblem& p, DualState& s, const Backend& backend);

/// Primal recovery and diagnostics from the final lambda (not the
/// extrapolated y): z = M lambda + v, residual, objective and duality gap
/// with the dual objective evaluated as the Lagrangian at z(lambda).
Solution epilogue(const Precomputed& pre, const QpProblem& p, const DualState& s,
                  const Backend& backend = Backend::naive());

/// Prologue, then exactly max_iters cycles (tol = 0) or until gap and
/// residual both reach tol (tol > 0), then epilogue. Cold start unless
/// warm-start duals are supplied.
Solution solve(const QpProblem& p, const SolverOptions& opts = {},
               const std::optional<Vector>& warm_lambda = {});

}  // namespace dfgm
