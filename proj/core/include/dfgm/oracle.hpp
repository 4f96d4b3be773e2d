#pragma once

#include <dfgm/qp_problem.hpp>
#include <dfgm/types.hpp>

#include <vector>

namespace dfgm {

struct OracleSolution {
  Vector z;
  Vector lambda;                  // full m-vector, zero off the active set
  std::vector<Index> active_set;  // sorted constraint indices
  bool optimal = false;
  double objective = 0.0;
};

struct KktReport {
  double stationarity = 0.0;    // ||Hz + g + C'lambda||_inf
  double primal = 0.0;          // max(0, max_i (Cz - d)_i)
  double dual = 0.0;            // max(0, max_i -lambda_i)
  double complementarity = 0.0; // max_i |lambda_i (Cz - d)_i|
  bool pass = false;
};

/// Exact small-scale solve by enumerating every candidate active set S and
/// solving the equality-constrained KKT system
///   [H  C_S'] [z ]   [-g ]
///   [C_S  0 ] [mu] = [d_S]
/// Candidates need mu >= -1e-10 and Cz <= d + 1e-9; the feasible candidate
/// with the smallest objective wins, ties going to the smaller then
/// lexicographically earlier subset. Singular KKT subsets are skipped.
/// Refuses problems with m > 20 (the enumeration is 2^m).
OracleSolution solve_enumerate(const QpProblem& p);

/// KKT residuals of a candidate primal/dual pair; pass iff all four are
/// within tol.
KktReport check_kkt(const QpProblem& p, const Vector& z, const Vector& lambda, double tol);

}  // namespace dfgm
