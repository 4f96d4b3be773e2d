#pragma once

#include <dfgm/types.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dfgm {

/// A strictly convex inequality-constrained QP:
///
///   minimize    1/2 z'Hz + g'z
///   subject to  Cz <= d
///
/// H must be symmetric positive definite. m may be zero (no constraints),
/// in which case C is 0 x n and d is empty.
struct QpProblem {
  Matrix H;  // n x n
  Vector g;  // n
  Matrix C;  // m x n
  Vector d;  // m

  Index n() const { return H.rows(); }
  Index m() const { return C.rows(); }
};

struct ValidationReport {
  bool ok = true;
  std::vector<std::string> violations;
};

/// Linear time-invariant model with input box bounds, the raw material for a
/// condensed MPC QP. Q weighs the predicted states x_1..x_N, R the inputs.
struct MpcModel {
  Matrix A;       // nx x nx
  Matrix B;       // nx x nu
  Matrix Q;       // nx x nx, symmetric PSD
  Matrix R;       // nu x nu, symmetric PD
  Index horizon;  // N >= 1
  Vector u_min;   // nu
  Vector u_max;   // nu
  Vector x0;      // nx
};

/// Checks every QpProblem invariant; violations are reported, never thrown.
/// Symmetry tolerance is max|H_ij - H_ji| <= 1e-12 * max|H_ij| (fixed).
ValidationReport validate_qp(const QpProblem& p);

/// Builds the condensed QP over the stacked input sequence u_0..u_{N-1}:
///   H = G'QbarG + Rbar,  g = G'Qbar Phi x0
/// where Phi stacks A, A^2, ..., A^N, G is the block-lower-triangular
/// impulse map with block (i,j) = A^(i-j) B for i >= j, and Qbar/Rbar are
/// N-fold block diagonals of Q and R. Input bounds become 2*N*nu rows
/// [I; -I] u <= [u_max...; -u_min...].
///
/// Throws std::invalid_argument on model invariant violations and
/// FactorizationError if the assembled H is not positive definite.
QpProblem condense_mpc(const MpcModel& mdl);

/// Parses the problem-file text format (see save_qp for the layout). Tokens
/// are whitespace-separated and '#' comments run to end of line; errors
/// throw ParseError with the offending line number.
QpProblem load_qp(std::string_view text);

/// Serializes a problem as:
///   QP <n> <m>
///   H:
///   <n rows of n numbers>
///   g:
///   <n numbers>
///   C:            (only when m > 0)
///   <m rows of n numbers>
///   d:
///   <m numbers>
/// Numbers are shortest round-trip decimals, so load_qp(save_qp(p))
/// reproduces p exactly.
std::string save_qp(const QpProblem& p);

/// Reads and parses a problem file from disk.
QpProblem load_qp_file(const std::filesystem::path& path);

/// Formats a double as its shortest round-trip decimal.
std::string format_double(double value);

}  // namespace dfgm
