#pragma once

#include <dfgm/types.hpp>

#include <span>
#include <string>
#include <string_view>

namespace dfgm {

/// Matrix-vector kernel flavors. All four compute the same product; they
/// differ only in the order additions are performed and in how rows are
/// scheduled:
///   naive    - per row, left-to-right sequential accumulation
///   tree     - per row, products combined by balanced pairwise reduction
///   blocked  - rows walked in contiguous blocks, each row reduced as tree
///   parallel - row blocks distributed over worker threads, each row as tree
///
/// Per-row arithmetic for tree/blocked/parallel is identical, so those three
/// agree bitwise with each other for any block size or worker count.
enum class BackendKind { naive, tree, blocked, parallel };

struct Backend {
  BackendKind kind = BackendKind::naive;
  Index block_rows = 8;  // blocked/parallel; clamped to the row count
  int workers = 4;       // parallel only

  static Backend naive() { return {BackendKind::naive, 8, 1}; }
  static Backend tree() { return {BackendKind::tree, 8, 1}; }
  static Backend blocked(Index block_rows = 8) { return {BackendKind::blocked, block_rows, 1}; }
  static Backend parallel(int workers = 4, Index block_rows = 8) {
    return {BackendKind::parallel, block_rows, workers};
  }

  /// Short display name, e.g. "naive" or "parallel:4".
  std::string name() const;
};

/// Parses a backend spec of the form "naive", "tree", "blocked[:block_rows]"
/// or "parallel[:workers]". Throws std::invalid_argument on anything else.
Backend parse_backend(std::string_view spec);

/// A * x under the given backend. Offsets are the caller's business.
/// q == 0 yields a zero vector. Dimension mismatch throws DimensionError.
Vector matvec(const Matrix& A, const Vector& x, const Backend& backend);

/// Balanced pairwise sum. An odd tail is carried up one level unchanged, so
/// the reduction depth is ceil(log2 k) and integer inputs with partial sums
/// below 2^53 sum exactly. k == 0 yields 0.
double tree_sum(std::span<const double> v);

/// Elementwise max(0, v_i). NaN propagates, -inf clamps to 0.
Vector project_nonneg(const Vector& v);

/// Inner product using the backend's row-reduction order: sequential for
/// naive, pairwise tree otherwise.
double dot(const Vector& a, const Vector& b, const Backend& backend = Backend::naive());

/// y + alpha * x, elementwise.
Vector axpy(double alpha, const Vector& x, const Vector& y);

}  // namespace dfgm
