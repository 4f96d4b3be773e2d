#include <dfgm/oracle.hpp>

#include <Eigen/Dense>

#include <cmath>

namespace dfgm {

namespace {

constexpr double kDualSlack = 1e-10;    // accept mu >= -kDualSlack
constexpr double kPrimalSlack = 1e-9;   // accept Cz <= d + kPrimalSlack

// Walks index combinations of a fixed size in lexicographic order.
bool next_combination(std::vector<Index>& idx, Index m) {
  const Index s = static_cast<Index>(idx.size());
  for (Index i = s - 1; i >= 0; --i) {
    if (idx[static_cast<size_t>(i)] < m - (s - i)) {
      ++idx[static_cast<size_t>(i)];
      for (Index j = i + 1; j < s; ++j)
        idx[static_cast<size_t>(j)] = idx[static_cast<size_t>(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

}  // namespace

OracleSolution solve_enumerate(const QpProblem& p) {
  const Index n = p.n();
  const Index m = p.m();
  if (m > 20) throw std::invalid_argument("solve_enumerate: refusing m > 20");

  OracleSolution best;
  bool have_best = false;
  double best_obj = 0.0;

  auto consider = [&](const std::vector<Index>& subset) {
    const Index s = static_cast<Index>(subset.size());
    Matrix kkt = Matrix::Zero(n + s, n + s);
    kkt.topLeftCorner(n, n) = p.H;
    for (Index r = 0; r < s; ++r) {
      kkt.block(0, n + r, n, 1) = p.C.row(subset[static_cast<size_t>(r)]).transpose();
      kkt.block(n + r, 0, 1, n) = p.C.row(subset[static_cast<size_t>(r)]);
    }
    Vector rhs(n + s);
    rhs.head(n) = -p.g;
    for (Index r = 0; r < s; ++r) rhs[n + r] = p.d[subset[static_cast<size_t>(r)]];

    Eigen::FullPivLU<Matrix> lu(kkt);
    if (!lu.isInvertible()) return;  // degenerate subset, covered elsewhere
    const Vector sol = lu.solve(rhs);
    const Vector z = sol.head(n);
    const Vector mu = sol.tail(s);

    if ((mu.array() < -kDualSlack).any()) return;
    if (m > 0 && ((p.C * z - p.d).array() > kPrimalSlack).any()) return;

    const double obj = 0.5 * z.dot(p.H * z) + p.g.dot(z);
    // Subsets are visited smallest-first then lexicographically, so a
    // strict improvement test implements the tie-break for free.
    const double tie = 1e-12 * (1.0 + std::abs(have_best ? best_obj : obj));
    if (have_best && obj >= best_obj - tie) return;

    best_obj = obj;
    have_best = true;
    best.z = z;
    best.lambda = Vector::Zero(m);
    for (Index r = 0; r < s; ++r)
      best.lambda[subset[static_cast<size_t>(r)]] = std::max(0.0, mu[r]);
    best.active_set.assign(subset.begin(), subset.end());
    best.objective = obj;
    best.optimal = true;
  };

  for (Index size = 0; size <= m; ++size) {
    std::vector<Index> subset(static_cast<size_t>(size));
    for (Index i = 0; i < size; ++i) subset[static_cast<size_t>(i)] = i;
    if (size == 0) {
      consider(subset);
      continue;
    }
    do {
      consider(subset);
    } while (next_combination(subset, m));
  }

  if (!have_best) {
    best.z = Vector::Zero(n);
    best.lambda = Vector::Zero(m);
    best.optimal = false;
  }
  return best;
}

KktReport check_kkt(const QpProblem& p, const Vector& z, const Vector& lambda, double tol) {
  if (z.size() != p.n() || lambda.size() != p.m())
    throw DimensionError("check_kkt: dimension mismatch");
  KktReport rep;
  const Vector stat = p.H * z + p.g + p.C.transpose() * lambda;
  rep.stationarity = stat.size() > 0 ? stat.cwiseAbs().maxCoeff() : 0.0;
  if (p.m() > 0) {
    const Vector slack = p.C * z - p.d;
    rep.primal = std::max(0.0, slack.maxCoeff());
    rep.dual = std::max(0.0, (-lambda).maxCoeff());
    rep.complementarity = (lambda.array() * slack.array()).abs().maxCoeff();
  }
  rep.pass = rep.stationarity <= tol && rep.primal <= tol && rep.dual <= tol &&
             rep.complementarity <= tol;
  return rep;
}

}  // namespace dfgm
