#include <doctest.h>

#include <dfgm/oracle.hpp>
#include <dfgm/solver.hpp>

#include "test_util.hpp"

#include <Eigen/Eigenvalues>

#include <cstring>
#include <limits>
#include <thread>

using namespace dfgm;
using dfgm::testing::make_random_qp;

namespace {

QpProblem one_dim_problem() {
  QpProblem p;
  p.H = Matrix::Constant(1, 1, 2.0);
  p.g = Vector::Constant(1, -2.0);
  p.C = Matrix::Constant(1, 1, 1.0);
  p.d = Vector::Constant(1, 0.5);
  return p;
}

QpProblem two_dim_problem() {
  QpProblem p;
  p.H = Matrix::Identity(2, 2);
  p.g.resize(2);
  p.g << -3, -4;
  p.C.resize(1, 2);
  p.C << 1, 1;
  p.d = Vector::Constant(1, 1.0);
  return p;
}

double lmax_dense(const QpProblem& p, const Precomputed& pre) {
  Matrix a = Matrix(-(p.C * pre.M));
  a = Matrix(0.5 * (a + a.transpose()));
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  return es.eigenvalues().maxCoeff();
}

bool bitwise_equal(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<size_t>(a.size())) == 0;
}

}  // namespace

TEST_CASE("prologue products for the 1-D problem") {
  const QpProblem p = one_dim_problem();
  const Precomputed pre = prologue(p, {});
  CHECK(pre.v[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(pre.M(0, 0) == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(pre.L == doctest::Approx(0.505).epsilon(1e-12));
  CHECK(!pre.zero_dual_operator);
}

TEST_CASE("prologue with identity cost and no constraints") {
  QpProblem p;
  p.H = Matrix::Identity(2, 2);
  p.g.resize(2);
  p.g << -1, -2;
  p.C.resize(0, 2);
  p.d.resize(0);
  const Precomputed pre = prologue(p, {});
  CHECK(pre.v[0] == doctest::Approx(1.0));
  CHECK(pre.v[1] == doctest::Approx(2.0));
  CHECK(pre.M.cols() == 0);
}

TEST_CASE("prologue dual-to-primal map satisfies its defining equation") {
  std::mt19937_64 rng(211);
  const Index n = 6, m = 4;
  QpProblem p;
  p.H = dfgm::testing::random_matrix(rng, n, n);
  p.H = Matrix(p.H.transpose() * p.H);
  p.H = Matrix(0.5 * (p.H + p.H.transpose()));
  p.H += Matrix::Identity(n, n);
  p.g = dfgm::testing::random_vector(rng, n);
  p.C = dfgm::testing::random_matrix(rng, m, n);
  p.d = dfgm::testing::random_vector(rng, m);

  const Precomputed pre = prologue(p, {});
  const Matrix residual = Matrix(p.H * (-pre.M) - p.C.transpose());
  CHECK(residual.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("prologue rejects indefinite cost matrices") {
  QpProblem p;
  p.H = Matrix::Constant(1, 1, 0.0);
  p.g = Vector::Zero(1);
  p.C.resize(0, 1);
  p.d.resize(0);
  CHECK_THROWS_AS(prologue(p, {}), FactorizationError);
}

TEST_CASE("estimate_lipschitz on known spectra") {
  // 1x1 operator: C H^-1 C' = 0.5, times the 1.01 safety factor.
  const QpProblem p1 = one_dim_problem();
  Eigen::LLT<Matrix> llt1(p1.H);
  CHECK(estimate_lipschitz(p1, llt1) == doctest::Approx(0.505).epsilon(1e-12));

  // diag(1, 4) spectrum.
  QpProblem p2;
  p2.H = Matrix::Identity(2, 2);
  p2.g = Vector::Zero(2);
  p2.C.resize(2, 2);
  p2.C << 1, 0, 0, 2;
  p2.d = Vector::Zero(2);
  Eigen::LLT<Matrix> llt2(p2.H);
  const double L = estimate_lipschitz(p2, llt2);
  CHECK(L >= 4.0);
  CHECK(L <= 4.04);
}

TEST_CASE("estimate_lipschitz brackets the dense eigensolver result") {
  std::mt19937_64 rng(223);
  const Index n = 6, m = 8;
  QpProblem p;
  p.H = dfgm::testing::random_matrix(rng, n, n);
  p.H = Matrix(p.H.transpose() * p.H);
  p.H = Matrix(0.5 * (p.H + p.H.transpose()));
  p.H += Matrix::Identity(n, n);
  p.g = Vector::Zero(n);
  p.C = dfgm::testing::random_matrix(rng, m, n);
  p.d = Vector::Zero(m);

  const Precomputed pre = prologue(p, {});
  const double truth = lmax_dense(p, pre);
  CHECK(pre.L >= truth);
  CHECK(pre.L <= 1.02 * truth);
}

TEST_CASE("estimate_lipschitz survives paired opposing rows") {
  // C = [c; -c] annihilates the all-ones start exactly; the fallback must
  // still find the true top eigenvalue.
  QpProblem p;
  p.H = Matrix::Identity(2, 2);
  p.g = Vector::Zero(2);
  p.C.resize(2, 2);
  p.C << 1, 2, -1, -2;
  p.d = Vector::Ones(2);
  Eigen::LLT<Matrix> llt(p.H);
  const double L = estimate_lipschitz(p, llt);
  // lambda_max(C C') = 2 * (1 + 4) = 10.
  CHECK(L >= 10.0);
  CHECK(L <= 10.2);
}

TEST_CASE("estimate_lipschitz flags the zero operator") {
  QpProblem p;
  p.H = Matrix::Identity(1, 1);
  p.g = Vector::Zero(1);
  p.C = Matrix::Zero(1, 1);
  p.d = Vector::Ones(1);
  Eigen::LLT<Matrix> llt(p.H);
  CHECK(estimate_lipschitz(p, llt) == std::numeric_limits<double>::min());

  const Precomputed pre = prologue(p, {});
  CHECK(pre.zero_dual_operator);
}

TEST_CASE("iterate_once reproduces the hand-computed first cycle") {
  const QpProblem p = one_dim_problem();
  // Hand-built prologue with L = 0.5 exactly (no safety factor) so the
  // arithmetic is the textbook one.
  Precomputed pre;
  pre.chol_H.compute(p.H);
  pre.M = Matrix::Constant(1, 1, -0.5);
  pre.v = Vector::Constant(1, 1.0);
  pre.L = 0.5;

  DualState s = make_initial_state(p);
  iterate_once(pre, p, s, Backend::naive());
  CHECK(s.z[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.r[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s.lambda[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s.k == 1);

  iterate_once(pre, p, s, Backend::naive());
  CHECK(s.z[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("iterate_once with no constraints just recovers v") {
  QpProblem p;
  p.H = Matrix::Identity(2, 2);
  p.g.resize(2);
  p.g << -1, -2;
  p.C.resize(0, 2);
  p.d.resize(0);
  const Precomputed pre = prologue(p, {});
  DualState s = make_initial_state(p);
  iterate_once(pre, p, s, Backend::tree());
  CHECK(s.z == pre.v);
  CHECK(s.k == 1);
}

TEST_CASE("iterate_once agrees across backends") {
  const QpProblem p = make_random_qp(3, 6, 4);
  REQUIRE(p.m() >= 1);
  const Precomputed pre = prologue(p, {});

  auto one_step = [&](const Backend& b) {
    DualState s = make_initial_state(p);
    iterate_once(pre, p, s, b);
    return s;
  };
  const DualState tree = one_step(Backend::tree());
  const DualState blocked = one_step(Backend::blocked(2));
  const DualState parallel = one_step(Backend::parallel(4, 1));
  CHECK(bitwise_equal(tree.lambda, blocked.lambda));
  CHECK(bitwise_equal(tree.lambda, parallel.lambda));
  CHECK(bitwise_equal(tree.z, parallel.z));

  const DualState naive = one_step(Backend::naive());
  const double scale = 1.0 + tree.lambda.cwiseAbs().maxCoeff();
  CHECK((naive.lambda - tree.lambda).cwiseAbs().maxCoeff() <= 1e-12 * scale);
}

TEST_CASE("solve reaches the 1-D analytic optimum") {
  const Solution sol = solve(one_dim_problem());
  CHECK(sol.iters == 500);
  CHECK(std::abs(sol.z[0] - 0.5) <= 1e-9);
  CHECK(std::abs(sol.lambda[0] - 1.0) <= 1e-9);
  CHECK(sol.primal_residual <= 1e-9);
  CHECK(sol.gap <= 1e-9);
}

TEST_CASE("solve reaches the 2-D single-constraint optimum") {
  const Solution sol = solve(two_dim_problem());
  CHECK(std::abs(sol.z[0] - 0.0) <= 1e-6);
  CHECK(std::abs(sol.z[1] - 1.0) <= 1e-6);
  CHECK(std::abs(sol.lambda[0] - 3.0) <= 1e-6);
}

TEST_CASE("solve with no constraints returns the unconstrained minimizer") {
  QpProblem p;
  p.H = Matrix::Identity(2, 2);
  p.g.resize(2);
  p.g << -1, -2;
  p.C.resize(0, 2);
  p.d.resize(0);
  const Solution sol = solve(p);
  const Precomputed pre = prologue(p, {});
  CHECK(sol.z == pre.v);
  CHECK(sol.gap == 0.0);
  CHECK(sol.primal_residual == 0.0);
  CHECK(sol.iters == 0);
}

TEST_CASE("fixed-budget contract") {
  SolverOptions opts;
  opts.max_iters = 137;
  const Solution sol = solve(one_dim_problem(), opts);
  CHECK(sol.iters == 137);

  for (unsigned seed = 0; seed < 10; ++seed) {
    const QpProblem p = make_random_qp(seed);
    const Solution s = solve(p);
    CHECK(s.iters == (p.m() > 0 ? 500 : 0));
  }
}

TEST_CASE("early stopping on tolerance") {
  SolverOptions opts;
  opts.tol = 1e-10;
  opts.max_iters = 5000;
  const Solution sol = solve(one_dim_problem(), opts);
  CHECK(sol.iters < 5000);
  CHECK(sol.gap <= 1e-10);
  CHECK(sol.primal_residual <= 1e-10);
}

TEST_CASE("solve matches the enumeration oracle on the random suite") {
  int checked = 0;
  for (unsigned seed = 0; seed < 30; ++seed) {
    const QpProblem p = make_random_qp(seed);
    const OracleSolution truth = solve_enumerate(p);
    REQUIRE(truth.optimal);

    SolverOptions opts;
    opts.max_iters = 5000;
    opts.precondition = (seed % 2 == 0);
    const Solution sol = solve(p, opts);

    const double scale = 1.0 + dfgm::testing::inf_norm(truth.z);
    CHECK_MESSAGE((sol.z - truth.z).cwiseAbs().maxCoeff() <= 1e-4 * scale, "seed ", seed,
                  " precondition=", opts.precondition);
    CHECK(check_kkt(p, sol.z, sol.lambda, 1e-3).pass);
    ++checked;
  }
  CHECK(checked == 30);
}

TEST_CASE("dual iterates stay nonnegative for every backend") {
  const QpProblem p = make_random_qp(11, 8, 6);
  REQUIRE(p.m() >= 1);
  const Precomputed pre = prologue(p, {});
  for (const Backend& b :
       {Backend::naive(), Backend::tree(), Backend::blocked(2), Backend::parallel(2, 2)}) {
    DualState s = make_initial_state(p);
    for (int k = 0; k < 100; ++k) {
      iterate_once(pre, p, s, b);
      CHECK((s.lambda.array() >= 0.0).all());
    }
  }
}

TEST_CASE("solve is bit-reproducible per backend") {
  const QpProblem p = make_random_qp(5, 10, 8);
  for (const Backend& b :
       {Backend::naive(), Backend::tree(), Backend::blocked(4), Backend::parallel(4, 2)}) {
    SolverOptions opts;
    opts.backend = b;
    const Solution a = solve(p, opts);
    const Solution c = solve(p, opts);
    CHECK(bitwise_equal(a.z, c.z));
    CHECK(bitwise_equal(a.lambda, c.lambda));
  }
}

TEST_CASE("backends land on the same solution") {
  for (unsigned seed = 0; seed < 10; ++seed) {
    const QpProblem p = make_random_qp(seed);
    SolverOptions opts;
    opts.backend = Backend::naive();
    const Solution ref = solve(p, opts);
    const double scale = 1.0 + ref.z.cwiseAbs().maxCoeff();
    for (const Backend& b : {Backend::tree(), Backend::blocked(3), Backend::parallel(2, 2)}) {
      opts.backend = b;
      const Solution other = solve(p, opts);
      CHECK((other.z - ref.z).cwiseAbs().maxCoeff() <= 1e-9 * scale);
    }
  }
}

TEST_CASE("residual trend is downward between iteration 50 and 500") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const QpProblem p = make_random_qp(seed);
    if (p.m() == 0) continue;
    SolverOptions opts;
    opts.max_iters = 50;
    const double res50 = solve(p, opts).primal_residual;
    opts.max_iters = 500;
    const double res500 = solve(p, opts).primal_residual;
    CHECK_MESSAGE(res500 <= res50, "seed ", seed, " res50=", res50, " res500=", res500);
  }
}

TEST_CASE("gradient step validity against a dense eigensolver") {
  for (unsigned seed = 0; seed < 20; ++seed) {
    const QpProblem p = make_random_qp(seed);
    if (p.m() == 0) continue;
    const Precomputed pre = prologue(p, {});
    CHECK(pre.L >= lmax_dense(p, pre));
  }
}

TEST_CASE("epilogue diagnostics at chosen dual points") {
  const QpProblem p = one_dim_problem();
  const Precomputed pre = prologue(p, {});

  DualState at_optimum = make_initial_state(p);
  at_optimum.lambda = Vector::Constant(1, 1.0);
  const Solution sol = epilogue(pre, p, at_optimum);
  CHECK(sol.z[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(sol.primal_residual == 0.0);
  CHECK(sol.gap <= 1e-15);

  DualState at_zero = make_initial_state(p);
  const Solution cold = epilogue(pre, p, at_zero);
  CHECK(cold.z[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cold.primal_residual == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(cold.objective == doctest::Approx(-1.0).epsilon(1e-15));
  // Lagrangian value at lambda = 0 equals the objective, so the reported
  // gap vanishes while the residual exposes the infeasibility.
  CHECK(cold.gap == 0.0);
}

TEST_CASE("zero constraint rows are guarded, infeasible ones diverge loudly") {
  QpProblem feasible;
  feasible.H = Matrix::Constant(1, 1, 2.0);
  feasible.g = Vector::Constant(1, -2.0);
  feasible.C = Matrix::Zero(1, 1);
  feasible.d = Vector::Constant(1, 1.0);  // 0*z <= 1 always holds
  const Solution ok = solve(feasible);
  CHECK(ok.z[0] == doctest::Approx(1.0));
  CHECK((ok.lambda.array() == 0.0).all());

  QpProblem infeasible = feasible;
  infeasible.d = Vector::Constant(1, -1.0);  // 0*z <= -1 never holds
  CHECK_THROWS_AS(solve(infeasible), DivergenceError);
}

TEST_CASE("warm start is accepted and projected") {
  const QpProblem p = two_dim_problem();
  const Vector warm = Vector::Constant(1, 3.0);  // the optimal dual
  SolverOptions opts;
  opts.max_iters = 50;
  const Solution sol = solve(p, opts, warm);
  CHECK(std::abs(sol.z[0]) <= 1e-9);
  CHECK(std::abs(sol.z[1] - 1.0) <= 1e-9);

  const Vector negative = Vector::Constant(1, -5.0);
  const Solution projected = solve(p, opts, negative);  // clamps to the cold start
  CHECK(std::abs(projected.z[1] - 1.0) <= 1e-6);
  CHECK_THROWS_AS(solve(p, opts, Vector::Zero(3)), DimensionError);
}

TEST_CASE("solve validates inputs") {
  QpProblem p = one_dim_problem();
  SolverOptions opts;
  opts.max_iters = 0;
  CHECK_THROWS_AS(solve(p, opts), std::invalid_argument);
  opts = {};
  opts.tol = -1.0;
  CHECK_THROWS_AS(solve(p, opts), std::invalid_argument);
  p.H(0, 0) = 0.0;
  CHECK_THROWS_AS(solve(p, {}), std::invalid_argument);
}

TEST_CASE("independent solves run concurrently and agree") {
  const QpProblem p = make_random_qp(2, 10, 8);
  const Solution ref = solve(p);
  std::vector<Solution> results(4);
  std::vector<std::thread> threads;
  for (int i = 0; i < 4; ++i)
    threads.emplace_back([&, i] { results[static_cast<size_t>(i)] = solve(p); });
  for (auto& t : threads) t.join();
  for (const auto& sol : results) {
    CHECK(bitwise_equal(sol.z, ref.z));
    CHECK(bitwise_equal(sol.lambda, ref.lambda));
  }
}
