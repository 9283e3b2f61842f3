#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "cplan/errors.hpp"
#include "cplan/solver.hpp"

using namespace cplan;

namespace {

// Independent 1-D bisection on a decreasing function.
double bisect(double lo, double hi, const std::function<double(double)>& f) {
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CMat random_hermitian_psd(std::mt19937_64& rng, int n, int rank) {
  std::normal_distribution<double> nd;
  CMat g(n, rank);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < rank; ++j) g(i, j) = {nd(rng), nd(rng)};
  return g * g.adjoint();
}

}  // namespace

TEST_CASE("lp corner") {
  ConvexProgram p;
  int x = p.add_var("x", 0.0, 1.0);
  p.maximize(Affine::var(x));
  Solution s = solve(p);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(s.x[x] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("log minus quadratic matches stationarity oracle") {
  ConvexProgram p;
  int x = p.add_var("x", 0.0);
  p.maximize(Affine(0.0));
  p.add_objective_penalty(Term::neg_log(1.0, Affine::var(x) + 1.0));
  p.add_objective_penalty(Term::sq_sum(0.5, {Affine::var(x)}));
  Vec x0(1);
  x0 << 0.3;
  SolverOptions opt;
  opt.gap_tol = 1e-11;  // argmin accuracy scales with the barrier gap
  Solution s = solve(p, x0, opt);
  double oracle = bisect(0.0, 5.0, [](double v) { return 1.0 / (1.0 + v) - v; });
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.x[x] - oracle) < 1e-8);
  CHECK(std::abs(oracle - (std::sqrt(5.0) - 1.0) / 2.0) < 1e-12);
}

TEST_CASE("trace of 2x2 hermitian with unit diagonal bound") {
  ConvexProgram p;
  HermitianBlock w = p.add_hermitian_psd("W", 2);
  for (int l = 0; l < 2; ++l) p.add_le("diag", Affine::var(w.diag(l)) - 1.0);
  p.maximize(w.trace_with(CMat::Identity(2, 2)));
  Vec x0 = Vec::Zero(p.num_vars());
  x0[w.diag(0)] = x0[w.diag(1)] = 0.5;
  Solution s = solve(p, x0);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.objective - 2.0) < 1e-6);
  CHECK(p.max_violation(s.x) <= 1e-8);
}

TEST_CASE("socp: maximize x+y on the unit disk") {
  ConvexProgram p;
  int x = p.add_var("x"), y = p.add_var("y");
  p.add_soc("disk", {Affine::var(x), Affine::var(y)}, Affine(1.0));
  p.maximize(Affine::var(x) + Affine::var(y));
  Solution s = solve(p);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.objective - std::sqrt(2.0)) < 1e-6);
}

TEST_CASE("qp with equality: closest point on a line") {
  // maximize -(x-2)^2 - (y-1)^2 s.t. x + y == 1 -> (1, 0), objective -2
  ConvexProgram p;
  int x = p.add_var("x"), y = p.add_var("y");
  p.add_objective_penalty(Term::sq_sum(1.0, {Affine::var(x) - 2.0, Affine::var(y) - 1.0}));
  p.add_eq("line", Affine::var(x) + Affine::var(y) - 1.0);
  Solution s = solve(p);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.x[x] - 1.0) < 1e-6);
  CHECK(std::abs(s.x[y]) < 1e-6);
  CHECK(std::abs(s.objective + 2.0) < 1e-6);
}

TEST_CASE("phase I finds an interior point and detects infeasibility") {
  ConvexProgram p;
  int x = p.add_var("x", 2.0, 3.0);
  p.maximize(Affine::var(x, -1.0));
  Solution s = solve(p);  // start 0 is infeasible
  CHECK(s.used_phase1);
  CHECK(s.status == SolveStatus::Optimal);
  CHECK(std::abs(s.x[x] - 2.0) < 1e-6);

  ConvexProgram q;
  int z = q.add_var("z", 1.0, 0.0);
  q.maximize(Affine::var(z));
  Solution t = solve(q);
  CHECK(t.status == SolveStatus::Infeasible);
}

TEST_CASE("radial power-exp constraint") {
  // maximize x s.t. x^2 exp(0.1 |x|) <= 4 -> root of r^2 e^{0.1 r} = 4
  ConvexProgram p;
  int x = p.add_var("x");
  ConvexFunc g;
  g.lin = Affine(-4.0);
  g.terms.push_back(Term::radial(1.0, {Affine::var(x)}, 2.0, 0.1));
  p.add_le("radial", g);
  p.maximize(Affine::var(x));
  Solution s = solve(p);
  double oracle = bisect(0.0, 3.0, [](double r) { return 4.0 - r * r * std::exp(0.1 * r); });
  CHECK(std::abs(s.x[x] - oracle) < 1e-6);
}

TEST_CASE("barrier stages are monotone and solves are deterministic") {
  ConvexProgram p;
  int a = p.add_var("a", 0.0), b = p.add_var("b", 0.0);
  p.add_le("budget", Affine::var(a) + Affine::var(b) - 3.0);
  p.add_objective_penalty(Term::neg_log(1.0, Affine::var(a) + 1.0));
  p.add_objective_penalty(Term::neg_log(2.0, Affine::var(b) + 0.5));
  Vec x0(2);
  x0 << 0.5, 0.5;
  Solution s1 = solve(p, x0), s2 = solve(p, x0);
  CHECK(s1.iterations == s2.iterations);
  CHECK(s1.objective == s2.objective);
  for (size_t i = 1; i < s1.stage_objectives.size(); ++i)
    CHECK(s1.stage_objectives[i] >= s1.stage_objectives[i - 1] - 1e-9);
}

TEST_CASE("curvature is checked at construction") {
  CHECK_THROWS_AS(Term::neg_log(-1.0, Affine(1.0)), CurvatureError);
  CHECK_THROWS_AS(Term::power(1.0, Affine(1.0), 0.5), CurvatureError);
  ConvexProgram p;
  Mat bad(2, 2);
  bad << 1, 2, 0, 1;
  CHECK_THROWS_AS(p.add_lmi("bad", bad, {}), CurvatureError);
}

TEST_CASE("dump is stable") {
  ConvexProgram p;
  int x = p.add_var("x", 0.0, 1.0);
  p.maximize(Affine::var(x));
  CHECK(p.dump() == p.dump());
  CHECK(p.dump().find("le x>=lb") != std::string::npos);
}

TEST_CASE("smallest eigenpairs") {
  std::mt19937_64 rng(3);
  SUBCASE("identity") {
    EigPairs e = smallest_eigpairs(CMat::Identity(3, 3), 2);
    CHECK(std::abs(e.values[0] - 1.0) < 1e-12);
    CHECK(std::abs(e.values[1] - 1.0) < 1e-12);
    CHECK((e.vectors.adjoint() * e.vectors - CMat::Identity(2, 2)).norm() < 1e-12);
  }
  SUBCASE("rank one has L-1 zero eigenvalues") {
    CMat w = random_hermitian_psd(rng, 5, 1);
    EigPairs e = smallest_eigpairs(w, 4);
    CHECK(e.values.cwiseAbs().maxCoeff() <= 1e-10 * w.norm());
  }
  SUBCASE("reconstruction") {
    CMat w = random_hermitian_psd(rng, 6, 6);
    EigPairs e = smallest_eigpairs(w, 6);
    CMat rec = e.vectors * e.values.cast<std::complex<double>>().asDiagonal() * e.vectors.adjoint();
    CHECK((rec - w).norm() <= 1e-8 * w.norm());
    CHECK((w * e.vectors - e.vectors * e.values.cast<std::complex<double>>().asDiagonal()).norm() <=
          1e-8 * w.norm());
  }
  SUBCASE("non-hermitian input rejected") {
    CMat w = CMat::Zero(2, 2);
    w(0, 1) = 1.0;
    CHECK_THROWS_AS(smallest_eigpairs(w, 1), ParameterError);
  }
}

TEST_CASE("rank one extraction") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  CVec u(4);
  for (int i = 0; i < 4; ++i) u[i] = {nd(rng), nd(rng)};
  RankOneResult r = rank_one_extract(u * u.adjoint());
  CHECK(r.residual < 1e-9);
  CHECK(std::abs(std::abs(u.dot(r.u)) - u.norm() * r.u.norm()) < 1e-9 * u.squaredNorm());
  RankOneResult d = rank_one_extract(CMat::Identity(2, 2));
  CHECK(std::abs(d.residual - 1.0 / std::sqrt(2.0)) < 1e-12);
}
