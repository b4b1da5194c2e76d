#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lpcore/error.hpp"
#include "lpcore/linalg.hpp"
#include "lpcore/solver.hpp"
#include "oracles.hpp"

using namespace lpcore;

namespace {

double Obj(const DenseMatrix& a, const DenseVector& b, const DenseVector& x, double p) {
  return oracle::NaivePNorm(a * x - b, p);
}

}  // namespace

TEST_CASE("two-row symmetric examples") {
  DenseMatrix a(2, 1);
  a << 1, 1;
  DenseVector b(2);
  b << 0, 2;
  const SolveResult ls = SolveLpRegression(a, b, 2.0);
  CHECK(ls.x(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ls.objective == doctest::Approx(std::sqrt(2.0)).epsilon(1e-14));
  const SolveResult l4 = SolveLpRegression(a, b, 4.0);
  CHECK(l4.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(l4.objective == doctest::Approx(std::pow(2.0, 0.25)).epsilon(1e-10));
  CHECK(l4.converged);
}

TEST_CASE("p=1 median example against a grid scan") {
  DenseMatrix a = DenseMatrix::Ones(3, 1);
  DenseVector b(3);
  b << 0, 0, 10;
  const SolveResult r = SolveLpRegression(a, b, 1.0);
  const double grid = oracle::GridMin1(
      [&](double x) { return Obj(a, b, DenseVector::Constant(1, x), 1.0); }, -1.0, 11.0, 1e-3);
  CHECK(r.objective == doctest::Approx(10.0).epsilon(1e-9));
  CHECK(std::fabs(r.x(0)) < 1e-6);
  CHECK(r.objective <= grid * (1 + 1e-9));
  CHECK(r.converged);
}

TEST_CASE("p=2 equals the normal equations on 100 instances") {
  for (int t = 0; t < 100; ++t) {
    const DenseMatrix a = oracle::Gaussian(30 + t, 1 + t % 6, 100 + t);
    const DenseVector b = oracle::GaussianVec(30 + t, 300 + t);
    const SolveResult r = SolveLpRegression(a, b, 2.0);
    const double ref = Obj(a, b, oracle::NormalEquations(a, b), 2.0);
    CHECK(std::fabs(r.objective - ref) <= 1e-10 * ref);
  }
}

TEST_CASE("p=1 against 1-D and 2-D grid scans") {
  for (int t = 0; t < 10; ++t) {
    const DenseMatrix a1 = oracle::Gaussian(25, 1, 400 + t);
    const DenseVector b1 = 2.0 * a1.col(0) + 0.5 * oracle::GaussianVec(25, 500 + t);
    const SolveResult r1 = SolveLpRegression(a1, b1, 1.0);
    const double g1 = oracle::GridMin1(
        [&](double x) { return Obj(a1, b1, DenseVector::Constant(1, x), 1.0); }, -2.0, 6.0, 1e-4);
    CHECK(std::fabs(r1.objective - g1) <= 1e-3 * g1);
    CHECK(r1.objective <= g1 * (1 + 1e-12));

    const DenseMatrix a2 = oracle::Gaussian(20, 2, 600 + t);
    DenseVector xs(2);
    xs << 1.0, -0.5;
    const DenseVector b2 = a2 * xs + 0.3 * oracle::GaussianVec(20, 700 + t);
    const SolveResult r2 = SolveLpRegression(a2, b2, 1.0);
    const double g2 = oracle::GridMin2(
        [&](double x, double y) {
          DenseVector v(2);
          v << x, y;
          return Obj(a2, b2, v, 1.0);
        },
        -1.0, 3.0, -2.5, 1.5, 2e-3);
    CHECK(std::fabs(r2.objective - g2) <= 1e-3 * g2);
    CHECK(r2.objective <= g2 * (1 + 1e-12));
  }
}

TEST_CASE("gradient checks") {
  const DenseMatrix a = oracle::Gaussian(20, 3, 800);
  const DenseVector b = oracle::GaussianVec(20, 801);
  const DenseVector x = oracle::GaussianVec(3, 802);
  CHECK(ObjectiveGradientCheck(a, b, 2.0, x, 1e-5) <= 1e-7);
  CHECK(ObjectiveGradientCheck(a, b, 3.0, x, 1e-5) <= 1e-5);
  CHECK(ObjectiveGradientCheck(a, b, 1.5, x, 1e-5, 1e-3) <= 1e-4);
  CHECK_THROWS_AS(ObjectiveGradientCheck(a, b, 1.5, x, 1e-5, 0.0), Error);
  // analytic gradient of the unsmoothed sum against independent central differences
  for (double p : {1.5, 3.0}) {
    DenseVector g;
    SmoothedObjective(a, b, p, 0.0, x, &g);
    const DenseVector fd = oracle::FiniteDifferenceGradient(a, b, p, x, 1e-6);
    CHECK((g - fd).cwiseAbs().maxCoeff() <= 1e-4 * fd.cwiseAbs().maxCoeff());
    const double value = SmoothedObjective(a, b, p, 0.0, x);
    CHECK(value == doctest::Approx(std::pow(Obj(a, b, x, p), p)).epsilon(1e-12));
  }
}

TEST_CASE("optimality across p") {
  for (double p : {1.0, 1.25, 1.5, 3.0, 4.0, 6.0}) {
    const DenseMatrix a = oracle::Gaussian(200, 4, 900);
    DenseVector b = a * DenseVector::Ones(4) + 0.1 * oracle::GaussianVec(200, 901);
    for (int i = 0; i < 200; i += 10) b(i) += 25.0;
    const SolveResult r = SolveLpRegression(a, b, p);
    CAPTURE(p);
    CHECK(r.converged);
    CHECK(r.objective == doctest::Approx(Obj(a, b, r.x, p)).epsilon(1e-12));
    // convexity: random points around the optimum never do better
    for (int k = 0; k < 10; ++k) {
      for (double scale : {1e-4, 1e-2, 1.0}) {
        const DenseVector y = r.x + scale * oracle::GaussianVec(4, 1000 + 10 * k);
        CHECK(Obj(a, b, y, p) >= r.objective * (1 - 1e-6));
      }
    }
    for (std::size_t s = 1; s < r.stage_objectives.size(); ++s) {
      CHECK(r.stage_objectives[s] <= r.stage_objectives[s - 1] + 1e-12);
    }
  }
}

TEST_CASE("solver input errors") {
  const DenseMatrix a = oracle::Gaussian(5, 2, 1);
  CHECK_THROWS_AS(SolveLpRegression(a, oracle::GaussianVec(4, 1), 1.5), Error);
  DenseVector bad = oracle::GaussianVec(5, 1);
  bad(2) = std::nan("");
  CHECK_THROWS_AS(SolveLpRegression(a, bad, 1.5), Error);
  CHECK_THROWS_AS(SolveLpRegression(a, oracle::GaussianVec(5, 1), 0.5), Error);
  SolverOptions o;
  o.smoothing_shrink = 1.5;
  CHECK_THROWS_AS(SolveLpRegression(a, oracle::GaussianVec(5, 1), 1.5, o), Error);
  // zero right-hand side
  const SolveResult z = SolveLpRegression(a, DenseVector::Zero(5), 3.0);
  CHECK(z.objective == 0.0);
}

TEST_CASE("weighted solves") {
  const DenseMatrix a = oracle::Gaussian(60, 3, 1100);
  const DenseVector b = oracle::GaussianVec(60, 1101);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const SolveResult u = SolveLpRegression(a, b, p);
    const SolveResult w = SolveWeighted(a, b, p, DenseVector::Ones(60));
    CHECK(w.objective == u.objective);
    CHECK(w.x == u.x);
  }
  DenseVector w = DenseVector::Ones(60);
  w.head(10).setZero();
  const SolveResult kill = SolveWeighted(a, b, 1.5, w);
  const SolveResult reduced = SolveLpRegression(a.bottomRows(50), b.tail(50), 1.5);
  CHECK(kill.objective == doctest::Approx(reduced.objective).epsilon(1e-9));
  CHECK((kill.x - reduced.x).norm() <= 1e-5 * reduced.x.norm());

  DenseMatrix a2(2, 1);
  a2 << 1, 2;
  DenseVector b2(2), w2(2);
  b2 << 3, 1;
  w2 << 4, 1;
  const double closed = (4 * 1 * 3 + 1 * 2 * 1) / (4.0 * 1 + 1 * 4);
  const SolveResult r2 = SolveWeighted(a2, b2, 2.0, w2);
  CHECK(std::fabs(r2.x(0) - closed) <= 1e-10 * closed);
  CHECK_THROWS_AS(SolveWeighted(a2, b2, 2.0, -w2), Error);
}

TEST_CASE("multi right-hand side") {
  const DenseMatrix a = oracle::Gaussian(50, 3, 1200);
  const DenseVector b = oracle::GaussianVec(50, 1201);
  for (double p : {1.0, 1.5, 3.0}) {
    const MultiSolveResult m = SolveMultiRhs(a, DenseMatrix(b), p);
    const SolveResult v = SolveLpRegression(a, b, p);
    CHECK(m.x.col(0) == v.x);
    CHECK(m.objective == doctest::Approx(v.objective).epsilon(1e-15));

    DenseMatrix xs(3, 2);
    xs << 1, -1, 2, 0.5, -3, 4;
    if (p > 1.0) {
      const MultiSolveResult c = SolveMultiRhs(a, a * xs, p);
      CHECK(c.objective <= 1e-8 * MatEntrywisePNorm(a * xs, p));
      CHECK((c.x - xs).cwiseAbs().maxCoeff() <= 1e-6);
    }

    DenseMatrix b2(50, 2);
    b2.col(0) = b;
    b2.col(1) = oracle::GaussianVec(50, 1202);
    const MultiSolveResult two = SolveMultiRhs(a, b2, p);
    const double c0 = SolveLpRegression(a, b2.col(0), p).objective;
    const double c1 = SolveLpRegression(a, b2.col(1), p).objective;
    CHECK(std::pow(two.objective, p) ==
          doctest::Approx(std::pow(c0, p) + std::pow(c1, p)).epsilon(1e-10));
  }
}

TEST_CASE("constrained solves") {
  const DenseMatrix a = oracle::Gaussian(40, 2, 1300);
  const DenseVector b = a * (DenseVector(2) << 2.0, -3.0).finished() + 0.2 * oracle::GaussianVec(40, 1301);
  const Projection identity = [](const DenseVector& v) { return v; };
  const SolveResult free = SolveConstrained(a, b, 2.0, identity);
  const SolveResult ref = SolveLpRegression(a, b, 2.0);
  CHECK(std::fabs(free.objective - ref.objective) <= 1e-4 * ref.objective);

  // 1-D with a negative unconstrained optimum
  const DenseMatrix a1 = DenseMatrix::Ones(5, 1);
  const DenseVector b1 = -DenseVector::LinSpaced(5, 1.0, 5.0);
  const Projection nonneg = [](const DenseVector& v) { return DenseVector(v.cwiseMax(0.0)); };
  for (double p : {1.0, 2.0, 3.0}) {
    const SolveResult r = SolveConstrained(a1, b1, p, nonneg);
    CHECK(r.x(0) == 0.0);
  }

  // box [-1,1]^2 against a grid
  const Projection box = [](const DenseVector& v) { return DenseVector(v.cwiseMax(-1.0).cwiseMin(1.0)); };
  const SolveResult boxed = SolveConstrained(a, b, 2.0, box);
  const double grid = oracle::GridMin2(
      [&](double x, double y) {
        DenseVector v(2);
        v << x, y;
        return Obj(a, b, v, 2.0);
      },
      -1.0, 1.0, -1.0, 1.0, 1e-3);
  CHECK(boxed.x.cwiseAbs().maxCoeff() <= 1.0);
  CHECK(boxed.objective <= grid * (1 + 1e-9));
  CHECK(boxed.objective >= grid * (1 - 1e-3));

  const Projection drifting = [](const DenseVector& v) { return DenseVector(v * 0.5); };
  CHECK_THROWS_AS(SolveConstrained(a, b, 2.0, drifting), Error);
}
