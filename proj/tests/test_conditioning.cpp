#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lpcore/conditioning.hpp"
#include "lpcore/linalg.hpp"
#include "oracles.hpp"

using namespace lpcore;

namespace {

DenseMatrix Orthonormal(Eigen::Index n, Eigen::Index d, std::uint64_t seed) {
  Eigen::HouseholderQR<DenseMatrix> qr(oracle::Gaussian(n, d, seed));
  return qr.householderQ() * DenseMatrix::Identity(n, d);
}

struct NetExtremes {
  double min_ratio = 1e300;
  double max_ratio = 0.0;
};

// Extremes of ||M z||_p / ||z||_2 over the direction net.
NetExtremes NetRatio(const DenseMatrix& m, double p, int points) {
  NetExtremes e;
  for (const auto& z : oracle::DirectionNet(m.cols(), points)) {
    const double r = oracle::NaivePNorm(m * z, p);
    e.min_ratio = std::min(e.min_ratio, r);
    e.max_ratio = std::max(e.max_ratio, r);
  }
  return e;
}

// Both Definition conditions over a direction net: returns the largest
// ||z||_q / ||U z||_p seen.
double NetBeta(const DenseMatrix& u, double p, int points) {
  const double q = oracle::NaiveDual(p);
  double worst = 0.0;
  for (const auto& z : oracle::DirectionNet(u.cols(), points)) {
    worst = std::max(worst, oracle::NaivePNorm(z, q) / oracle::NaivePNorm(u * z, p));
  }
  return worst;
}

}  // namespace

TEST_CASE("rounding p=2 is the identity") {
  const DenseMatrix q = Orthonormal(40, 3, 1);
  const RoundingResult r = LownerJohnRound(q, 2.0);
  CHECK(r.kappa == 1.0);
  CHECK(r.g == DenseMatrix::Identity(3, 3));
  CHECK(r.converged);
}

TEST_CASE("rounding d=1 is exact") {
  for (double p : {1.0, 1.5, 3.0}) {
    const DenseMatrix q = Orthonormal(30, 1, 2);
    const RoundingResult r = LownerJohnRound(q, p);
    CHECK(r.kappa == 1.0);
    CHECK(r.g(0, 0) == doctest::Approx(oracle::NaivePNorm(q.col(0), p)).epsilon(1e-14));
  }
}

TEST_CASE("rounding 50x2 p=1 against a half-degree net") {
  const DenseMatrix q = Orthonormal(50, 2, 3);
  const RoundingResult r = LownerJohnRound(q, 1.0, 0.05);
  CHECK(r.converged);
  CHECK(r.kappa <= std::sqrt(2.0) * 1.05);
  const DenseMatrix ginv = r.g.inverse();
  const NetExtremes e = NetRatio(q * ginv, 1.0, 720);
  CHECK(e.min_ratio >= 1.0 - 1e-9);
  CHECK(e.max_ratio <= r.kappa * (1 + 1e-9));
  CHECK(e.max_ratio / e.min_ratio <= std::sqrt(2.0) * 1.05);
}

TEST_CASE("rounding quality across p and d") {
  for (Eigen::Index d : {2, 3, 5}) {
    for (double p : {1.0, 1.5, 3.0, 4.0}) {
      const DenseMatrix q = Orthonormal(200, d, 10 * d + static_cast<int>(p * 2));
      const RoundingResult r = LownerJohnRound(q, p, 0.05);
      CAPTURE(d);
      CAPTURE(p);
      CHECK(r.converged);
      CHECK(r.kappa >= 1.0);
      CHECK(r.kappa <= std::sqrt(static_cast<double>(d)) * 1.05 * (1 + 1e-12));
      // rounding is upper triangular
      CHECK(r.g.triangularView<Eigen::StrictlyLower>().toDenseMatrix().cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("well-conditioned basis p=2") {
  const DenseMatrix a = oracle::Gaussian(60, 3, 4);
  const WellConditionedBasis w = BuildWellConditionedBasis(a, 2.0);
  CHECK(w.alpha_cert == std::sqrt(3.0));
  CHECK(w.beta_cert == 1.0);
  CHECK(w.kappa_cert == 1.0);
  CHECK((w.u.transpose() * w.u - DenseMatrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
  const BasisCertificate c = CertifyBasis(w, 500, 9);
  CHECK(c.alpha_measured == doctest::Approx(std::sqrt(3.0)).epsilon(1e-12));
  CHECK(c.beta_measured_lower <= 1.0 + 1e-10);
  CHECK(SpannerCoefficients(w, a, 2000, 3) <= std::sqrt(3.0) * (1 + 1e-10));
}

TEST_CASE("well-conditioned basis of a single column") {
  const DenseMatrix a = oracle::Gaussian(25, 1, 5);
  for (double p : {1.0, 1.5, 2.0, 3.0}) {
    const WellConditionedBasis w = BuildWellConditionedBasis(a, p, 0.05);
    const DenseVector expected = a.col(0) / oracle::NaivePNorm(a.col(0), p);
    // sign is free
    const double s = w.u(0, 0) * expected(0) > 0 ? 1.0 : -1.0;
    CHECK((w.u.col(0) - s * expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(w.alpha_cert <= 1.05);
    CHECK(w.beta_cert <= 1.05);
    const BasisCertificate c = CertifyBasis(w, 50, 1);
    CHECK(c.beta_measured_lower == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(SpannerCoefficients(w, a, 200, 2) <= 1.05);
  }
}

TEST_CASE("100x3 p=1 basis certificates") {
  const DenseMatrix a = oracle::Gaussian(100, 3, 6);
  const double tol = 0.05;
  const WellConditionedBasis w = BuildWellConditionedBasis(a, 1.0, tol);
  CHECK(w.alpha_cert <= (1 + tol) * std::pow(3.0, 1.5));
  CHECK(oracle::NaivePNorm(Eigen::Map<const DenseVector>(w.u.data(), w.u.size()), 1.0) <=
        w.alpha_cert * (1 + 1e-8));
  // 10^4 random directions plus the coordinate axes
  double worst = 0.0;
  for (int k = 0; k < 10000 + 3; ++k) {
    DenseVector z = k < 3 ? DenseVector(DenseVector::Unit(3, k)) : oracle::GaussianVec(3, 70000 + k);
    worst = std::max(worst, z.cwiseAbs().maxCoeff() / oracle::NaivePNorm(w.u * z, 1.0));
  }
  CHECK(worst <= w.beta_cert * (1 + 1e-8));
}

TEST_CASE("basis invariants on random instances") {
  int idx = 0;
  for (Eigen::Index d : {1, 2, 3, 5}) {
    for (double p : {1.0, 1.5, 2.0, 3.0, 4.0}) {
      const Eigen::Index n = 50 + 37 * idx;
      const DenseMatrix a = oracle::Gaussian(n, d, 800 + idx++);
      const WellConditionedBasis w = BuildWellConditionedBasis(a, p, 0.05, 11);
      CAPTURE(d);
      CAPTURE(p);
      CHECK(w.rank() == d);
      CHECK((w.u * w.tau - a).cwiseAbs().maxCoeff() <= 1e-8 * a.cwiseAbs().maxCoeff());
      CHECK(w.kappa_cert >= 1.0);
      const BasisCertificate c = CertifyBasis(w, 300, 12);
      CHECK(c.alpha_measured <= w.alpha_cert * (1 + 1e-8));
      CHECK(c.beta_measured_lower <= w.beta_cert * (1 + 1e-8));
      if (d <= 2) {
        CHECK(NetBeta(w.u, p, 10000) <= w.beta_cert * (1 + 1e-8));
      }
    }
  }
}

TEST_CASE("random 50x2 p=3 beta against a fine net") {
  const DenseMatrix a = oracle::Gaussian(50, 2, 13);
  const WellConditionedBasis w = BuildWellConditionedBasis(a, 3.0);
  const BasisCertificate c = CertifyBasis(w, 200, 5);
  const double net = NetBeta(w.u, 3.0, 20000);
  CHECK(c.beta_measured_lower <= w.beta_cert * (1 + 1e-8));
  CHECK(net <= w.beta_cert * (1 + 1e-8));
  // the probe refinement should find essentially the net maximum
  CHECK(c.beta_measured_lower >= net * (1 - 1e-6));
}

TEST_CASE("spanner coefficients 80x3 p=1.5") {
  const DenseMatrix a = oracle::Gaussian(80, 3, 14);
  const WellConditionedBasis w = BuildWellConditionedBasis(a, 1.5);
  // independent evaluation: z normalized so ||A z||_p = 1, coefficient tau z
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    DenseVector z = oracle::GaussianVec(3, 90000 + k);
    z /= oracle::NaivePNorm(a * z, 1.5);
    worst = std::max(worst, (w.tau * z).norm());
  }
  const double q = oracle::NaiveDual(1.5);
  // ||nu||_2 <= ||nu||_q * max(1, d^{1/2-1/q}) and ||nu||_q <= beta ||U nu||_p = beta
  const double bound = w.beta_cert * std::max(1.0, std::pow(3.0, 0.5 - 1.0 / q));
  CHECK(worst <= bound);
  CHECK(SpannerCoefficients(w, a, 2000, 4) <= bound);
}

TEST_CASE("basis is scale equivariant") {
  const DenseMatrix a = oracle::Gaussian(70, 3, 15);
  for (double p : {1.0, 3.0}) {
    const WellConditionedBasis w1 = BuildWellConditionedBasis(a, p, 0.05, 3);
    const WellConditionedBasis w2 = BuildWellConditionedBasis(1e3 * a, p, 0.05, 3);
    CHECK((w1.u - w2.u).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("rank deficient input gives a basis of the column span") {
  DenseMatrix a = oracle::Gaussian(60, 4, 16);
  a.col(3) = a.col(0) - a.col(2);
  const WellConditionedBasis w = BuildWellConditionedBasis(a, 1.5);
  CHECK(w.rank() == 3);
  CHECK((w.u * w.tau - a).cwiseAbs().maxCoeff() <= 1e-8 * a.cwiseAbs().maxCoeff());
}

TEST_CASE("probe_norm_ratio brackets the net extremes") {
  const DenseMatrix u = oracle::Gaussian(40, 2, 17);
  for (double p : {1.0, 2.5}) {
    const SphereExtremes e = ProbeNormRatio(u, p, 400, 1);
    const NetExtremes net = NetRatio(u, p, 10000);
    CHECK(e.min_ratio <= net.min_ratio * (1 + 1e-9));
    CHECK(e.max_ratio >= net.max_ratio * (1 - 1e-9));
    CHECK(e.min_ratio >= net.min_ratio * (1 - 1e-4));
    CHECK(e.max_ratio <= net.max_ratio * (1 + 1e-4));
  }
}
