#pragma once

#include <cstdint>
#include <string>

#include "lpcore/linalg.hpp"

namespace lpcore {

inline constexpr double kDefaultRoundingTol = 0.05;

// Output of the ellipsoidal rounding of C = {z : ||Q z||_p <= 1}.
// With U = Q G^{-1}: ||z'||_2 <= ||U z'||_p <= kappa ||z'||_2 on every probed
// direction; the lower side is normalized to hold with equality at the
// smallest value found.
struct RoundingResult {
  DenseMatrix g;  // d x d upper triangular, F = G^T G
  double kappa = 1.0;
  int iterations = 0;
  bool converged = false;
};

// max_iters = 0 selects ceil(10 d^2 ln(d+1) ln(1/tol)).
RoundingResult LownerJohnRound(const DenseMatrix& q, double p,
                               double tol = kDefaultRoundingTol,
                               int max_iters = 0, std::uint64_t seed = 0);

struct WellConditionedBasis {
  DenseMatrix u;    // n x d, U = Q G^{-1}
  DenseMatrix g;    // d x d
  DenseMatrix tau;  // d x m, A = U tau
  double p = 2.0;
  double tol = kDefaultRoundingTol;
  double alpha_cert = 0.0;
  double beta_cert = 0.0;
  double kappa_cert = 1.0;
  bool rounding_converged = true;
  std::string warning;

  Eigen::Index rank() const { return u.cols(); }
};

// QR + rounding. alpha_cert = kappa d^{1/p}; beta_cert = (1+tol) for p <= 2
// and (1+tol) d^{1/q - 1/2} for p > 2 (exactly sqrt(d) and 1 when p = 2).
WellConditionedBasis BuildWellConditionedBasis(
    const DenseMatrix& a, double p, double tol = kDefaultRoundingTol,
    std::uint64_t seed = 0, double rank_tol = kDefaultRankTol);

struct BasisCertificate {
  double alpha_measured = 0.0;       // |||U|||_p, exact
  double beta_measured_lower = 0.0;  // max ||z||_q / ||U z||_p over probes
};

BasisCertificate CertifyBasis(const WellConditionedBasis& basis, int n_probes,
                              std::uint64_t seed);

// Largest ||nu||_2 over sampled z with ||A z||_p <= 1, where A z = U nu.
double SpannerCoefficients(const WellConditionedBasis& basis,
                           const DenseMatrix& a, int z_samples,
                           std::uint64_t seed);

// Extremes of ||U z||_p / ||z||_2 over the unit sphere, found by scanning
// random directions and refining the best candidates locally. Exposed for
// certificates and tests.
struct SphereExtremes {
  double min_ratio = 0.0;
  double max_ratio = 0.0;
  DenseVector argmin;
  DenseVector argmax;
};

SphereExtremes ProbeNormRatio(const DenseMatrix& u, double p, int n_scan,
                              std::uint64_t seed);

}  // namespace lpcore
