#include "lpcore/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "lpcore/error.hpp"
#include "lpcore/rng.hpp"

namespace lpcore {

namespace {

// Gradient of y -> ||y||_p at y != 0; zero for kink coordinates when p = 1.
DenseVector NormGradient(const DenseVector& y, double p, double norm) {
  DenseVector g(y.size());
  if (p == 1.0) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      g(i) = y(i) > 0 ? 1.0 : (y(i) < 0 ? -1.0 : 0.0);
    }
    return g;
  }
  if (p == 2.0) return y / norm;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double t = std::abs(y(i)) / norm;
    g(i) = std::copysign(std::pow(t, p - 1.0), y(i));
  }
  return g;
}

// Monotone ascent for a convex, 1-homogeneous f on the unit sphere:
// z <- grad f(z) / ||grad f(z)||_2 never decreases f.
double MaximizeOnSphere(const DenseMatrix& u, double p, DenseVector& z) {
  z.normalize();
  DenseVector y = u * z;
  double value = VecPNorm(y, p);
  for (int it = 0; it < 2000 && value > 0.0; ++it) {
    DenseVector grad = u.transpose() * NormGradient(y, p, value);
    const double gn = grad.norm();
    if (gn == 0.0) break;
    DenseVector next = grad / gn;
    DenseVector y_next = u * next;
    const double v_next = VecPNorm(y_next, p);
    if (!(v_next > value * (1.0 + 1e-15))) {
      if (v_next > value) {
        z = next;
        value = v_next;
      }
      break;
    }
    z = std::move(next);
    y = std::move(y_next);
    value = v_next;
  }
  return value;
}

// Riemannian gradient descent with Armijo backtracking for ||U z||_p on the
// unit sphere. Local; callers multistart.
double MinimizeOnSphere(const DenseMatrix& u, double p, DenseVector& z) {
  z.normalize();
  DenseVector y = u * z;
  double value = VecPNorm(y, p);
  double step = 1.0;
  for (int it = 0; it < 500 && value > 0.0; ++it) {
    const DenseVector grad = u.transpose() * NormGradient(y, p, value);
    const DenseVector tangent = grad - grad.dot(z) * z;
    const double tn = tangent.norm();
    if (tn <= 1e-13 * std::max(1.0, value)) break;
    bool improved = false;
    for (int h = 0; h < 60; ++h) {
      DenseVector trial = (z - step * tangent).normalized();
      DenseVector y_trial = u * trial;
      const double v_trial = VecPNorm(y_trial, p);
      if (v_trial <= value - 1e-4 * step * tn * tn) {
        const double rel = (value - v_trial) / value;
        z = std::move(trial);
        y = std::move(y_trial);
        value = v_trial;
        improved = rel > 1e-15;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return value;
}

struct RatioScan {
  SphereExtremes extremes;
  std::vector<DenseVector> low_points;  // refined local minimizers
  std::vector<double> low_values;
};

RatioScan ScanNormRatio(const DenseMatrix& u, double p, int n_scan,
                        std::uint64_t seed) {
  const Eigen::Index d = u.cols();
  std::vector<DenseVector> dirs;
  dirs.reserve(static_cast<std::size_t>(n_scan + d));
  for (Eigen::Index j = 0; j < d; ++j) dirs.push_back(DenseVector::Unit(d, j));
  CounterRng rng(seed);
  for (int s = 0; s < n_scan; ++s) {
    DenseVector z(d);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.Gaussian();
    if (z.norm() == 0.0) continue;
    dirs.push_back(z.normalized());
  }
  std::vector<double> vals(dirs.size());
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    vals[i] = VecPNorm(u * dirs[i], p);
  }
  std::vector<std::size_t> order(dirs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });

  const std::size_t refine = std::min<std::size_t>(dirs.size(), 6 + 2 * d);
  RatioScan out;
  out.extremes.min_ratio = kInfinity;
  out.extremes.max_ratio = 0.0;
  // Coordinate directions always count toward the max so that
  // max_ratio >= max_j ||U e_j||_p exactly.
  for (Eigen::Index j = 0; j < d; ++j) {
    if (vals[j] > out.extremes.max_ratio) {
      out.extremes.max_ratio = vals[j];
      out.extremes.argmax = dirs[j];
    }
  }
  for (std::size_t k = 0; k < refine; ++k) {
    DenseVector z = dirs[order[k]];
    const double v = MinimizeOnSphere(u, p, z);
    out.low_points.push_back(z);
    out.low_values.push_back(v);
    if (v < out.extremes.min_ratio) {
      out.extremes.min_ratio = v;
      out.extremes.argmin = z;
    }
  }
  for (std::size_t k = 0; k < refine; ++k) {
    DenseVector z = dirs[order[dirs.size() - 1 - k]];
    const double v = MaximizeOnSphere(u, p, z);
    if (v > out.extremes.max_ratio) {
      out.extremes.max_ratio = v;
      out.extremes.argmax = z;
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) {
    DenseVector z = dirs[j];
    const double v = MaximizeOnSphere(u, p, z);
    if (v > out.extremes.max_ratio) {
      out.extremes.max_ratio = v;
      out.extremes.argmax = z;
    }
  }
  return out;
}

// Khachiyan's algorithm for the minimum-volume centered ellipsoid enclosing
// the symmetric set {+-x_i}. Returns F with max_i x_i^T F x_i = 1.
// weights carries a warm start across calls (new points enter at zero).
DenseMatrix CenteredMvee(const DenseMatrix& pts, DenseVector& weights,
                         double eps) {
  const Eigen::Index d = pts.rows();
  const Eigen::Index count = pts.cols();
  if (weights.size() != count) {
    DenseVector w = DenseVector::Zero(count);
    w.head(weights.size()) = weights;
    weights = w;
  }
  if (weights.sum() <= 0.0) weights.setConstant(1.0 / count);
  weights /= weights.sum();

  DenseMatrix m = pts * weights.asDiagonal() * pts.transpose();
  DenseMatrix minv = m.llt().solve(DenseMatrix::Identity(d, d));
  DenseVector g = (pts.transpose() * minv).cwiseProduct(pts.transpose()).rowwise().sum();
  const double dd = static_cast<double>(d);

  for (int it = 0; it < 200000; ++it) {
    Eigen::Index j = 0;
    const double gj = g.maxCoeff(&j);
    if (gj <= dd * (1.0 + eps)) break;
    const double lambda = (gj - dd) / (dd * (gj - 1.0));
    const double lp = lambda / (1.0 - lambda);
    // Sherman-Morrison on M' = (1-l) M + l x_j x_j^T.
    const DenseVector mx = minv * pts.col(j);
    const DenseVector cross = pts.transpose() * mx;
    const double denom = 1.0 + lp * gj;
    minv = (minv - (lp / denom) * mx * mx.transpose()) / (1.0 - lambda);
    g = (g - (lp / denom) * cross.cwiseAbs2()) / (1.0 - lambda);
    weights *= (1.0 - lambda);
    weights(j) += lambda;
    if (it % 64 == 63) {
      // Refresh to contain drift from the rank-one updates.
      m = pts * weights.asDiagonal() * pts.transpose();
      minv = m.llt().solve(DenseMatrix::Identity(d, d));
      g = (pts.transpose() * minv).cwiseProduct(pts.transpose()).rowwise().sum();
    }
  }
  m = pts * weights.asDiagonal() * pts.transpose();
  minv = m.llt().solve(DenseMatrix::Identity(d, d));
  g = (pts.transpose() * minv).cwiseProduct(pts.transpose()).rowwise().sum();
  minv = 0.5 * (minv + minv.transpose());
  return minv / g.maxCoeff();
}

DenseMatrix UpperCholesky(const DenseMatrix& f) {
  Eigen::LLT<DenseMatrix> llt(f);
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorKind::kRoundingFailed, "ellipsoid matrix not positive definite");
  }
  return llt.matrixU();
}

DenseMatrix ApplyInverseUpper(const DenseMatrix& q, const DenseMatrix& g) {
  // Q G^{-1} = (G^{-T} Q^T)^T
  return g.transpose().triangularView<Eigen::Lower>().solve(q.transpose()).transpose();
}

int DefaultMaxIters(Eigen::Index d, double tol) {
  const double dd = static_cast<double>(d);
  return static_cast<int>(
      std::ceil(10.0 * dd * dd * std::log(dd + 1.0) * std::log(1.0 / tol)));
}

}  // namespace

SphereExtremes ProbeNormRatio(const DenseMatrix& u, double p, int n_scan,
                              std::uint64_t seed) {
  CheckExponent(p);
  return ScanNormRatio(u, p, n_scan, seed).extremes;
}

RoundingResult LownerJohnRound(const DenseMatrix& q, double p, double tol,
                               int max_iters, std::uint64_t seed) {
  CheckExponent(p);
  const Eigen::Index d = q.cols();
  if (d == 0) throw Error(ErrorKind::kZeroRank, "rounding a rank-0 basis");
  if (!(tol > 0.0 && tol < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "rounding tol must lie in (0, 1)");
  }
  RoundingResult result;
  if (p == 2.0) {
    result.g = DenseMatrix::Identity(d, d);
    result.kappa = 1.0;
    result.converged = true;
    return result;
  }
  if (d == 1) {
    result.g = DenseMatrix::Constant(1, 1, VecPNorm(q.col(0), p));
    result.kappa = 1.0;
    result.converged = true;
    return result;
  }
  if (max_iters <= 0) max_iters = DefaultMaxIters(d, tol);

  const double target = std::sqrt(static_cast<double>(d)) * (1.0 + tol);
  const int n_scan = static_cast<int>(200 * d);
  const double mvee_eps = std::min(1e-3, tol / 20.0);

  // Boundary points of C in the Q-coordinates.
  std::vector<DenseVector> points;
  for (Eigen::Index j = 0; j < d; ++j) {
    points.push_back(DenseVector::Unit(d, j) / VecPNorm(q.col(j), p));
  }
  CounterRng init_rng(DeriveSeed(seed, "rounding-init"));
  for (Eigen::Index s = 0; s < 2 * d; ++s) {
    DenseVector z(d);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = init_rng.Gaussian();
    const double nz = VecPNorm(q * z, p);
    if (nz > 0.0) points.push_back(z / nz);
  }

  DenseVector weights;
  double best_kappa = kInfinity;
  for (int it = 1; it <= max_iters; ++it) {
    DenseMatrix pts(d, static_cast<Eigen::Index>(points.size()));
    for (std::size_t k = 0; k < points.size(); ++k) pts.col(k) = points[k];
    const DenseMatrix f = CenteredMvee(pts, weights, mvee_eps);
    const DenseMatrix g = UpperCholesky(f);
    const DenseMatrix u = ApplyInverseUpper(q, g);
    const RatioScan scan = ScanNormRatio(u, p, n_scan, DeriveSeed(seed, "rounding-scan", it));
    const double lo = scan.extremes.min_ratio;
    const double hi = scan.extremes.max_ratio;
    const double kappa = hi / lo;
    result.iterations = it;
    if (kappa < best_kappa) {
      best_kappa = kappa;
      result.g = lo * g;
      result.kappa = kappa;
    }
    if (kappa <= target) {
      result.converged = true;
      break;
    }
    // Points of C outside the current ellipsoid: z = G^{-1} z' / ||U z'||_p.
    bool added = false;
    for (std::size_t k = 0; k < scan.low_points.size(); ++k) {
      if (scan.low_values[k] >= 1.0 - 1e-9) continue;
      const DenseVector z = g.triangularView<Eigen::Upper>().solve(scan.low_points[k]);
      points.push_back(z / scan.low_values[k]);
      added = true;
    }
    if (!added) break;  // ellipsoid already contains every probed point
  }
  return result;
}

WellConditionedBasis BuildWellConditionedBasis(const DenseMatrix& a, double p,
                                               double tol, std::uint64_t seed,
                                               double rank_tol) {
  CheckExponent(p);
  const QRFactors qr = QrThin(a, rank_tol);
  const Eigen::Index d = qr.rank;
  const RoundingResult round = LownerJohnRound(qr.q, p, tol, 0, seed);

  WellConditionedBasis basis;
  basis.p = p;
  basis.tol = tol;
  basis.g = round.g;
  basis.u = ApplyInverseUpper(qr.q, round.g);
  basis.tau = round.g.triangularView<Eigen::Upper>() * qr.r;
  basis.kappa_cert = round.kappa;
  basis.rounding_converged = round.converged;
  const double dd = static_cast<double>(d);
  if (p == 2.0) {
    basis.alpha_cert = std::sqrt(dd);
    basis.beta_cert = 1.0;
    return basis;
  }
  basis.alpha_cert = round.kappa * std::pow(dd, 1.0 / p);
  if (p < 2.0) {
    basis.beta_cert = 1.0 + tol;
  } else {
    const double q = DualExponent(p);
    basis.beta_cert = (1.0 + tol) * std::pow(dd, 1.0 / q - 0.5);
  }
  if (!round.converged) {
    basis.warning = "rounding stopped after " + std::to_string(round.iterations) +
                    " iterations with kappa " + std::to_string(round.kappa) +
                    "; alpha certificate inflated accordingly";
  }
  return basis;
}

namespace {

double QNormGradient(const DenseVector& z, double q, DenseVector& grad) {
  grad.resize(z.size());
  if (std::isinf(q)) {
    Eigen::Index k = 0;
    const double v = z.cwiseAbs().maxCoeff(&k);
    grad.setZero();
    grad(k) = z(k) >= 0 ? 1.0 : -1.0;
    return v;
  }
  const double v = VecPNorm(z, q);
  grad = NormGradient(z, q, v);
  return v;
}

// log(||z||_q / ||U z||_p); scale invariant.
double LogBetaRatio(const DenseMatrix& u, double p, double q, const DenseVector& z,
                    DenseVector* grad) {
  const DenseVector y = u * z;
  const double up = VecPNorm(y, p);
  DenseVector gq;
  const double zq = QNormGradient(z, q, gq);
  if (grad != nullptr) {
    *grad = gq / zq - u.transpose() * NormGradient(y, p, up) / up;
  }
  return std::log(zq) - std::log(up);
}

double RefineBetaRatio(const DenseMatrix& u, double p, double q, DenseVector z) {
  z.normalize();
  DenseVector grad;
  double value = LogBetaRatio(u, p, q, z, &grad);
  double step = 0.5;
  for (int it = 0; it < 300; ++it) {
    const DenseVector tangent = grad - grad.dot(z) * z;
    const double tn = tangent.norm();
    if (tn < 1e-12) break;
    bool improved = false;
    for (int h = 0; h < 40; ++h) {
      const DenseVector trial = (z + step * tangent).normalized();
      DenseVector trial_grad;
      const double v = LogBetaRatio(u, p, q, trial, &trial_grad);
      if (v > value + 1e-4 * step * tn * tn) {
        improved = v - value > 1e-15;
        z = trial;
        value = v;
        grad = trial_grad;
        step *= 2.0;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return std::exp(value);
}

}  // namespace

BasisCertificate CertifyBasis(const WellConditionedBasis& basis, int n_probes,
                              std::uint64_t seed) {
  if (n_probes < 1) throw Error(ErrorKind::kInvalidConfig, "n_probes must be >= 1");
  const DenseMatrix& u = basis.u;
  const double p = basis.p;
  const double q = DualExponent(p);
  const Eigen::Index d = u.cols();

  BasisCertificate cert;
  cert.alpha_measured = MatEntrywisePNorm(u, p);

  std::vector<DenseVector> probes;
  for (Eigen::Index j = 0; j < d; ++j) probes.push_back(DenseVector::Unit(d, j));
  for (int i = 0; i < n_probes; ++i) {
    CounterRng rng(DeriveSeed(seed, "certify-probe", static_cast<std::uint64_t>(i)));
    DenseVector z(d);
    for (Eigen::Index j = 0; j < d; ++j) z(j) = rng.Gaussian();
    if (z.norm() > 0.0) probes.push_back(z);
  }
  std::vector<double> ratios(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    ratios[i] = VecPNorm(probes[i], q) / VecPNorm(u * probes[i], p);
  }
  std::vector<std::size_t> order(probes.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return ratios[a] > ratios[b]; });
  double best = *std::max_element(ratios.begin(), ratios.end());
  if (d > 1) {
    const std::size_t refine = std::min<std::size_t>(probes.size(), 4 + 2 * d);
    for (std::size_t k = 0; k < refine; ++k) {
      best = std::max(best, RefineBetaRatio(u, p, q, probes[order[k]]));
    }
  }
  cert.beta_measured_lower = best;
  return cert;
}

double SpannerCoefficients(const WellConditionedBasis& basis,
                           const DenseMatrix& a, int z_samples,
                           std::uint64_t seed) {
  if (a.rows() != basis.u.rows() || a.cols() != basis.tau.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "basis was not built from this matrix");
  }
  if (basis.tau.rows() == basis.tau.cols()) {
    Eigen::FullPivLU<DenseMatrix> lu(basis.tau);
    if (!lu.isInvertible()) throw Error(ErrorKind::kZeroRank, "tau is singular");
  }
  double best = 0.0;
  for (int s = 0; s < z_samples; ++s) {
    CounterRng rng(DeriveSeed(seed, "spanner", static_cast<std::uint64_t>(s)));
    DenseVector z(a.cols());
    for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.Gaussian();
    const double az = VecPNorm(a * z, basis.p);
    if (az == 0.0) continue;
    z /= az;
    best = std::max(best, (basis.tau * z).norm());
  }
  return best;
}

}  // namespace lpcore
