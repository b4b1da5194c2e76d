#include "lpcore/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lpcore/error.hpp"

namespace lpcore {

void CheckExponent(double p) {
  if (!(p >= 1.0) || !std::isfinite(p)) {
    throw Error(ErrorKind::kInvalidExponent,
                "p must be a finite real >= 1, got " + std::to_string(p));
  }
}

namespace {

// sum |v_i / scale|^p with scale = max |v_i|; returns (scale, scaled_sum).
std::pair<double, double> ScaledPowerSum(const double* data, Eigen::Index len,
                                         double p) {
  double scale = 0.0;
  for (Eigen::Index i = 0; i < len; ++i) {
    scale = std::max(scale, std::abs(data[i]));
  }
  if (scale == 0.0) return {0.0, 0.0};
  double sum = 0.0;
  if (p == 1.0) {
    for (Eigen::Index i = 0; i < len; ++i) sum += std::abs(data[i]);
    return {scale, sum / scale};
  }
  if (p == 2.0) {
    for (Eigen::Index i = 0; i < len; ++i) {
      const double t = data[i] / scale;
      sum += t * t;
    }
    return {scale, sum};
  }
  for (Eigen::Index i = 0; i < len; ++i) {
    sum += std::pow(std::abs(data[i]) / scale, p);
  }
  return {scale, sum};
}

double PNormOf(const double* data, Eigen::Index len, double p) {
  if (std::isinf(p) && p > 0) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < len; ++i) m = std::max(m, std::abs(data[i]));
    return m;
  }
  CheckExponent(p);
  const auto [scale, sum] = ScaledPowerSum(data, len, p);
  if (scale == 0.0) return 0.0;
  if (p == 1.0) return scale * sum;
  if (p == 2.0) return scale * std::sqrt(sum);
  return scale * std::pow(sum, 1.0 / p);
}

}  // namespace

double VecPNorm(const Eigen::Ref<const DenseVector>& v, double p) {
  if (v.innerStride() != 1) {
    const DenseVector copy = v;
    return PNormOf(copy.data(), copy.size(), p);
  }
  return PNormOf(v.data(), v.size(), p);
}

double VecPNormPow(const Eigen::Ref<const DenseVector>& v, double p) {
  CheckExponent(p);
  const DenseVector copy = v;
  const auto [scale, sum] = ScaledPowerSum(copy.data(), copy.size(), p);
  if (scale == 0.0) return 0.0;
  return std::pow(scale, p) * sum;
}

double MatEntrywisePNorm(const DenseMatrix& m, double p) {
  return PNormOf(m.data(), m.size(), p);
}

double DualExponent(double p) {
  CheckExponent(p);
  if (p == 1.0) return kInfinity;
  return p / (p - 1.0);
}

bool AllFinite(const DenseMatrix& m) { return m.allFinite(); }

namespace {

struct PivotedHouseholder {
  DenseMatrix work;                 // R in the upper triangle, reflectors below
  DenseVector tau;                  // reflector coefficients
  Eigen::VectorXi perm;
  Eigen::Index rank = 0;
  Eigen::Index steps = 0;
};

PivotedHouseholder Factorize(const DenseMatrix& a, double rank_tol) {
  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  const Eigen::Index k = std::min(n, m);
  PivotedHouseholder f;
  f.work = a;
  f.tau = DenseVector::Zero(k);
  f.perm.resize(m);
  for (Eigen::Index j = 0; j < m; ++j) f.perm[j] = static_cast<int>(j);

  double lead = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) {
    // Pivot on the largest remaining column norm (recomputed, m is small).
    Eigen::Index best = j;
    double best_norm = -1.0;
    for (Eigen::Index c = j; c < m; ++c) {
      const double cn = f.work.col(c).tail(n - j).norm();
      if (cn > best_norm) {
        best_norm = cn;
        best = c;
      }
    }
    if (best != j) {
      f.work.col(j).swap(f.work.col(best));
      std::swap(f.perm[j], f.perm[best]);
    }
    if (j == 0) lead = best_norm;
    if (lead == 0.0 || best_norm <= rank_tol * lead) break;

    auto x = f.work.col(j).tail(n - j);
    const double alpha = x(0) >= 0 ? -best_norm : best_norm;
    const double v0 = x(0) - alpha;
    // v = x - alpha e1 normalized so v(0) = 1; H = I - tau v v^T.
    if (n - j > 1) x.tail(n - j - 1) /= v0;
    const double tau = (alpha - x(0)) / alpha;
    x(0) = alpha;
    f.tau(j) = tau;
    if (j + 1 < m) {
      DenseVector v(n - j);
      v(0) = 1.0;
      v.tail(n - j - 1) = x.tail(n - j - 1);
      auto block = f.work.block(j, j + 1, n - j, m - j - 1);
      const Eigen::RowVectorXd w = v.transpose() * block;
      block.noalias() -= tau * v * w;
    }
    f.steps = j + 1;
    ++f.rank;
  }
  return f;
}

}  // namespace

QRFactors QrThin(const DenseMatrix& a, double rank_tol) {
  if (a.rows() < 1 || a.cols() < 1) {
    throw Error(ErrorKind::kDimensionMismatch, "QR of an empty matrix");
  }
  if (!a.allFinite()) throw Error(ErrorKind::kNonFinite, "QR input");
  PivotedHouseholder f = Factorize(a, rank_tol);
  if (f.rank == 0) throw Error(ErrorKind::kZeroRank, "matrix has no nonzero entries");

  const Eigen::Index n = a.rows();
  const Eigen::Index m = a.cols();
  const Eigen::Index d = f.rank;

  QRFactors out;
  out.rank = d;
  out.perm = f.perm;
  out.q = DenseMatrix::Identity(n, d);
  for (Eigen::Index j = d - 1; j >= 0; --j) {
    DenseVector v(n - j);
    v(0) = 1.0;
    v.tail(n - j - 1) = f.work.col(j).tail(n - j - 1);
    auto block = out.q.bottomRows(n - j);
    const Eigen::RowVectorXd w = v.transpose() * block;
    block.noalias() -= f.tau(j) * v * w;
  }
  DenseMatrix r_perm = f.work.topRows(d).triangularView<Eigen::Upper>();
  out.r.resize(d, m);
  for (Eigen::Index j = 0; j < m; ++j) out.r.col(f.perm[j]) = r_perm.col(j);
  return out;
}

Eigen::Index NumericRank(const DenseMatrix& a, double rank_tol) {
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0;
  return QrThin(a, rank_tol).rank;
}

DenseVector LeastSquares(const DenseMatrix& a, const DenseVector& b,
                         double rank_tol) {
  if (a.rows() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "rows(A) = " + std::to_string(a.rows()) +
                    " but len(b) = " + std::to_string(b.size()));
  }
  const QRFactors f = QrThin(a, rank_tol);
  const Eigen::Index d = f.rank;
  DenseMatrix r_perm(d, a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) r_perm.col(j) = f.r.col(f.perm[j]);
  const DenseVector qtb = f.q.transpose() * b;
  const DenseVector head =
      r_perm.leftCols(d).triangularView<Eigen::Upper>().solve(qtb);
  DenseVector x = DenseVector::Zero(a.cols());
  for (Eigen::Index j = 0; j < d; ++j) x(f.perm[j]) = head(j);
  return x;
}

}  // namespace lpcore
