#pragma once

// Reference implementations used only by the tests. None of them call into
// the library's numerical kernels.

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

inline Mat Gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = nd(gen);
  }
  return m;
}

inline Vec GaussianVec(Eigen::Index n, std::uint64_t seed) { return Gaussian(n, 1, seed).col(0); }

// Plain sum of |v_i|^p, no scaling.
inline double NaivePNorm(const Vec& v, double p) {
  if (std::isinf(p)) return v.cwiseAbs().maxCoeff();
  long double s = 0.0L;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::pow(std::fabs((long double)v(i)), (long double)p);
  return static_cast<double>(std::pow(s, 1.0L / p));
}

inline double NaiveDual(double p) {
  return p == 1.0 ? std::numeric_limits<double>::infinity() : p / (p - 1.0);
}

// Singular-value count above tol * sigma_max via Jacobi SVD.
inline Eigen::Index SvdRank(const Mat& a, double tol = 1e-10) {
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Mat> svd(a);
  const Vec s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++r;
  }
  return r;
}

inline Vec NormalEquations(const Mat& a, const Vec& b) {
  return (a.transpose() * a).ldlt().solve(a.transpose() * b);
}

// Unit vectors of a uniform angular net on the circle (d = 2) or {+-1} (d = 1).
inline std::vector<Vec> DirectionNet(Eigen::Index d, int points) {
  std::vector<Vec> net;
  if (d == 1) {
    net.push_back(Vec::Constant(1, 1.0));
    net.push_back(Vec::Constant(1, -1.0));
    return net;
  }
  const double pi = std::acos(-1.0);
  for (int k = 0; k < points; ++k) {
    const double t = 2.0 * pi * k / points;
    Vec z(2);
    z << std::cos(t), std::sin(t);
    net.push_back(z);
  }
  return net;
}

// min over a 1-D grid of f.
inline double GridMin1(const std::function<double(double)>& f, double lo, double hi, double step,
                       double* arg = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (double x = lo; x <= hi + 1e-12; x += step) {
    const double v = f(x);
    if (v < best) {
      best = v;
      if (arg) *arg = x;
    }
  }
  return best;
}

inline double GridMin2(const std::function<double(double, double)>& f, double lo0, double hi0,
                       double lo1, double hi1, double step, double* a0 = nullptr,
                       double* a1 = nullptr) {
  double best = std::numeric_limits<double>::infinity();
  for (double x = lo0; x <= hi0 + 1e-12; x += step) {
    for (double y = lo1; y <= hi1 + 1e-12; y += step) {
      const double v = f(x, y);
      if (v < best) {
        best = v;
        if (a0) *a0 = x;
        if (a1) *a1 = y;
      }
    }
  }
  return best;
}

// Central differences of f(x) = sum_i |a_i x - b_i|^p.
inline Vec FiniteDifferenceGradient(const Mat& a, const Vec& b, double p, const Vec& x, double h) {
  auto f = [&](const Vec& y) {
    const Vec r = a * y - b;
    long double s = 0.0L;
    for (Eigen::Index i = 0; i < r.size(); ++i) s += std::pow(std::fabs((long double)r(i)), (long double)p);
    return s;
  };
  Vec g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vec xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    g(j) = static_cast<double>((f(xp) - f(xm)) / (2.0L * h));
  }
  return g;
}

}  // namespace oracle
