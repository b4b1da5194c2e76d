#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <limits>

namespace lpcore {

using DenseMatrix = Eigen::MatrixXd;
using DenseVector = Eigen::VectorXd;

inline constexpr double kDefaultRankTol = 1e-10;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Throws kInvalidExponent unless p is a finite real >= 1.
void CheckExponent(double p);

// (sum_i |v_i|^p)^(1/p). Entries are scaled by max |v_i| before powering so
// that large p does not overflow. p = +inf dispatches to the max norm.
double VecPNorm(const Eigen::Ref<const DenseVector>& v, double p);

// sum_i |v_i|^p, with the same overflow guard as VecPNorm.
double VecPNormPow(const Eigen::Ref<const DenseVector>& v, double p);

// Entrywise p-norm of a matrix (p-norm of the flattened entries).
double MatEntrywisePNorm(const DenseMatrix& m, double p);

// q with 1/p + 1/q = 1; p = 1 maps to +inf.
double DualExponent(double p);

struct QRFactors {
  DenseMatrix q;  // n x d, orthonormal columns
  DenseMatrix r;  // d x m, upper trapezoidal in the original column order
  Eigen::Index rank = 0;
  // Column permutation chosen by pivoting: column j of the permuted matrix is
  // column perm[j] of A.
  Eigen::VectorXi perm;
};

// Thin Householder QR with column pivoting. A = Q R with R expressed in the
// original column order. Rank counts |R_ii| > rank_tol * |R_11|.
// Throws kZeroRank when A has no nonzero entries.
QRFactors QrThin(const DenseMatrix& a, double rank_tol = kDefaultRankTol);

// Like QrThin but returns 0 for an all-zero matrix instead of throwing.
Eigen::Index NumericRank(const DenseMatrix& a,
                         double rank_tol = kDefaultRankTol);

// Least-squares solve min ||A x - b||_2 via QrThin. Rank-deficient A gets the
// basic solution (free variables set to zero).
DenseVector LeastSquares(const DenseMatrix& a, const DenseVector& b,
                         double rank_tol = kDefaultRankTol);

bool AllFinite(const DenseMatrix& m);

}  // namespace lpcore
