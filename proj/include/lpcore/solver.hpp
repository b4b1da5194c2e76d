#pragma once

#include <functional>
#include <vector>

#include "lpcore/linalg.hpp"

namespace lpcore {

// Non-positive smoothing_mu0 / mu_min select the data-dependent defaults
// 0.1 ||b||_p / sqrt(n) and 1e-8 ||b||_p / sqrt(n).
struct SolverOptions {
  int max_iters = 500;  // per smoothing stage
  double grad_tol = 1e-8;
  double smoothing_mu0 = 0.0;
  double smoothing_shrink = 0.1;
  double mu_min = 0.0;

  void Validate() const;
};

struct SolveResult {
  DenseVector x;
  double objective = 0.0;  // ||A x - b||_p
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  // True objective after each smoothing stage; non-increasing.
  std::vector<double> stage_objectives;
};

SolveResult SolveLpRegression(const DenseMatrix& a, const DenseVector& b,
                              double p, const SolverOptions& opts = {});

// Minimizes (sum_i w_i |A_(i) x - b_i|^p)^{1/p} by scaling row i by w_i^{1/p}.
SolveResult SolveWeighted(const DenseMatrix& a, const DenseVector& b, double p,
                          const DenseVector& w, const SolverOptions& opts = {});

struct MultiSolveResult {
  DenseMatrix x;                       // m x k
  double objective = 0.0;              // |||A X - B|||_p
  std::vector<SolveResult> columns;
  bool converged = false;
};

// Column-wise: |||AX - B|||_p^p = sum_j ||A X^(j) - B^(j)||_p^p.
MultiSolveResult SolveMultiRhs(const DenseMatrix& a, const DenseMatrix& b,
                               double p, const SolverOptions& opts = {});

// Euclidean projection onto a closed convex set; must be idempotent.
using Projection = std::function<DenseVector(const DenseVector&)>;

SolveResult SolveConstrained(const DenseMatrix& a, const DenseVector& b,
                             double p, const Projection& project,
                             const SolverOptions& opts = {});

// Smoothed objective sum_i (rho_i^2 + mu^2)^{p/2} and its gradient.
double SmoothedObjective(const DenseMatrix& a, const DenseVector& b, double p,
                         double mu, const DenseVector& x,
                         DenseVector* grad = nullptr);

// Max over coordinates of |analytic - central difference| relative to the
// largest gradient entry, for the smoothed objective at x.
double ObjectiveGradientCheck(const DenseMatrix& a, const DenseVector& b,
                              double p, const DenseVector& x, double h,
                              double mu = 0.0);

}  // namespace lpcore
