#include "lpcore/solver.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lpcore/error.hpp"

namespace lpcore {

void SolverOptions::Validate() const {
  if (max_iters < 1) throw Error(ErrorKind::kInvalidConfig, "max_iters must be >= 1");
  if (!(grad_tol > 0.0)) throw Error(ErrorKind::kInvalidConfig, "grad_tol must be positive");
  if (!(smoothing_shrink > 0.0 && smoothing_shrink < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "smoothing_shrink must lie in (0, 1)");
  }
  if (std::isnan(smoothing_mu0) || std::isnan(mu_min)) {
    throw Error(ErrorKind::kInvalidConfig, "smoothing parameters are NaN");
  }
}

namespace {

void CheckProblem(const DenseMatrix& a, const DenseVector& b, double p) {
  CheckExponent(p);
  if (a.rows() != b.size()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "rows(A) = " + std::to_string(a.rows()) + " but len(b) = " +
                    std::to_string(b.size()));
  }
  if (a.rows() < 1 || a.cols() < 1) {
    throw Error(ErrorKind::kDimensionMismatch, "empty regression problem");
  }
  if (!a.allFinite() || !b.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "regression data contains NaN or Inf");
  }
  if (a.cwiseAbs().maxCoeff() == 0.0) {
    throw Error(ErrorKind::kZeroRank, "design matrix is zero");
  }
}

// Per-row first and second derivative factors of (rho^2 + mu^2)^{p/2}.
void RowDerivatives(const DenseVector& rho, double p, double mu,
                    DenseVector& first, DenseVector& second) {
  first.resize(rho.size());
  second.resize(rho.size());
  const double mu2 = mu * mu;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    const double r = rho(i);
    const double s = r * r + mu2;
    if (s == 0.0) {
      first(i) = 0.0;
      second(i) = p >= 2.0 ? (p == 2.0 ? 2.0 : 0.0) : 0.0;
      continue;
    }
    const double sp = std::pow(s, p / 2.0 - 1.0);
    first(i) = p * sp * r;
    second(i) = p * sp * ((p - 1.0) * r * r + mu2) / s;
  }
}

double SmoothedValue(const DenseVector& rho, double p, double mu) {
  const double mu2 = mu * mu;
  double f = 0.0;
  for (Eigen::Index i = 0; i < rho.size(); ++i) {
    f += std::pow(rho(i) * rho(i) + mu2, p / 2.0);
  }
  return f;
}

struct StageOutcome {
  int iterations = 0;
  double grad_norm = 0.0;
};

// Damped Newton on the smoothed objective; every step is a weighted least
// squares solve with curvature weights, backtracked until the smoothed value
// decreases.
StageOutcome MinimizeSmoothed(const DenseMatrix& a, const DenseVector& b,
                              double p, double mu, int max_iters,
                              double grad_goal, DenseVector& x) {
  StageOutcome out;
  DenseVector rho = a * x - b;
  double f = SmoothedValue(rho, p, mu);
  DenseVector first, second;
  for (int it = 0; it < max_iters; ++it) {
    RowDerivatives(rho, p, mu, first, second);
    const DenseVector grad = a.transpose() * first;
    out.grad_norm = grad.norm();
    out.iterations = it;
    if (out.grad_norm <= grad_goal) break;
    DenseVector sw = second.cwiseSqrt();
    const double sw_max = sw.maxCoeff();
    if (!(sw_max > 0.0)) break;
    // Floor tiny curvature so the weighted system keeps full rank.
    sw = sw.cwiseMax(1e-12 * sw_max);
    const DenseMatrix wa = sw.asDiagonal() * a;
    const DenseVector wr = -first.cwiseQuotient(sw);
    const DenseVector step = LeastSquares(wa, wr);
    double t = 1.0;
    bool accepted = false;
    for (int h = 0; h < 40; ++h) {
      const DenseVector trial = x + t * step;
      const DenseVector rho_trial = a * trial - b;
      const double f_trial = SmoothedValue(rho_trial, p, mu);
      bool take = f_trial < f && (f - f_trial) > 1e-14 * f;
      if (!take && std::abs(f_trial - f) <= 1e-14 * f) {
        // Below the resolution of f: fall back to the gradient norm.
        DenseVector tf, ts;
        RowDerivatives(rho_trial, p, mu, tf, ts);
        take = (a.transpose() * tf).norm() < out.grad_norm;
      }
      if (take) {
        x = trial;
        rho = rho_trial;
        f = std::min(f, f_trial);
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    out.iterations = it + 1;
    if (!accepted) {
      RowDerivatives(rho, p, mu, first, second);
      out.grad_norm = (a.transpose() * first).norm();
      break;
    }
  }
  return out;
}

// For p = 1 an optimum sits at a vertex interpolating rank(A) rows; try the
// rows with the smallest residuals and keep the vertex if it is better.
// Returns the dual infeasibility max(0, ||lambda||_inf - 1) of the vertex
// actually kept (0 certifies optimality), or +inf when no certificate exists.
double PolishL1Vertex(const DenseMatrix& a, const DenseVector& b, DenseVector& x,
                      double& objective) {
  const DenseVector rho = a * x - b;
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rho.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return std::abs(rho(i)) < std::abs(rho(j));
  });
  const Eigen::Index m = a.cols();
  if (a.rows() <= m) return kInfinity;
  DenseMatrix sub(m, m);
  DenseVector rhs(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    sub.row(k) = a.row(order[k]);
    rhs(k) = b(order[k]);
  }
  Eigen::PartialPivLU<DenseMatrix> lu(sub);
  if (NumericRank(sub) < m) return kInfinity;
  const DenseVector candidate = lu.solve(rhs);
  const double value = VecPNorm(a * candidate - b, 1.0);
  if (!(value <= objective)) return kInfinity;
  x = candidate;
  objective = value;

  // 0 in the subdifferential: A_I^T lambda = -A_N^T sign(rho_N), |lambda| <= 1.
  const DenseVector res = a * x - b;
  DenseVector s = DenseVector::Zero(m);
  std::vector<bool> basic(static_cast<std::size_t>(a.rows()), false);
  for (Eigen::Index k = 0; k < m; ++k) basic[order[k]] = true;
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    if (basic[i] || res(i) == 0.0) continue;
    s += (res(i) > 0 ? 1.0 : -1.0) * a.row(i).transpose();
  }
  const DenseVector lambda = sub.transpose().partialPivLu().solve(-s);
  return std::max(0.0, lambda.cwiseAbs().maxCoeff() - 1.0);
}

}  // namespace

double SmoothedObjective(const DenseMatrix& a, const DenseVector& b, double p,
                         double mu, const DenseVector& x, DenseVector* grad) {
  CheckProblem(a, b, p);
  const DenseVector rho = a * x - b;
  if (grad != nullptr) {
    DenseVector first, second;
    RowDerivatives(rho, p, mu, first, second);
    *grad = a.transpose() * first;
  }
  return SmoothedValue(rho, p, mu);
}

SolveResult SolveLpRegression(const DenseMatrix& a, const DenseVector& b,
                              double p, const SolverOptions& opts) {
  CheckProblem(a, b, p);
  opts.Validate();
  const Eigen::Index n = a.rows();

  SolveResult result;
  result.x = LeastSquares(a, b);
  if (p == 2.0) {
    result.objective = VecPNorm(a * result.x - b, p);
    result.iterations = 1;
    result.converged = true;
    result.stage_objectives.push_back(result.objective);
    return result;
  }

  const double b_scale = b.cwiseAbs().maxCoeff();
  if (b_scale == 0.0) {
    result.x = DenseVector::Zero(a.cols());
    result.objective = 0.0;
    result.converged = true;
    result.stage_objectives.push_back(0.0);
    return result;
  }
  // Work with b / max|b_i| so that powers of residuals stay near 1.
  const DenseVector bs = b / b_scale;
  DenseVector x = result.x / b_scale;
  const double sqrt_n = std::sqrt(static_cast<double>(n));
  const double bp = VecPNorm(bs, p);
  double mu = opts.smoothing_mu0 > 0.0 ? opts.smoothing_mu0 / b_scale : 0.1 * bp / sqrt_n;
  const double mu_min = opts.mu_min > 0.0 ? opts.mu_min / b_scale : 1e-8 * bp / sqrt_n;
  mu = std::max(mu, mu_min);

  // Gradient scale: p ||A^T (sign(b) |b|^{p-1})||_2 on the normalized data.
  DenseVector bpow(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bpow(i) = std::copysign(std::pow(std::abs(bs(i)), p - 1.0), bs(i));
  }
  const double grad_goal = opts.grad_tol * std::max(1.0, p * (a.transpose() * bpow).norm());

  DenseVector best_x = x;
  double best_obj = VecPNorm(a * x - bs, p);
  StageOutcome last;
  for (;;) {
    last = MinimizeSmoothed(a, bs, p, mu, opts.max_iters, grad_goal, x);
    result.iterations += last.iterations;
    const double obj = VecPNorm(a * x - bs, p);
    if (obj <= best_obj) {
      best_obj = obj;
      best_x = x;
    } else {
      x = best_x;
    }
    result.stage_objectives.push_back(best_obj * b_scale);
    if (mu <= mu_min) break;
    mu = std::max(mu * opts.smoothing_shrink, mu_min);
  }
  result.kkt_residual = last.grad_norm / std::max(1.0, grad_goal / opts.grad_tol);
  result.converged = last.grad_norm <= grad_goal;
  if (p == 1.0) {
    const double dual_gap = PolishL1Vertex(a, bs, best_x, best_obj);
    result.stage_objectives.back() = best_obj * b_scale;
    if (dual_gap <= opts.grad_tol) {
      result.kkt_residual = dual_gap;
      result.converged = true;
    }
  }
  result.x = best_x * b_scale;
  result.objective = VecPNorm(a * result.x - b, p);
  return result;
}

SolveResult SolveWeighted(const DenseMatrix& a, const DenseVector& b, double p,
                          const DenseVector& w, const SolverOptions& opts) {
  CheckProblem(a, b, p);
  if (w.size() != a.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "weight vector length");
  }
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw Error(ErrorKind::kInvalidConfig, "weights must be finite and nonnegative");
  }
  if (!(w.array() > 0.0).any()) {
    throw Error(ErrorKind::kInvalidConfig, "all weights are zero");
  }
  DenseVector row_scale(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    row_scale(i) = w(i) == 1.0 ? 1.0 : std::pow(w(i), 1.0 / p);
  }
  const DenseMatrix wa = row_scale.asDiagonal() * a;
  const DenseVector wb = row_scale.cwiseProduct(b);
  return SolveLpRegression(wa, wb, p, opts);
}

MultiSolveResult SolveMultiRhs(const DenseMatrix& a, const DenseMatrix& b,
                               double p, const SolverOptions& opts) {
  if (b.cols() < 1) throw Error(ErrorKind::kDimensionMismatch, "B has no columns");
  if (a.rows() != b.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "rows(A) vs rows(B)");
  }
  MultiSolveResult out;
  out.x.resize(a.cols(), b.cols());
  out.converged = true;
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    SolveResult col = SolveLpRegression(a, b.col(j), p, opts);
    out.x.col(j) = col.x;
    out.converged = out.converged && col.converged;
    out.columns.push_back(std::move(col));
  }
  out.objective = MatEntrywisePNorm(a * out.x - b, p);
  return out;
}

SolveResult SolveConstrained(const DenseMatrix& a, const DenseVector& b,
                             double p, const Projection& project,
                             const SolverOptions& opts) {
  CheckProblem(a, b, p);
  opts.Validate();
  auto checked_project = [&](const DenseVector& v) {
    DenseVector once = project(v);
    const DenseVector twice = project(once);
    if ((twice - once).norm() > 1e-10 * std::max(1.0, once.norm())) {
      throw Error(ErrorKind::kContract, "projection is not idempotent");
    }
    return once;
  };
  auto objective = [&](const DenseVector& v) { return VecPNorm(a * v - b, p); };

  DenseVector x = checked_project(LeastSquares(a, b));
  double fx = objective(x);
  SolveResult result;
  result.x = x;
  result.objective = fx;

  const int max_steps = 20 * opts.max_iters;
  const int window = 50;
  double t = -1.0;
  double t0 = -1.0;
  int forced = 0;
  std::vector<double> best_trace;
  for (int k = 0; k < max_steps && fx > 0.0; ++k) {
    const DenseVector rho = a * x - b;
    const double rn = VecPNorm(rho, p);
    DenseVector g_rho(rho.size());
    for (Eigen::Index i = 0; i < rho.size(); ++i) {
      if (p == 1.0) {
        g_rho(i) = rho(i) > 0 ? 1.0 : (rho(i) < 0 ? -1.0 : 0.0);
      } else {
        g_rho(i) = std::copysign(std::pow(std::abs(rho(i)) / rn, p - 1.0), rho(i));
      }
    }
    const DenseVector g = a.transpose() * g_rho;
    const double gn2 = g.squaredNorm();
    if (gn2 == 0.0) break;
    if (t0 < 0.0) {
      t0 = fx / gn2;
      t = t0;
    }
    bool moved = false;
    for (int h = 0; h < 50; ++h) {
      const DenseVector trial = checked_project(x - t * g);
      const double ft = objective(trial);
      if (ft < fx) {
        x = trial;
        fx = ft;
        t *= 1.5;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) {
      // Stuck at a kink: fall back to a diminishing subgradient step.
      ++forced;
      x = checked_project(x - (t0 / std::sqrt(static_cast<double>(forced + 1))) * g);
      fx = objective(x);
      t = t0 / std::sqrt(static_cast<double>(forced + 1));
    }
    if (fx < result.objective) {
      result.objective = fx;
      result.x = x;
    }
    result.iterations = k + 1;
    best_trace.push_back(result.objective);
    if (static_cast<int>(best_trace.size()) > window) {
      const double old = best_trace[best_trace.size() - 1 - window];
      if (old - result.objective <= opts.grad_tol * std::max(old, 1e-300)) {
        result.converged = true;
        break;
      }
    }
  }
  if (fx == 0.0) result.converged = true;
  result.stage_objectives.push_back(result.objective);
  return result;
}

double ObjectiveGradientCheck(const DenseMatrix& a, const DenseVector& b,
                              double p, const DenseVector& x, double h,
                              double mu) {
  if (p < 2.0 && !(mu > 0.0)) {
    throw Error(ErrorKind::kInvalidConfig, "p < 2 needs a positive smoothing mu");
  }
  DenseVector analytic;
  SmoothedObjective(a, b, p, mu, x, &analytic);
  DenseVector numeric(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    DenseVector xp = x;
    DenseVector xm = x;
    xp(j) += h;
    xm(j) -= h;
    numeric(j) = (SmoothedObjective(a, b, p, mu, xp) - SmoothedObjective(a, b, p, mu, xm)) /
                 (2.0 * h);
  }
  const double scale = std::max(numeric.cwiseAbs().maxCoeff(), 1e-300);
  return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

}  // namespace lpcore
