#include "lpcore/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lpcore/error.hpp"
#include "lpcore/rng.hpp"

namespace lpcore {

double SamplerConfig::k() const { return std::max(p / 2.0 + 1.0, p); }

void SamplerConfig::Validate() const {
  CheckExponent(p);
  if (d < 1) throw Error(ErrorKind::kInvalidConfig, "rank d must be >= 1");
  if (!(epsilon > 0.0 && epsilon < 1.0 / 7.0)) {
    throw Error(ErrorKind::kInvalidConfig,
                "epsilon must lie in (0, 1/7), got " + std::to_string(epsilon));
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "delta must lie in (0, 1)");
  }
  if (!(r1_scale >= 0.0) || !(r2_scale >= 0.0) || !std::isfinite(r1_scale) ||
      !std::isfinite(r2_scale)) {
    throw Error(ErrorKind::kInvalidConfig, "r scales must be finite and nonnegative");
  }
}

double R1Default(const SamplerConfig& cfg) {
  CheckExponent(cfg.p);
  const double d = static_cast<double>(cfg.d);
  return cfg.r1_scale * 64.0 * std::pow(36.0, cfg.p) * std::pow(d, cfg.k()) *
         (d * std::log(8.0 * 36.0) + std::log(200.0));
}

double R2Default(const SamplerConfig& cfg) {
  cfg.Validate();
  const double d = static_cast<double>(cfg.d);
  const double eps = cfg.epsilon;
  return cfg.r2_scale * std::pow(36.0, cfg.p) * std::pow(d, cfg.k()) *
         (d * std::log(36.0 / eps) + std::log(200.0)) / (eps * eps);
}

namespace {

void CheckRate(double r) {
  if (!(r > 0.0) || std::isnan(r)) {
    throw Error(ErrorKind::kInvalidConfig, "sampling rate r must be positive");
  }
}

std::vector<double> RowPowers(const DenseMatrix& m, double p) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out[i] = VecPNormPow(m.row(i).transpose(), p);
  }
  return out;
}

// min{1, r * w_i * mass_i / sum_j w_j mass_j}; weights may be null.
ProbabilityVector ProportionalProbabilities(const std::vector<double>& mass,
                                            const DenseVector* weights, double r) {
  double total = 0.0;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    total += weights ? (*weights)(static_cast<Eigen::Index>(i)) * mass[i] : mass[i];
  }
  if (!(total > 0.0)) {
    throw Error(ErrorKind::kZeroRank, "sampling mass is zero");
  }
  ProbabilityVector probs(mass.size());
  for (std::size_t i = 0; i < mass.size(); ++i) {
    const double m = weights ? (*weights)(static_cast<Eigen::Index>(i)) * mass[i] : mass[i];
    probs[i] = std::min(1.0, r * m / total);
  }
  return probs;
}

void CheckWeights(const DenseVector& w, Eigen::Index n) {
  if (w.size() != n) {
    throw Error(ErrorKind::kDimensionMismatch, "weight vector length");
  }
  if (!w.allFinite() || (w.array() < 0.0).any()) {
    throw Error(ErrorKind::kInvalidConfig, "weights must be finite and nonnegative");
  }
  if (!((w.array() > 0.0).any())) {
    throw Error(ErrorKind::kInvalidConfig, "all weights are zero");
  }
}

ProbabilityVector MergeStage2(const ProbabilityVector& p1,
                              const ProbabilityVector& residual_term) {
  ProbabilityVector q(p1.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    q[i] = std::min(1.0, std::max(p1[i], residual_term[i]));
  }
  return q;
}

}  // namespace

ProbabilityVector Stage1Probabilities(const DenseMatrix& u, double p, double r1) {
  CheckExponent(p);
  CheckRate(r1);
  return ProportionalProbabilities(RowPowers(u, p), nullptr, r1);
}

ProbabilityVector Stage1Probabilities(const WellConditionedBasis& basis, double r1) {
  return Stage1Probabilities(basis.u, basis.p, r1);
}

ProbabilityVector Stage2Probabilities(const ProbabilityVector& p1,
                                      const DenseVector& residual, double p,
                                      double r2) {
  return Stage2Probabilities(p1, DenseMatrix(residual), p, r2);
}

ProbabilityVector Stage2Probabilities(const ProbabilityVector& p1,
                                      const DenseMatrix& residual, double p,
                                      double r2, const DenseVector* weights) {
  CheckExponent(p);
  CheckRate(r2);
  if (static_cast<Eigen::Index>(p1.size()) != residual.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "residual rows vs stage-1 probabilities");
  }
  if (weights != nullptr) CheckWeights(*weights, residual.rows());
  if (MatEntrywisePNorm(residual, p) == 0.0) {
    throw Error(ErrorKind::kContract, "stage-2 probabilities need a nonzero residual");
  }
  return MergeStage2(p1, ProportionalProbabilities(RowPowers(residual, p), weights, r2));
}

ProbabilityVector WeightedStage2Probabilities(const ProbabilityVector& p1,
                                              const DenseVector& residual,
                                              const DenseVector& weights,
                                              double p, double r2) {
  return Stage2Probabilities(p1, DenseMatrix(residual), p, r2, &weights);
}

ProbabilityVector OracleProbabilities(const WellConditionedBasis& basis,
                                      const DenseVector& rho_opt, double z,
                                      double r) {
  CheckRate(r);
  const double p = basis.p;
  if (rho_opt.size() != basis.u.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "residual length vs basis rows");
  }
  if (!(z >= 0.0)) throw Error(ErrorKind::kInvalidConfig, "Z must be nonnegative");
  const std::vector<double> rows = RowPowers(basis.u, p);
  double total = 0.0;
  for (double v : rows) total += v;
  if (!(total > 0.0)) throw Error(ErrorKind::kZeroRank, "basis has zero norm");

  // |rho_i|^p / Z^p, evaluated as (|rho_i| / Z)^p; 0/0 = 0.
  ProbabilityVector probs(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double lev = r * rows[i] / total;
    const double a = std::abs(rho_opt(static_cast<Eigen::Index>(i)));
    double res = 0.0;
    if (z > 0.0) res = r * std::pow(a / z, p);
    probs[i] = std::min(1.0, std::max(lev, res));
  }
  return probs;
}

ProbabilityVector WeightedStage1Probabilities(const WellConditionedBasis& basis,
                                              const DenseVector& weights,
                                              double r1) {
  CheckRate(r1);
  CheckWeights(weights, basis.u.rows());
  return ProportionalProbabilities(RowPowers(basis.u, basis.p), &weights, r1);
}

SamplingPlan RealizeSample(const ProbabilityVector& probs, double p,
                           std::uint64_t seed) {
  CheckExponent(p);
  SamplingPlan plan;
  plan.probs = probs;
  plan.seed = seed;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double pi = probs[i];
    if (!(pi >= 0.0 && pi <= 1.0)) {
      throw Error(ErrorKind::kInvalidConfig,
                  "probability out of [0,1] at row " + std::to_string(i));
    }
    plan.expected_count += pi;
    if (pi > 0.0 && CounterUniform(seed, i) < pi) {
      plan.indices.push_back(static_cast<Eigen::Index>(i));
      plan.scales.push_back(pi == 1.0 ? 1.0 : std::pow(pi, -1.0 / p));
    }
  }
  return plan;
}

DenseMatrix ApplyPlan(const SamplingPlan& plan, const DenseMatrix& m) {
  if (static_cast<Eigen::Index>(plan.probs.size()) != m.rows()) {
    throw Error(ErrorKind::kDimensionMismatch,
                "plan covers " + std::to_string(plan.probs.size()) + " rows, matrix has " +
                    std::to_string(m.rows()));
  }
  DenseMatrix out(plan.actual_count(), m.cols());
  for (std::size_t k = 0; k < plan.indices.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = plan.scales[k] * m.row(plan.indices[k]);
  }
  return out;
}

SampledProblem ApplyPlan(const SamplingPlan& plan, const DenseMatrix& m,
                         const DenseVector& v) {
  if (m.rows() != v.size()) {
    throw Error(ErrorKind::kDimensionMismatch, "matrix rows vs vector length");
  }
  SampledProblem out;
  out.a = ApplyPlan(plan, m);
  out.b.resize(plan.actual_count());
  for (std::size_t k = 0; k < plan.indices.size(); ++k) {
    out.b(static_cast<Eigen::Index>(k)) = plan.scales[k] * v(plan.indices[k]);
  }
  return out;
}

double MeasureDistortion(const DenseMatrix& a, const SamplingPlan& plan,
                         double p, int x_samples, std::uint64_t seed) {
  CheckExponent(p);
  if (static_cast<Eigen::Index>(plan.probs.size()) != a.rows()) {
    throw Error(ErrorKind::kDimensionMismatch, "plan was built for another matrix");
  }
  const DenseMatrix sa = ApplyPlan(plan, a);
  double worst = 0.0;
  std::uint64_t draw = 0;
  for (int s = 0; s < x_samples; ++s) {
    DenseVector x(a.cols());
    double full = 0.0;
    for (int attempt = 0; attempt < 100 && full == 0.0; ++attempt) {
      CounterRng rng(DeriveSeed(seed, "distortion", draw++));
      for (Eigen::Index j = 0; j < x.size(); ++j) x(j) = rng.Gaussian();
      full = VecPNorm(a * x, p);
    }
    if (full == 0.0) continue;
    const double sampled = sa.rows() == 0 ? 0.0 : VecPNorm(sa * x, p);
    worst = std::max(worst, std::abs(sampled - full) / full);
  }
  return worst;
}

double ScaleForExpectedCount(const ProbabilityVector& normalized_weights,
                             double target) {
  const double n = static_cast<double>(normalized_weights.size());
  if (!(target > 0.0) || target > n) {
    throw Error(ErrorKind::kInvalidConfig, "target count must lie in (0, n]");
  }
  auto count = [&](double r) {
    double s = 0.0;
    for (double w : normalized_weights) s += std::min(1.0, r * w);
    return s;
  };
  double lo = 0.0;
  double hi = target;
  while (count(hi) < target && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count(mid) < target) lo = mid; else hi = mid;
  }
  return hi;
}

}  // namespace lpcore
