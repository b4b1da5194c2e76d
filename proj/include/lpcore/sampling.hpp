#pragma once

#include <cstdint>
#include <vector>

#include "lpcore/conditioning.hpp"
#include "lpcore/linalg.hpp"

namespace lpcore {

struct SamplerConfig {
  double p = 2.0;
  Eigen::Index d = 1;
  double epsilon = 0.1;  // must lie in (0, 1/7)
  double delta = 0.5;
  double r1_scale = 1.0;
  double r2_scale = 1.0;

  // k = max{p/2 + 1, p}
  double k() const;
  // Throws kInvalidConfig / kInvalidExponent on violations.
  void Validate() const;
};

// r1 = r1_scale * 8^2 36^p d^k (d ln(8*36) + ln 200)
double R1Default(const SamplerConfig& cfg);
// r2 = r2_scale * 36^p d^k (d ln(36/eps) + ln 200) / eps^2
double R2Default(const SamplerConfig& cfg);

using ProbabilityVector = std::vector<double>;

// p_i = min{1, r1 ||U_(i)||_p^p / |||U|||_p^p}
ProbabilityVector Stage1Probabilities(const WellConditionedBasis& basis, double r1);
ProbabilityVector Stage1Probabilities(const DenseMatrix& u, double p, double r1);

// q_i = min{1, max{p_i, r2 |rho_i|^p / ||rho||_p^p}}
ProbabilityVector Stage2Probabilities(const ProbabilityVector& p1,
                                      const DenseVector& residual, double p,
                                      double r2);

// Multi-RHS residual: row p-norms of the n x k residual matrix. With weights,
// the residual term is r2 w_i ||rho_(i)||_p^p / sum_j w_j ||rho_(j)||_p^p.
ProbabilityVector Stage2Probabilities(const ProbabilityVector& p1,
                                      const DenseMatrix& residual, double p,
                                      double r2,
                                      const DenseVector* weights = nullptr);

// Weighted residual: r2 w_i |rho_i|^p / ||rho||_{p,w}^p.
ProbabilityVector WeightedStage2Probabilities(const ProbabilityVector& p1,
                                              const DenseVector& residual,
                                              const DenseVector& weights,
                                              double p, double r2);

// p_i = min{1, r max{||U_(i)||_p^p / |||U|||_p^p, |rho_i|^p / Z^p}} with 0/0 = 0.
ProbabilityVector OracleProbabilities(const WellConditionedBasis& basis,
                                      const DenseVector& rho_opt, double z,
                                      double r);

// p_i = min{1, r1 w_i ||U_(i)||_p^p / |||U|||_{p,w}^p}
ProbabilityVector WeightedStage1Probabilities(const WellConditionedBasis& basis,
                                              const DenseVector& weights,
                                              double r1);

struct SamplingPlan {
  ProbabilityVector probs;
  std::vector<Eigen::Index> indices;  // realized rows, ascending
  std::vector<double> scales;         // probs[i]^{-1/p} per realized row
  std::uint64_t seed = 0;
  double expected_count = 0.0;

  Eigen::Index actual_count() const {
    return static_cast<Eigen::Index>(indices.size());
  }
};

// Independent Bernoulli draw per row; the draw at row i is a pure function of
// (seed, i).
SamplingPlan RealizeSample(const ProbabilityVector& probs, double p,
                           std::uint64_t seed);

struct SampledProblem {
  DenseMatrix a;
  DenseVector b;
};

SampledProblem ApplyPlan(const SamplingPlan& plan, const DenseMatrix& m,
                         const DenseVector& v);
DenseMatrix ApplyPlan(const SamplingPlan& plan, const DenseMatrix& m);

// max over random Gaussian x of | ||SAx||_p - ||Ax||_p | / ||Ax||_p.
double MeasureDistortion(const DenseMatrix& a, const SamplingPlan& plan,
                         double p, int x_samples, std::uint64_t seed);

// Multiplier for r so that sum_i min{1, r * weight_i} reaches target (weights
// summing to one). Used to run desk-scale experiments at a chosen sample size.
double ScaleForExpectedCount(const ProbabilityVector& normalized_weights,
                             double target);

}  // namespace lpcore
