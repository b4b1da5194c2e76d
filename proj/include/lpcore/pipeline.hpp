#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lpcore/conditioning.hpp"
#include "lpcore/linalg.hpp"
#include "lpcore/sampling.hpp"
#include "lpcore/solver.hpp"

namespace lpcore {

// A (n x m), right-hand side B (n x k; k = 1 for ordinary regression), p and
// optional nonnegative row weights.
class RegressionInstance {
 public:
  RegressionInstance(DenseMatrix a, DenseVector b, double p,
                     std::optional<DenseVector> weights = std::nullopt);
  RegressionInstance(DenseMatrix a, DenseMatrix b, double p,
                     std::optional<DenseVector> weights = std::nullopt);

  const DenseMatrix& a() const { return a_; }
  const DenseMatrix& b() const { return b_; }
  DenseVector rhs() const { return b_.col(0); }
  double p() const { return p_; }
  const std::optional<DenseVector>& weights() const { return weights_; }
  Eigen::Index rows() const { return a_.rows(); }
  Eigen::Index cols() const { return a_.cols(); }
  Eigen::Index rank() const { return rank_; }
  Eigen::Index rhs_cols() const { return b_.cols(); }

  // ||A X - B||_p, entrywise for k > 1 and weighted when weights are set.
  double Objective(const DenseMatrix& x) const;
  // Objective of the residual matrix directly.
  double ResidualNorm(const DenseMatrix& residual) const;

 private:
  void Validate();

  DenseMatrix a_;
  DenseMatrix b_;
  double p_;
  std::optional<DenseVector> weights_;
  Eigen::Index rank_ = 0;
};

struct StageOutcome {
  int stage = 1;
  SamplingPlan plan;
  DenseMatrix x_hat;     // m x k
  DenseMatrix residual;  // n x k, A x_hat - B on the full data
  double sampled_objective = 0.0;
  double full_objective = 0.0;
  double rate = 0.0;  // r used to build the probabilities
  bool exact_passthrough = false;
  int resamples = 0;
};

struct SolveReport {
  bool ok = true;
  std::string error;
  std::string variant = "two-stage";
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  Eigen::Index d = 0;
  Eigen::Index k = 1;
  double p = 2.0;
  std::uint64_t seed = 0;
  SamplerConfig config;
  int stages_requested = 2;
  std::vector<StageOutcome> stages;
  DenseMatrix x;  // final solution
  double objective = 0.0;
  std::optional<double> z_exact;
  std::optional<double> approx_ratio;
  double alpha_cert = 0.0;
  double beta_cert = 0.0;
  double kappa_cert = 1.0;
  std::string warning;
  std::map<std::string, double> timings_ms;

  // Rows and scales of the last realized plan: the coreset.
  const SamplingPlan* coreset() const {
    return stages.empty() ? nullptr : &stages.back().plan;
  }
};

struct PipelineOptions {
  SolverOptions solver;
  double rounding_tol = kDefaultRoundingTol;
  bool compute_exact = false;
  // Exact baseline only when n * m stays below this unless forced.
  double exact_size_limit = 1e7;
  bool force_exact = false;
  int max_resamples = 5;
  int stages = 2;
};

// Conditioning for an instance: the basis of W^{1/p} A (plain A when
// unweighted) together with the rows of the weighted-norm basis U.
struct PreparedBasis {
  WellConditionedBasis basis;
  DenseMatrix u;  // U with w_i ||U_(i)||^p = ||V_(i)||^p; equals basis.u unweighted
  double elapsed_ms = 0.0;
};

PreparedBasis PrepareBasis(const RegressionInstance& inst, std::uint64_t seed,
                           double rounding_tol = kDefaultRoundingTol);

StageOutcome StageOne(const RegressionInstance& inst, const PreparedBasis& prep,
                      const SamplerConfig& cfg, std::uint64_t seed,
                      const PipelineOptions& opts = {});

StageOutcome StageTwo(const RegressionInstance& inst, const PreparedBasis& prep,
                      const StageOutcome& stage1, const SamplerConfig& cfg,
                      std::uint64_t seed, const PipelineOptions& opts = {});

// Stage 1 samples by basis row norms, stage 2 adds residual sampling.
// Weighted and multi-RHS instances use the weighted and generalized
// probability formulas. Failures are reported in the returned report, never
// thrown. A precomputed basis may be supplied.
SolveReport TwoStageSolve(const RegressionInstance& inst, SamplerConfig cfg,
                          std::uint64_t seed, const PipelineOptions& opts = {},
                          const PreparedBasis* prep = nullptr);

SolveReport WeightedTwoStage(const RegressionInstance& inst, SamplerConfig cfg,
                             std::uint64_t seed, const PipelineOptions& opts = {});

SolveReport GeneralizedTwoStage(const RegressionInstance& inst, SamplerConfig cfg,
                                std::uint64_t seed, const PipelineOptions& opts = {});

// One stage with p_i = min{1, r max{lev_i, |rho_i|^p / Z^p}}, rho = A x_ref - b.
SolveReport SingleStageOracleSolve(const RegressionInstance& inst,
                                   const DenseVector& x_ref, SamplerConfig cfg,
                                   double r, std::uint64_t seed,
                                   const PipelineOptions& opts = {});

// One stage sampled by the row norms of a well-conditioned basis of [A b].
SolveReport SingleStageAugmentedSolve(const RegressionInstance& inst,
                                      SamplerConfig cfg, double r,
                                      std::uint64_t seed,
                                      const PipelineOptions& opts = {});

// Exact baseline on the full instance.
SolveResult ExactSolve(const RegressionInstance& inst, const SolverOptions& opts = {});

struct LemmaStatistics {
  int runs = 0;
  int failures = 0;
  double z_exact = 0.0;
  double p = 2.0;
  double epsilon = 0.0;
  // Frequencies over successful runs.
  double freq_sampled_opt_residual = 0.0;   // (a) ||S(A x_opt - b)|| <= 3 Z
  double freq_stage1_constant = 0.0;        // (b) stage-1 ratio <= 8
  double freq_stage2_opt_residual = 0.0;    // (c) ||T(A x_opt - b)|| <= (1+eps) Z
  double freq_stage_gap = 0.0;              // (d) ||A x_opt_hat - A x_c_hat|| <= 12 Z
  double freq_final_relative = 0.0;         // (e) final ratio <= 1 + 7 eps
  double target_a = 0.0;                    // 1 - 1/3^p
  std::vector<double> stage1_ratios;
  std::vector<double> final_ratios;
  std::vector<double> stage1_counts;
  std::vector<double> stage2_counts;
  double mean_stage1_expected = 0.0;
  double mean_stage2_expected = 0.0;
  double median_final_ratio = 0.0;
  double median_stage1_ratio = 0.0;
};

// Runs the two-stage pipeline for n_seeds derived seeds on a fixed instance
// and tallies the lemma events. Independent seeds run on up to `threads`
// workers (0 = LPC_THREADS or hardware concurrency).
LemmaStatistics ComputeLemmaStatistics(const RegressionInstance& inst,
                                       const SamplerConfig& cfg, int n_seeds,
                                       std::uint64_t seed,
                                       const PipelineOptions& opts = {},
                                       int threads = 0);

enum class NoiseModel { kGaussian, kSparseGross };

// Reference family: A standard Gaussian n x d, x* = ones, b = A x* + noise.
// Gaussian noise has standard deviation 0.1; sparse-gross additionally
// corrupts floor(rho n) rows by +-10 ||A x*||_inf.
struct ReferenceInstance {
  DenseMatrix a;
  DenseVector b;
  DenseVector x_planted;
  DenseVector noise;
  std::vector<Eigen::Index> corrupted_rows;
  Eigen::Index n = 0;
  Eigen::Index d = 0;
  double p = 2.0;
  NoiseModel noise_model = NoiseModel::kSparseGross;
  double rho = 0.1;
  std::uint64_t seed = 0;
};

ReferenceInstance GenerateReferenceInstance(Eigen::Index n, Eigen::Index d,
                                            double p, NoiseModel model,
                                            double rho, std::uint64_t seed);

// Scales in cfg chosen so that stage 1 expects about target1 rows and the
// residual term of stage 2, evaluated on `residual_proxy`, about target2.
SamplerConfig CalibrateScales(const PreparedBasis& prep,
                              const DenseMatrix& residual_proxy,
                              SamplerConfig cfg, double target1, double target2,
                              const std::optional<DenseVector>& weights = std::nullopt);

// Stage-2 count averaged over several residual proxies.
SamplerConfig CalibrateScales(const PreparedBasis& prep,
                              const std::vector<DenseMatrix>& residual_proxies,
                              SamplerConfig cfg, double target1, double target2,
                              const std::optional<DenseVector>& weights = std::nullopt);

// CalibrateScales with the residuals of eight pilot stage-1 runs (seeds
// labelled "pilot") as stage-2 proxies.
SamplerConfig CalibrateWithPilot(const RegressionInstance& inst,
                                 const PreparedBasis& prep, SamplerConfig cfg,
                                 double target1, double target2,
                                 std::uint64_t seed,
                                 const PipelineOptions& opts = {});

int ThreadBudget();

}  // namespace lpcore
