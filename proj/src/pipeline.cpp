#include "lpcore/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "lpcore/error.hpp"
#include "lpcore/rng.hpp"

namespace lpcore {

namespace {

using Clock = std::chrono::steady_clock;

double MsSince(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

DenseVector RowScale(const DenseVector& w, double p) {
  DenseVector s(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    s(i) = w(i) == 1.0 ? 1.0 : std::pow(w(i), 1.0 / p);
  }
  return s;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace

// ---------------------------------------------------------------------------
// RegressionInstance

RegressionInstance::RegressionInstance(DenseMatrix a, DenseVector b, double p,
                                       std::optional<DenseVector> weights)
    : RegressionInstance(std::move(a), DenseMatrix(b), p, std::move(weights)) {}

RegressionInstance::RegressionInstance(DenseMatrix a, DenseMatrix b, double p,
                                       std::optional<DenseVector> weights)
    : a_(std::move(a)), b_(std::move(b)), p_(p), weights_(std::move(weights)) {
  Validate();
}

void RegressionInstance::Validate() {
  CheckExponent(p_);
  if (a_.rows() < 1 || a_.cols() < 1) {
    throw Error(ErrorKind::kDimensionMismatch, "empty design matrix");
  }
  if (b_.rows() != a_.rows() || b_.cols() < 1) {
    throw Error(ErrorKind::kDimensionMismatch,
                "rows(A) = " + std::to_string(a_.rows()) + " but rows(B) = " +
                    std::to_string(b_.rows()));
  }
  if (!a_.allFinite() || !b_.allFinite()) {
    throw Error(ErrorKind::kNonFinite, "instance data contains NaN or Inf");
  }
  if (weights_) {
    const DenseVector& w = *weights_;
    if (w.size() != a_.rows()) throw Error(ErrorKind::kDimensionMismatch, "weights length");
    if (!w.allFinite() || (w.array() < 0.0).any()) {
      throw Error(ErrorKind::kInvalidConfig, "weights must be finite and nonnegative");
    }
    if (!(w.array() > 0.0).any()) throw Error(ErrorKind::kInvalidConfig, "all weights are zero");
  }
  rank_ = NumericRank(a_);
  if (rank_ < 1) throw Error(ErrorKind::kZeroRank, "design matrix has rank 0");
}

double RegressionInstance::ResidualNorm(const DenseMatrix& residual) const {
  if (!weights_) return MatEntrywisePNorm(residual, p_);
  const DenseMatrix scaled = RowScale(*weights_, p_).asDiagonal() * residual;
  return MatEntrywisePNorm(scaled, p_);
}

double RegressionInstance::Objective(const DenseMatrix& x) const {
  return ResidualNorm(a_ * x - b_);
}

// ---------------------------------------------------------------------------
// Conditioning and subproblems

PreparedBasis PrepareBasis(const RegressionInstance& inst, std::uint64_t seed,
                           double rounding_tol) {
  const auto start = Clock::now();
  PreparedBasis prep;
  const double p = inst.p();
  if (!inst.weights()) {
    prep.basis = BuildWellConditionedBasis(inst.a(), p, rounding_tol, seed);
    prep.u = prep.basis.u;
  } else {
    const DenseVector scale = RowScale(*inst.weights(), p);
    prep.basis = BuildWellConditionedBasis(scale.asDiagonal() * inst.a(), p,
                                           rounding_tol, seed);
    prep.u = prep.basis.u;
    for (Eigen::Index i = 0; i < prep.u.rows(); ++i) {
      if (scale(i) == 0.0) {
        prep.u.row(i).setZero();
      } else if (scale(i) != 1.0) {
        prep.u.row(i) /= scale(i);
      }
    }
  }
  prep.elapsed_ms = MsSince(start);
  return prep;
}

namespace {

struct Subsolve {
  DenseMatrix x;
  double sampled_objective = 0.0;
};

Subsolve SolveSampled(const RegressionInstance& inst, const SamplingPlan& plan,
                      const SolverOptions& opts) {
  const DenseMatrix sa = ApplyPlan(plan, inst.a());
  const DenseMatrix sb = ApplyPlan(plan, inst.b());
  Subsolve out;
  const double p = inst.p();
  if (inst.weights()) {
    DenseVector w(plan.actual_count());
    for (std::size_t k = 0; k < plan.indices.size(); ++k) {
      w(static_cast<Eigen::Index>(k)) = (*inst.weights())(plan.indices[k]);
    }
    const SolveResult r = SolveWeighted(sa, sb.col(0), p, w, opts);
    out.x = r.x;
    out.sampled_objective = r.objective;
  } else if (inst.rhs_cols() == 1) {
    const SolveResult r = SolveLpRegression(sa, sb.col(0), p, opts);
    out.x = r.x;
    out.sampled_objective = r.objective;
  } else {
    const MultiSolveResult r = SolveMultiRhs(sa, sb, p, opts);
    out.x = r.x;
    out.sampled_objective = r.objective;
  }
  return out;
}

// Realizes probs with derived seeds until the sampled matrix keeps rank
// target_rank, then solves the sampled problem on it.
StageOutcome RealizeAndSolve(const RegressionInstance& inst,
                             const ProbabilityVector& probs, int stage,
                             Eigen::Index target_rank, std::uint64_t seed,
                             std::string_view label, const PipelineOptions& opts) {
  StageOutcome out;
  out.stage = stage;
  for (int attempt = 0; attempt <= opts.max_resamples; ++attempt) {
    SamplingPlan plan = RealizeSample(probs, inst.p(), DeriveSeed(seed, label, attempt));
    if (plan.actual_count() > 0) {
      const DenseMatrix sa = ApplyPlan(plan, inst.a());
      if (NumericRank(sa) >= target_rank) {
        out.plan = std::move(plan);
        out.resamples = attempt;
        const Subsolve sub = SolveSampled(inst, out.plan, opts.solver);
        out.x_hat = sub.x;
        out.sampled_objective = sub.sampled_objective;
        out.residual = inst.a() * out.x_hat - inst.b();
        out.full_objective = inst.ResidualNorm(out.residual);
        return out;
      }
    }
  }
  throw Error(ErrorKind::kStageFailure,
              "stage " + std::to_string(stage) + ": sampled matrix lost rank in " +
                  std::to_string(opts.max_resamples + 1) + " draws (expected rows " +
                  std::to_string(std::accumulate(probs.begin(), probs.end(), 0.0)) +
                  ", target rank " + std::to_string(target_rank) + ")");
}

SamplerConfig Normalized(SamplerConfig cfg, const RegressionInstance& inst) {
  cfg.p = inst.p();
  cfg.d = inst.rank();
  cfg.Validate();
  return cfg;
}

ProbabilityVector StageOneProbabilities(const RegressionInstance& inst,
                                        const PreparedBasis& prep, double r1) {
  if (inst.weights()) {
    WellConditionedBasis view = prep.basis;
    view.u = prep.u;
    return WeightedStage1Probabilities(view, *inst.weights(), r1);
  }
  return Stage1Probabilities(prep.u, inst.p(), r1);
}

bool ResidualVanishes(const RegressionInstance& inst, const DenseMatrix& residual) {
  const double b_norm = inst.ResidualNorm(inst.b());
  return inst.ResidualNorm(residual) <= 1e-12 * std::max(1.0, b_norm);
}

}  // namespace

StageOutcome StageOne(const RegressionInstance& inst, const PreparedBasis& prep,
                      const SamplerConfig& cfg_in, std::uint64_t seed,
                      const PipelineOptions& opts) {
  const SamplerConfig cfg = Normalized(cfg_in, inst);
  const double r1 = R1Default(cfg);
  StageOutcome out = RealizeAndSolve(inst, StageOneProbabilities(inst, prep, r1), 1,
                                     inst.rank(), seed, "stage1", opts);
  out.rate = r1;
  return out;
}

StageOutcome StageTwo(const RegressionInstance& inst, const PreparedBasis& prep,
                      const StageOutcome& stage1, const SamplerConfig& cfg_in,
                      std::uint64_t seed, const PipelineOptions& opts) {
  const SamplerConfig cfg = Normalized(cfg_in, inst);
  if (ResidualVanishes(inst, stage1.residual)) {
    StageOutcome out = stage1;
    out.stage = 2;
    out.exact_passthrough = true;
    return out;
  }
  (void)prep;
  const double r2 = R2Default(cfg);
  const ProbabilityVector q =
      Stage2Probabilities(stage1.plan.probs, stage1.residual, inst.p(), r2,
                          inst.weights() ? &*inst.weights() : nullptr);
  StageOutcome out = RealizeAndSolve(inst, q, 2, inst.rank(), seed, "stage2", opts);
  out.rate = r2;
  return out;
}

SolveResult ExactSolve(const RegressionInstance& inst, const SolverOptions& opts) {
  if (inst.weights()) {
    return SolveWeighted(inst.a(), inst.rhs(), inst.p(), *inst.weights(), opts);
  }
  if (inst.rhs_cols() == 1) return SolveLpRegression(inst.a(), inst.rhs(), inst.p(), opts);
  const MultiSolveResult multi = SolveMultiRhs(inst.a(), inst.b(), inst.p(), opts);
  SolveResult out;
  out.x = multi.x.col(0);
  out.objective = multi.objective;
  out.converged = multi.converged;
  return out;
}

namespace {

SolveReport BlankReport(const RegressionInstance& inst, const SamplerConfig& cfg,
                        std::uint64_t seed, std::string variant) {
  SolveReport report;
  report.variant = std::move(variant);
  report.n = inst.rows();
  report.m = inst.cols();
  report.d = inst.rank();
  report.k = inst.rhs_cols();
  report.p = inst.p();
  report.seed = seed;
  report.config = cfg;
  report.config.p = inst.p();
  report.config.d = inst.rank();
  return report;
}

void FinishReport(const RegressionInstance& inst, SolveReport& report,
                  const PipelineOptions& opts) {
  const StageOutcome& last = report.stages.back();
  report.x = last.x_hat;
  report.objective = last.full_objective;
  const double size = static_cast<double>(inst.rows()) * static_cast<double>(inst.cols());
  if (opts.compute_exact && (opts.force_exact || size <= opts.exact_size_limit)) {
    const auto start = Clock::now();
    const double z = inst.Objective(inst.weights() || inst.rhs_cols() == 1
                                        ? DenseMatrix(ExactSolve(inst, opts.solver).x)
                                        : SolveMultiRhs(inst.a(), inst.b(), inst.p(),
                                                        opts.solver).x);
    report.timings_ms["exact"] = MsSince(start);
    report.z_exact = z;
    if (z > 0.0) report.approx_ratio = report.objective / z;
  }
}

void AttachBasis(SolveReport& report, const PreparedBasis& prep) {
  report.alpha_cert = prep.basis.alpha_cert;
  report.beta_cert = prep.basis.beta_cert;
  report.kappa_cert = prep.basis.kappa_cert;
  report.warning = prep.basis.warning;
  report.timings_ms["conditioning"] = prep.elapsed_ms;
}

}  // namespace

SolveReport TwoStageSolve(const RegressionInstance& inst, SamplerConfig cfg,
                          std::uint64_t seed, const PipelineOptions& opts,
                          const PreparedBasis* prep_in) {
  std::string variant = inst.weights() ? "weighted"
                        : inst.rhs_cols() > 1 ? "generalized" : "two-stage";
  SolveReport report = BlankReport(inst, cfg, seed, variant);
  report.stages_requested = opts.stages;
  try {
    cfg = Normalized(cfg, inst);
    report.config = cfg;
    PreparedBasis local;
    if (prep_in == nullptr) {
      local = PrepareBasis(inst, DeriveSeed(seed, "conditioning"), opts.rounding_tol);
      prep_in = &local;
    }
    AttachBasis(report, *prep_in);
    auto start = Clock::now();
    report.stages.push_back(StageOne(inst, *prep_in, cfg, seed, opts));
    report.timings_ms["stage1"] = MsSince(start);
    if (opts.stages >= 2) {
      start = Clock::now();
      report.stages.push_back(StageTwo(inst, *prep_in, report.stages[0], cfg, seed, opts));
      report.timings_ms["stage2"] = MsSince(start);
    }
    FinishReport(inst, report, opts);
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  return report;
}

SolveReport WeightedTwoStage(const RegressionInstance& inst, SamplerConfig cfg,
                             std::uint64_t seed, const PipelineOptions& opts) {
  if (!inst.weights()) {
    SolveReport r = BlankReport(inst, cfg, seed, "weighted");
    r.ok = false;
    r.error = std::string(ToString(ErrorKind::kInvalidConfig)) + ": instance has no weights";
    return r;
  }
  return TwoStageSolve(inst, cfg, seed, opts);
}

SolveReport GeneralizedTwoStage(const RegressionInstance& inst, SamplerConfig cfg,
                                std::uint64_t seed, const PipelineOptions& opts) {
  SolveReport r = TwoStageSolve(inst, cfg, seed, opts);
  r.variant = "generalized";
  return r;
}

SolveReport SingleStageOracleSolve(const RegressionInstance& inst,
                                   const DenseVector& x_ref, SamplerConfig cfg,
                                   double r, std::uint64_t seed,
                                   const PipelineOptions& opts) {
  SolveReport report = BlankReport(inst, cfg, seed, "oracle");
  report.stages_requested = 1;
  try {
    if (inst.rhs_cols() != 1 || inst.weights()) {
      throw Error(ErrorKind::kInvalidConfig, "oracle sampling needs an unweighted vector instance");
    }
    if (x_ref.size() != inst.cols()) {
      throw Error(ErrorKind::kDimensionMismatch, "x_ref length vs columns of A");
    }
    cfg = Normalized(cfg, inst);
    report.config = cfg;
    const PreparedBasis prep = PrepareBasis(inst, DeriveSeed(seed, "conditioning"),
                                            opts.rounding_tol);
    AttachBasis(report, prep);
    const auto start = Clock::now();
    const DenseVector rho = inst.a() * x_ref - inst.rhs();
    const double z = VecPNorm(rho, inst.p());
    const ProbabilityVector probs = OracleProbabilities(prep.basis, rho, z, r);
    StageOutcome out = RealizeAndSolve(inst, probs, 1, inst.rank(), seed, "oracle", opts);
    out.rate = r;
    report.stages.push_back(std::move(out));
    report.timings_ms["stage1"] = MsSince(start);
    FinishReport(inst, report, opts);
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  return report;
}

SolveReport SingleStageAugmentedSolve(const RegressionInstance& inst,
                                      SamplerConfig cfg, double r,
                                      std::uint64_t seed,
                                      const PipelineOptions& opts) {
  SolveReport report = BlankReport(inst, cfg, seed, "augmented");
  report.stages_requested = 1;
  try {
    if (inst.rhs_cols() != 1 || inst.weights()) {
      throw Error(ErrorKind::kInvalidConfig, "augmented sampling needs an unweighted vector instance");
    }
    cfg = Normalized(cfg, inst);
    report.config = cfg;
    DenseMatrix augmented(inst.rows(), inst.cols() + 1);
    augmented << inst.a(), inst.b();
    const auto cstart = Clock::now();
    const WellConditionedBasis basis =
        BuildWellConditionedBasis(augmented, inst.p(), opts.rounding_tol,
                                  DeriveSeed(seed, "conditioning"));
    report.alpha_cert = basis.alpha_cert;
    report.beta_cert = basis.beta_cert;
    report.kappa_cert = basis.kappa_cert;
    report.warning = basis.warning;
    report.timings_ms["conditioning"] = MsSince(cstart);
    const auto start = Clock::now();
    const ProbabilityVector probs = Stage1Probabilities(basis, r);
    StageOutcome out = RealizeAndSolve(inst, probs, 1, inst.rank(), seed, "augmented", opts);
    out.rate = r;
    report.stages.push_back(std::move(out));
    report.timings_ms["stage1"] = MsSince(start);
    FinishReport(inst, report, opts);
  } catch (const std::exception& e) {
    report.ok = false;
    report.error = e.what();
  }
  return report;
}

// ---------------------------------------------------------------------------
// Statistics

int ThreadBudget() {
  if (const char* env = std::getenv("LPC_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

LemmaStatistics ComputeLemmaStatistics(const RegressionInstance& inst,
                                       const SamplerConfig& cfg_in, int n_seeds,
                                       std::uint64_t seed,
                                       const PipelineOptions& opts, int threads) {
  const SamplerConfig cfg = Normalized(cfg_in, inst);
  const double p = inst.p();
  const double eps = cfg.epsilon;

  const DenseMatrix x_opt = inst.rhs_cols() == 1 || inst.weights()
                                ? DenseMatrix(ExactSolve(inst, opts.solver).x)
                                : SolveMultiRhs(inst.a(), inst.b(), p, opts.solver).x;
  const DenseMatrix rho_opt = inst.a() * x_opt - inst.b();
  const double z = inst.ResidualNorm(rho_opt);
  const double slack = 1e-12 * std::max(1.0, inst.ResidualNorm(inst.b()));
  const PreparedBasis prep = PrepareBasis(inst, DeriveSeed(seed, "conditioning"),
                                          opts.rounding_tol);

  // ||S rho||_p with S the plan's diagonal sampling operator.
  auto sampled_norm = [&](const SamplingPlan& plan) {
    const DenseMatrix s = ApplyPlan(plan, rho_opt);
    if (!inst.weights()) return MatEntrywisePNorm(s, p);
    DenseVector w(plan.actual_count());
    for (std::size_t k = 0; k < plan.indices.size(); ++k) {
      w(static_cast<Eigen::Index>(k)) = (*inst.weights())(plan.indices[k]);
    }
    return MatEntrywisePNorm(RowScale(w, p).asDiagonal() * s, p);
  };

  struct Run {
    bool ok = false;
    bool a = false, b = false, c = false, d = false, e = false;
    double ratio1 = 0.0, ratio2 = 0.0;
    double count1 = 0.0, count2 = 0.0, exp1 = 0.0, exp2 = 0.0;
  };
  std::vector<Run> runs(static_cast<std::size_t>(std::max(0, n_seeds)));
  auto work = [&](int s) {
    Run& run = runs[static_cast<std::size_t>(s)];
    const std::uint64_t master = DeriveSeed(seed, "lemma-run", static_cast<std::uint64_t>(s));
    try {
      const StageOutcome one = StageOne(inst, prep, cfg, master, opts);
      const StageOutcome two = StageTwo(inst, prep, one, cfg, master, opts);
      run.a = sampled_norm(one.plan) <= 3.0 * z + slack;
      run.b = one.full_objective <= 8.0 * z + slack;
      run.c = sampled_norm(two.plan) <= (1.0 + eps) * z + slack;
      run.d = inst.ResidualNorm(inst.a() * (two.x_hat - one.x_hat)) <= 12.0 * z + slack;
      run.e = two.full_objective <= (1.0 + 7.0 * eps) * z + slack;
      run.ratio1 = z > 0.0 ? one.full_objective / z : 1.0;
      run.ratio2 = z > 0.0 ? two.full_objective / z : 1.0;
      run.count1 = static_cast<double>(one.plan.actual_count());
      run.count2 = static_cast<double>(two.plan.actual_count());
      run.exp1 = one.plan.expected_count;
      run.exp2 = two.plan.expected_count;
      run.ok = true;
    } catch (const Error&) {
      run.ok = false;
    }
  };

  if (threads <= 0) threads = ThreadBudget();
  threads = std::max(1, std::min(threads, n_seeds));
  if (threads == 1) {
    for (int s = 0; s < n_seeds; ++s) work(s);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (int s = next++; s < n_seeds; s = next++) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }

  LemmaStatistics stats;
  stats.runs = n_seeds;
  stats.z_exact = z;
  stats.p = p;
  stats.epsilon = eps;
  stats.target_a = 1.0 - std::pow(3.0, -p);
  int ok = 0;
  double fa = 0, fb = 0, fc = 0, fd = 0, fe = 0, e1 = 0, e2 = 0;
  for (const Run& run : runs) {
    if (!run.ok) {
      ++stats.failures;
      continue;
    }
    ++ok;
    fa += run.a;
    fb += run.b;
    fc += run.c;
    fd += run.d;
    fe += run.e;
    e1 += run.exp1;
    e2 += run.exp2;
    stats.stage1_ratios.push_back(run.ratio1);
    stats.final_ratios.push_back(run.ratio2);
    stats.stage1_counts.push_back(run.count1);
    stats.stage2_counts.push_back(run.count2);
  }
  // Failed runs count against every event.
  const double denom = std::max(1, n_seeds);
  stats.freq_sampled_opt_residual = fa / denom;
  stats.freq_stage1_constant = fb / denom;
  stats.freq_stage2_opt_residual = fc / denom;
  stats.freq_stage_gap = fd / denom;
  stats.freq_final_relative = fe / denom;
  if (ok > 0) {
    stats.mean_stage1_expected = e1 / ok;
    stats.mean_stage2_expected = e2 / ok;
  }
  stats.median_final_ratio = Median(stats.final_ratios);
  stats.median_stage1_ratio = Median(stats.stage1_ratios);
  return stats;
}

// ---------------------------------------------------------------------------
// Reference family and calibration

ReferenceInstance GenerateReferenceInstance(Eigen::Index n, Eigen::Index d,
                                            double p, NoiseModel model,
                                            double rho, std::uint64_t seed) {
  CheckExponent(p);
  if (d < 1 || n <= d) {
    throw Error(ErrorKind::kInvalidConfig, "reference family needs n > d >= 1");
  }
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw Error(ErrorKind::kInvalidConfig, "corruption fraction must lie in [0, 1]");
  }
  ReferenceInstance out;
  out.n = n;
  out.d = d;
  out.p = p;
  out.noise_model = model;
  out.rho = rho;
  out.seed = seed;
  CounterRng design(DeriveSeed(seed, "design"));
  out.a.resize(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) out.a(i, j) = design.Gaussian();
  }
  out.x_planted = DenseVector::Ones(d);
  const DenseVector clean = out.a * out.x_planted;
  CounterRng noise(DeriveSeed(seed, "noise"));
  out.noise.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.noise(i) = 0.1 * noise.Gaussian();
  if (model == NoiseModel::kSparseGross) {
    const auto count = static_cast<Eigen::Index>(std::floor(rho * static_cast<double>(n)));
    // Partial Fisher-Yates for the corrupted rows.
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    CounterRng pick(DeriveSeed(seed, "corruption"));
    const double magnitude = 10.0 * clean.cwiseAbs().maxCoeff();
    for (Eigen::Index k = 0; k < count; ++k) {
      const auto span = static_cast<std::uint64_t>(n - k);
      const auto j = k + static_cast<Eigen::Index>(pick.Next64() % span);
      std::swap(idx[k], idx[j]);
      const double sign = pick.Uniform() < 0.5 ? -1.0 : 1.0;
      out.noise(idx[k]) += sign * magnitude;
    }
    out.corrupted_rows.assign(idx.begin(), idx.begin() + count);
    std::sort(out.corrupted_rows.begin(), out.corrupted_rows.end());
  }
  out.b = clean + out.noise;
  return out;
}

namespace {

double SolveRateForCount(const std::function<double(double)>& count, double target) {
  double lo = 0.0;
  double hi = 1.0;
  while (count(hi) < target && hi < 1e300) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count(mid) < target) lo = mid; else hi = mid;
  }
  return hi;
}

}  // namespace

SamplerConfig CalibrateScales(const PreparedBasis& prep,
                              const DenseMatrix& residual_proxy,
                              SamplerConfig cfg, double target1, double target2,
                              const std::optional<DenseVector>& weights) {
  return CalibrateScales(prep, std::vector<DenseMatrix>{residual_proxy}, cfg, target1,
                         target2, weights);
}

SamplerConfig CalibrateScales(const PreparedBasis& prep,
                              const std::vector<DenseMatrix>& residual_proxies,
                              SamplerConfig cfg, double target1, double target2,
                              const std::optional<DenseVector>& weights) {
  if (residual_proxies.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "calibration needs a residual proxy");
  }
  const double n = static_cast<double>(prep.u.rows());
  if (!(target1 > 0.0 && target1 <= n && target2 >= target1 && target2 <= n)) {
    throw Error(ErrorKind::kInvalidConfig, "calibration targets must satisfy 0 < t1 <= t2 <= n");
  }
  cfg.d = prep.basis.rank();
  cfg.p = prep.basis.p;
  const double p = cfg.p;
  const DenseVector* w = weights ? &*weights : nullptr;

  auto stage1 = [&](double r) {
    if (w) {
      WellConditionedBasis view = prep.basis;
      view.u = prep.u;
      return WeightedStage1Probabilities(view, *w, r);
    }
    return Stage1Probabilities(prep.u, p, r);
  };
  const double r1 = SolveRateForCount([&](double r) {
    const ProbabilityVector v = stage1(r);
    return std::accumulate(v.begin(), v.end(), 0.0);
  }, target1);
  const ProbabilityVector p1 = stage1(r1);
  const double r2 = SolveRateForCount([&](double r) {
    double total = 0.0;
    for (const DenseMatrix& res : residual_proxies) {
      const ProbabilityVector v = Stage2Probabilities(p1, res, p, r, w);
      total += std::accumulate(v.begin(), v.end(), 0.0);
    }
    return total / static_cast<double>(residual_proxies.size());
  }, target2);

  SamplerConfig unit = cfg;
  unit.r1_scale = 1.0;
  unit.r2_scale = 1.0;
  cfg.r1_scale = r1 / R1Default(unit);
  cfg.r2_scale = r2 / R2Default(unit);
  return cfg;
}

SamplerConfig CalibrateWithPilot(const RegressionInstance& inst,
                                 const PreparedBasis& prep, SamplerConfig cfg,
                                 double target1, double target2,
                                 std::uint64_t seed, const PipelineOptions& opts) {
  constexpr int kPilotRuns = 8;
  cfg = CalibrateScales(prep, inst.b(), cfg, target1, target2, inst.weights());
  std::vector<DenseMatrix> residuals;
  for (int k = 0; k < kPilotRuns; ++k) {
    const StageOutcome pilot =
        StageOne(inst, prep, cfg, DeriveSeed(seed, "pilot", static_cast<std::uint64_t>(k)), opts);
    residuals.push_back(pilot.residual);
  }
  return CalibrateScales(prep, residuals, cfg, target1, target2, inst.weights());
}

}  // namespace lpcore
