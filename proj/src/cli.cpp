#include "lpcore/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpcore/conditioning.hpp"
#include "lpcore/error.hpp"
#include "lpcore/io.hpp"
#include "lpcore/pipeline.hpp"
#include "lpcore/rng.hpp"

namespace lpcore {

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitSolve = 2;

struct SolveArgs {
  std::string input;
  std::string rhs;
  std::string weights;
  std::string x_ref;
  std::string output;
  std::string format = "json";
  double p = 2.0;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  double r1_scale = 1.0;
  double r2_scale = 1.0;
  std::optional<double> r;
  int stages = 2;
  std::string variant = "two-stage";
  bool exact = false;
};

struct GenArgs {
  long long n = 0;
  long long d = 0;
  double p = 2.0;
  double rho = 0.1;
  std::uint64_t seed = 0;
  std::string noise = "sparse-gross";
  std::string out;
};

struct CertifyArgs {
  std::string input;
  double p = 2.0;
  double tol = kDefaultRoundingTol;
  int probes = 200;
  std::uint64_t seed = 0;
};

struct BenchArgs {
  std::string family = "reference";
  int seeds = 100;
  std::vector<double> ps{1.0, 2.0};
  std::string out;
  long long n = 2000;
  long long d = 4;
  double rho = 0.1;
  double epsilon = 0.1;
  std::uint64_t seed = 0;
  double target1 = 400.0;
  double target2 = 600.0;
  std::vector<double> sweep{0.001, 0.01, 0.1};
  int sweep_seeds = 20;
};

void WriteOrPrint(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    WriteText(path, text);
  }
}

int RunSolve(const SolveArgs& a, std::ostream& out) {
  DenseMatrix mat = LoadMatrix(a.input);
  DenseMatrix rhs = LoadMatrix(a.rhs);
  if (rhs.rows() == 1 && rhs.cols() == mat.rows() && mat.rows() > 1) rhs.transposeInPlace();
  std::optional<DenseVector> weights;
  if (!a.weights.empty()) weights = LoadVector(a.weights);
  if (a.variant == "weighted" && !weights) {
    throw Error(ErrorKind::kInvalidConfig, "--variant weighted needs --weights");
  }
  if (a.variant != "weighted" && weights) {
    throw Error(ErrorKind::kInvalidConfig, "--weights is only used by --variant weighted");
  }
  if (rhs.cols() > 1 && a.variant != "generalized" && a.variant != "two-stage") {
    throw Error(ErrorKind::kInvalidConfig, "multi-column right-hand side needs --variant generalized");
  }
  const RegressionInstance inst(std::move(mat), std::move(rhs), a.p, weights);

  SamplerConfig cfg;
  cfg.p = a.p;
  cfg.d = std::max<Eigen::Index>(inst.rank(), 1);
  cfg.epsilon = a.epsilon;
  cfg.r1_scale = a.r1_scale;
  cfg.r2_scale = a.r2_scale;
  cfg.Validate();

  PipelineOptions opts;
  opts.stages = a.stages;
  opts.compute_exact = a.exact;
  opts.force_exact = a.exact;

  SolveReport report;
  if (a.variant == "two-stage") {
    report = TwoStageSolve(inst, cfg, a.seed, opts);
  } else if (a.variant == "weighted") {
    report = WeightedTwoStage(inst, cfg, a.seed, opts);
  } else if (a.variant == "generalized") {
    report = GeneralizedTwoStage(inst, cfg, a.seed, opts);
  } else {
    const double r = a.r ? *a.r : R2Default(cfg);
    if (a.variant == "oracle") {
      DenseVector x_ref;
      if (!a.x_ref.empty()) {
        x_ref = LoadVector(a.x_ref);
      } else {
        x_ref = ExactSolve(inst, opts.solver).x.col(0);
      }
      report = SingleStageOracleSolve(inst, x_ref, cfg, r, a.seed, opts);
    } else {
      report = SingleStageAugmentedSolve(inst, cfg, r, a.seed, opts);
    }
  }
  WriteOrPrint(a.output, DumpJson(ReportToJson(report)), out);
  return report.ok ? kExitOk : kExitSolve;
}

int RunGen(const GenArgs& a, std::ostream& out) {
  const NoiseModel model = a.noise == "gaussian" ? NoiseModel::kGaussian : NoiseModel::kSparseGross;
  const ReferenceInstance inst = GenerateReferenceInstance(a.n, a.d, a.p, model, a.rho, a.seed);
  WriteInstanceFiles(inst, a.out);
  out << "wrote " << (std::filesystem::path(a.out) / "A.csv").string() << ", b.csv, meta.json\n";
  return kExitOk;
}

int RunCertify(const CertifyArgs& a, std::ostream& out) {
  const DenseMatrix mat = LoadMatrix(a.input);
  if (!AllFinite(mat)) throw Error(ErrorKind::kNonFinite, "input matrix has non-finite entries");
  const WellConditionedBasis basis =
      BuildWellConditionedBasis(mat, a.p, a.tol, DeriveSeed(a.seed, "conditioning"));
  const BasisCertificate cert = CertifyBasis(basis, a.probes, DeriveSeed(a.seed, "probes"));
  const double spanner = SpannerCoefficients(basis, mat, a.probes, DeriveSeed(a.seed, "spanner"));
  out << DumpJson(CertificateToJson(basis, cert, spanner));
  return kExitOk;
}

std::string PLabel(double p) {
  std::ostringstream ss;
  ss << p;
  std::string s = ss.str();
  std::replace(s.begin(), s.end(), '.', '_');
  return s;
}

double Median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

int RunBench(const BenchArgs& a, std::ostream& out) {
  std::filesystem::create_directories(a.out);
  Json aggregate;
  aggregate["family"] = a.family;
  aggregate["n"] = a.n;
  aggregate["d"] = a.d;
  aggregate["rho"] = a.rho;
  aggregate["epsilon"] = a.epsilon;
  aggregate["seed"] = a.seed;
  aggregate["seeds"] = a.seeds;
  aggregate["target_stage1_count"] = a.target1;
  aggregate["target_stage2_count"] = a.target2;
  Json runs = Json::array();
  for (const double p : a.ps) {
    const std::uint64_t pseed = DeriveSeed(a.seed, "bench-p" + PLabel(p));
    const ReferenceInstance ref =
        GenerateReferenceInstance(a.n, a.d, p, NoiseModel::kSparseGross, a.rho,
                                  DeriveSeed(pseed, "instance"));
    const RegressionInstance inst(ref.a, ref.b, p);
    const PreparedBasis prep = PrepareBasis(inst, DeriveSeed(pseed, "conditioning"));
    SamplerConfig cfg;
    cfg.p = p;
    cfg.d = inst.rank();
    cfg.epsilon = a.epsilon;
    cfg.Validate();
    const SamplerConfig cal =
        CalibrateWithPilot(inst, prep, cfg, a.target1, a.target2, pseed);
    const LemmaStatistics stats = ComputeLemmaStatistics(inst, cal, a.seeds, pseed);

    Json run;
    run["p"] = p;
    run["r1_scale"] = cal.r1_scale;
    run["r2_scale"] = cal.r2_scale;
    run["statistics"] = StatisticsToJson(stats);

    // Ratio sweep over absolute r2 scales with stage 1 held at its calibration.
    Json sweep = Json::array();
    PipelineOptions opts;
    opts.compute_exact = true;
    for (const double scale : a.sweep) {
      SamplerConfig sc = cal;
      sc.r2_scale = scale;
      std::vector<double> ratios;
      std::vector<double> counts;
      int failures = 0;
      for (int s = 0; s < a.sweep_seeds; ++s) {
        const SolveReport rep =
            TwoStageSolve(inst, sc, DeriveSeed(pseed, "sweep", static_cast<std::uint64_t>(s)),
                          opts, &prep);
        if (!rep.ok || !rep.approx_ratio) {
          ++failures;
          continue;
        }
        ratios.push_back(*rep.approx_ratio);
        counts.push_back(static_cast<double>(rep.coreset()->actual_count()));
      }
      Json row;
      row["r2_scale"] = scale;
      row["runs"] = a.sweep_seeds;
      row["failures"] = failures;
      row["median_approx_ratio"] = Median(ratios);
      row["median_coreset_size"] = Median(counts);
      sweep.push_back(std::move(row));
    }
    run["ratio_sweep"] = std::move(sweep);
    const std::string file = "stats_p" + PLabel(p) + ".json";
    WriteText(std::filesystem::path(a.out) / file, DumpJson(run));
    runs.push_back({{"p", p},
                    {"file", file},
                    {"freq_a", stats.freq_sampled_opt_residual},
                    {"freq_b", stats.freq_stage1_constant},
                    {"freq_c", stats.freq_stage2_opt_residual},
                    {"freq_d", stats.freq_stage_gap},
                    {"freq_e", stats.freq_final_relative},
                    {"median_final_ratio", stats.median_final_ratio}});
    out << "p=" << p << " freq(a)=" << stats.freq_sampled_opt_residual
        << " freq(e)=" << stats.freq_final_relative
        << " median ratio=" << stats.median_final_ratio << "\n";
  }
  aggregate["runs"] = std::move(runs);
  WriteText(std::filesystem::path(a.out) / "bench.json", DumpJson(aggregate));
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"lp regression coresets by two-stage row sampling", "lpc"};
  app.require_subcommand(1);

  SolveArgs sa;
  CLI::App* solve = app.add_subcommand("solve", "Solve an lp regression instance");
  solve->add_option("--input", sa.input, "Design matrix A (CSV or MatrixMarket)")
      ->required()->check(CLI::ExistingFile);
  solve->add_option("--rhs", sa.rhs, "Right-hand side b or B")->required()->check(CLI::ExistingFile);
  solve->add_option("--p", sa.p, "Norm exponent")->required()->check(CLI::Range(1.0, 1e6));
  solve->add_option("--epsilon", sa.epsilon, "Target relative error, in (0, 1/7)")
      ->check(CLI::Range(0.0, 1.0 / 7.0));
  solve->add_option("--seed", sa.seed, "Master seed");
  solve->add_option("--r1-scale", sa.r1_scale, "Multiplier on the stage-1 rate")
      ->check(CLI::PositiveNumber);
  solve->add_option("--r2-scale", sa.r2_scale, "Multiplier on the stage-2 rate")
      ->check(CLI::PositiveNumber);
  solve->add_option("--stages", sa.stages, "1 or 2")->check(CLI::IsMember({1, 2}));
  solve->add_option("--variant", sa.variant, "Pipeline variant")
      ->check(CLI::IsMember({"two-stage", "oracle", "augmented", "generalized", "weighted"}));
  solve->add_option("--weights", sa.weights, "Row weights for --variant weighted")
      ->check(CLI::ExistingFile);
  solve->add_option("--x-ref", sa.x_ref, "Reference solution for --variant oracle")
      ->check(CLI::ExistingFile);
  solve->add_option("--r", sa.r, "Rate for the single-stage variants")->check(CLI::PositiveNumber);
  solve->add_flag("--exact", sa.exact, "Also solve the full problem and report the ratio");
  solve->add_option("--output", sa.output, "Report path (default stdout)");
  solve->add_option("--format", sa.format, "Report format")->check(CLI::IsMember({"json"}));

  GenArgs ga;
  CLI::App* gen = app.add_subcommand("gen", "Generate a reference-family instance");
  gen->add_option("--n", ga.n)->required()->check(CLI::PositiveNumber);
  gen->add_option("--d", ga.d)->required()->check(CLI::PositiveNumber);
  gen->add_option("--p", ga.p)->check(CLI::Range(1.0, 1e6));
  gen->add_option("--rho", ga.rho, "Fraction of grossly corrupted rows")->check(CLI::Range(0.0, 1.0));
  gen->add_option("--seed", ga.seed);
  gen->add_option("--noise", ga.noise)->check(CLI::IsMember({"gaussian", "sparse-gross"}));
  gen->add_option("--out", ga.out, "Output directory")->required();

  CertifyArgs ca;
  CLI::App* certify = app.add_subcommand("certify", "Print well-conditioned basis certificates");
  certify->add_option("--input", ca.input)->required()->check(CLI::ExistingFile);
  certify->add_option("--p", ca.p)->required()->check(CLI::Range(1.0, 1e6));
  certify->add_option("--tol", ca.tol, "Rounding tolerance")->check(CLI::Range(1e-6, 1.0));
  certify->add_option("--probes", ca.probes)->check(CLI::PositiveNumber);
  certify->add_option("--seed", ca.seed);

  BenchArgs ba;
  CLI::App* bench = app.add_subcommand("bench", "Lemma statistics and ratio sweeps");
  bench->add_option("--family", ba.family)->check(CLI::IsMember({"reference"}));
  bench->add_option("--seeds", ba.seeds)->check(CLI::PositiveNumber);
  bench->add_option("--p", ba.ps, "Comma separated exponents")->delimiter(',')
      ->check(CLI::Range(1.0, 1e6));
  bench->add_option("--out", ba.out, "Output directory")->required();
  bench->add_option("--n", ba.n)->check(CLI::PositiveNumber);
  bench->add_option("--d", ba.d)->check(CLI::PositiveNumber);
  bench->add_option("--rho", ba.rho)->check(CLI::Range(0.0, 1.0));
  bench->add_option("--epsilon", ba.epsilon)->check(CLI::Range(0.0, 1.0 / 7.0));
  bench->add_option("--seed", ba.seed);
  bench->add_option("--target1", ba.target1, "Expected stage-1 sample size")
      ->check(CLI::PositiveNumber);
  bench->add_option("--target2", ba.target2, "Expected stage-2 sample size")
      ->check(CLI::PositiveNumber);
  bench->add_option("--sweep", ba.sweep, "r2 scales for the ratio sweep")->delimiter(',')
      ->check(CLI::PositiveNumber);
  bench->add_option("--sweep-seeds", ba.sweep_seeds)->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*solve) return RunSolve(sa, out);
    if (*gen) return RunGen(ga, out);
    if (*certify) return RunCertify(ca, out);
    return RunBench(ba, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::kStageFailure ? kExitSolve : kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}

}  // namespace lpcore
