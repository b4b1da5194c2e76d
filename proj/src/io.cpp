#include "lpcore/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>
#include <vector>

#include "lpcore/error.hpp"

namespace lpcore {

namespace {

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool ParseDouble(std::string_view s, double& out) {
  s = Trim(s);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string_view> SplitLines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
  }
  return lines;
}

std::vector<std::string_view> SplitFields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t end = line.find(sep, start);
    if (end == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::vector<std::string_view> SplitWhitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void ParseFail(const std::string& source, std::size_t line,
                            const std::string& what) {
  throw Error(ErrorKind::kParse, source + ":" + std::to_string(line) + ": " + what);
}

std::string Lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

DenseMatrix ParseCsv(std::string_view text, const std::string& source) {
  const std::vector<std::string_view> lines = SplitLines(text);
  std::vector<std::vector<double>> rows;
  std::size_t width = 0;
  bool first_content = true;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string_view line = Trim(lines[ln]);
    if (line.empty()) continue;
    const auto fields = SplitFields(line, ',');
    std::vector<double> values(fields.size());
    bool numeric = true;
    std::size_t bad = 0;
    for (std::size_t f = 0; f < fields.size(); ++f) {
      if (!ParseDouble(fields[f], values[f])) {
        numeric = false;
        bad = f;
        break;
      }
    }
    if (!numeric) {
      if (first_content) {
        first_content = false;  // header
        continue;
      }
      ParseFail(source, ln + 1,
                "non-numeric cell " + std::to_string(bad + 1) + " '" +
                    std::string(Trim(fields[bad])) + "'");
    }
    first_content = false;
    if (rows.empty()) {
      width = values.size();
    } else if (values.size() != width) {
      ParseFail(source, ln + 1,
                "ragged row: expected " + std::to_string(width) + " fields, found " +
                    std::to_string(values.size()));
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw Error(ErrorKind::kParse, source + ": no numeric rows");
  DenseMatrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return m;
}

DenseMatrix ParseMatrixMarket(std::string_view text, const std::string& source) {
  const std::vector<std::string_view> lines = SplitLines(text);
  if (lines.empty()) ParseFail(source, 1, "empty file");
  const auto banner = SplitWhitespace(lines[0]);
  if (banner.size() != 5 || Lower(banner[0]) != "%%matrixmarket" ||
      Lower(banner[1]) != "matrix") {
    ParseFail(source, 1, "expected '%%MatrixMarket matrix <layout> <field> <symmetry>'");
  }
  const std::string layout = Lower(banner[2]);
  const std::string field = Lower(banner[3]);
  const std::string symmetry = Lower(banner[4]);
  if (layout != "array" && layout != "coordinate") {
    ParseFail(source, 1, "unsupported layout '" + layout + "'");
  }
  if (field != "real" && field != "integer" && field != "double") {
    ParseFail(source, 1, "unsupported field '" + field + "'");
  }
  if (symmetry != "general") ParseFail(source, 1, "unsupported symmetry '" + symmetry + "'");

  std::size_t ln = 1;
  auto next_content = [&]() -> std::pair<std::size_t, std::string_view> {
    while (ln < lines.size()) {
      const std::string_view l = Trim(lines[ln]);
      ++ln;
      if (l.empty() || l.front() == '%') continue;
      return {ln, l};
    }
    return {0, {}};
  };
  auto parse_count = [&](std::string_view tok, std::size_t line) {
    long long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || v < 0) {
      ParseFail(source, line, "bad integer '" + std::string(tok) + "'");
    }
    return v;
  };

  const auto [size_line, size_text] = next_content();
  if (size_line == 0) ParseFail(source, lines.size(), "missing size line");
  const auto dims = SplitWhitespace(size_text);
  const std::size_t expected_dims = layout == "array" ? 2 : 3;
  if (dims.size() != expected_dims) ParseFail(source, size_line, "malformed size line");
  const long long rows = parse_count(dims[0], size_line);
  const long long cols = parse_count(dims[1], size_line);
  if (rows < 1 || cols < 1) ParseFail(source, size_line, "matrix dimensions must be positive");
  DenseMatrix m = DenseMatrix::Zero(rows, cols);

  if (layout == "array") {
    const long long total = rows * cols;
    for (long long k = 0; k < total; ++k) {
      const auto [line, content] = next_content();
      if (line == 0) ParseFail(source, lines.size(), "expected " + std::to_string(total) + " entries");
      const auto toks = SplitWhitespace(content);
      double v = 0.0;
      if (toks.size() != 1 || !ParseDouble(toks[0], v)) {
        ParseFail(source, line, "bad array entry '" + std::string(content) + "'");
      }
      m(k % rows, k / rows) = v;  // column major
    }
  } else {
    const long long nnz = parse_count(dims[2], size_line);
    for (long long k = 0; k < nnz; ++k) {
      const auto [line, content] = next_content();
      if (line == 0) ParseFail(source, lines.size(), "expected " + std::to_string(nnz) + " entries");
      const auto toks = SplitWhitespace(content);
      if (toks.size() != 3) ParseFail(source, line, "coordinate entry needs 'i j value'");
      const long long i = parse_count(toks[0], line);
      const long long j = parse_count(toks[1], line);
      double v = 0.0;
      if (!ParseDouble(toks[2], v)) ParseFail(source, line, "bad value '" + std::string(toks[2]) + "'");
      if (i < 1 || i > rows || j < 1 || j > cols) ParseFail(source, line, "index out of range");
      m(i - 1, j - 1) += v;
    }
  }
  if (const auto [line, content] = next_content(); line != 0) {
    ParseFail(source, line, "trailing data after the declared entries");
  }
  return m;
}

DenseMatrix LoadMatrix(const std::filesystem::path& path, MatrixFormat format) {
  const std::string text = ReadFile(path);
  if (format == MatrixFormat::kAuto) {
    const std::string ext = Lower(path.extension().string());
    const bool banner = text.rfind("%%MatrixMarket", 0) == 0 ||
                        Lower(text.substr(0, 14)) == "%%matrixmarket";
    format = (ext == ".mtx" || ext == ".mm" || banner) ? MatrixFormat::kMatrixMarket
                                                        : MatrixFormat::kCsv;
  }
  return format == MatrixFormat::kMatrixMarket ? ParseMatrixMarket(text, path.string())
                                               : ParseCsv(text, path.string());
}

DenseVector LoadVector(const std::filesystem::path& path, MatrixFormat format) {
  const DenseMatrix m = LoadMatrix(path, format);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw Error(ErrorKind::kParse, path.string() + ": expected a single column");
}

std::string FormatCsv(const DenseMatrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out += ',';
      out += FormatDouble(m(i, j));
    }
    out += '\n';
  }
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

void WriteCsv(const std::filesystem::path& path, const DenseMatrix& m) {
  WriteText(path, FormatCsv(m));
}

namespace {

using Json = nlohmann::ordered_json;

Json MatrixJson(const DenseMatrix& x) {
  if (x.cols() == 1) {
    Json arr = Json::array();
    for (Eigen::Index i = 0; i < x.rows(); ++i) arr.push_back(x(i, 0));
    return arr;
  }
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < x.cols(); ++j) row.push_back(x(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json StageJson(const StageOutcome& s, bool with_coreset) {
  Json j;
  j["expected_count"] = s.plan.expected_count;
  j["actual_count"] = s.plan.actual_count();
  j["objective_full"] = s.full_objective;
  j["objective_sampled"] = s.sampled_objective;
  j["rate"] = s.rate;
  j["plan_seed"] = s.plan.seed;
  j["resamples"] = s.resamples;
  j["exact_passthrough"] = s.exact_passthrough;
  if (with_coreset) {
    Json idx = Json::array();
    for (const Eigen::Index i : s.plan.indices) idx.push_back(i);
    j["coreset_indices"] = std::move(idx);
    j["scales"] = s.plan.scales;
  }
  return j;
}

}  // namespace

Json ReportToJson(const SolveReport& report) {
  Json j;
  j["status"] = report.ok ? "ok" : "failed";
  if (!report.ok) j["error"] = report.error;
  j["variant"] = report.variant;
  j["n"] = report.n;
  j["m"] = report.m;
  j["d"] = report.d;
  j["k"] = report.k;
  j["p"] = report.p;
  j["epsilon"] = report.config.epsilon;
  j["seed"] = report.seed;
  for (std::size_t s = 0; s < report.stages.size(); ++s) {
    const bool last = s + 1 == report.stages.size();
    j["stage" + std::to_string(report.stages[s].stage)] = StageJson(report.stages[s], last);
  }
  if (report.ok && !report.stages.empty()) {
    j["objective"] = report.objective;
    j["x"] = MatrixJson(report.x);
  }
  if (report.z_exact) j["Z_exact"] = *report.z_exact;
  if (report.approx_ratio) j["approx_ratio"] = *report.approx_ratio;
  j["certificates"] = {{"alpha_cert", report.alpha_cert},
                       {"beta_cert", report.beta_cert},
                       {"kappa_cert", report.kappa_cert}};
  if (!report.warning.empty()) j["warning"] = report.warning;
  Json timings = Json::object();
  for (const auto& [k, v] : report.timings_ms) timings[k] = v;
  j["timings_ms"] = std::move(timings);
  const SamplerConfig& c = report.config;
  j["config"] = {{"p", c.p},
                 {"d", c.d},
                 {"epsilon", c.epsilon},
                 {"delta", c.delta},
                 {"k", c.k()},
                 {"r1_scale", c.r1_scale},
                 {"r2_scale", c.r2_scale},
                 {"stages", report.stages_requested},
                 {"variant", report.variant}};
  return j;
}

Json StatisticsToJson(const LemmaStatistics& s) {
  Json j;
  j["p"] = s.p;
  j["epsilon"] = s.epsilon;
  j["runs"] = s.runs;
  j["failures"] = s.failures;
  j["Z_exact"] = s.z_exact;
  j["freq_a_sampled_opt_residual_le_3Z"] = s.freq_sampled_opt_residual;
  j["target_a"] = s.target_a;
  j["freq_b_stage1_ratio_le_8"] = s.freq_stage1_constant;
  j["freq_c_stage2_opt_residual_le_1_plus_eps"] = s.freq_stage2_opt_residual;
  j["freq_d_stage_gap_le_12Z"] = s.freq_stage_gap;
  j["freq_e_final_ratio_le_1_plus_7eps"] = s.freq_final_relative;
  j["median_stage1_ratio"] = s.median_stage1_ratio;
  j["median_final_ratio"] = s.median_final_ratio;
  j["mean_stage1_expected_count"] = s.mean_stage1_expected;
  j["mean_stage2_expected_count"] = s.mean_stage2_expected;
  j["stage1_ratios"] = s.stage1_ratios;
  j["final_ratios"] = s.final_ratios;
  j["stage1_counts"] = s.stage1_counts;
  j["stage2_counts"] = s.stage2_counts;
  return j;
}

Json CertificateToJson(const WellConditionedBasis& basis, const BasisCertificate& cert,
                       double spanner_max) {
  Json j;
  j["p"] = basis.p;
  j["d"] = basis.rank();
  j["tol"] = basis.tol;
  j["alpha_cert"] = basis.alpha_cert;
  j["beta_cert"] = basis.beta_cert;
  j["kappa_cert"] = basis.kappa_cert;
  j["rounding_converged"] = basis.rounding_converged;
  j["alpha_measured"] = cert.alpha_measured;
  j["beta_measured_lower"] = cert.beta_measured_lower;
  j["spanner_max_coefficient_norm"] = spanner_max;
  if (!basis.warning.empty()) j["warning"] = basis.warning;
  return j;
}

std::string DumpJson(const Json& j) { return j.dump(2) + "\n"; }

void EmitReport(const SolveReport& report, const std::filesystem::path& path) {
  WriteText(path, DumpJson(ReportToJson(report)));
}

void WriteInstanceFiles(const ReferenceInstance& inst, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  WriteCsv(dir / "A.csv", inst.a);
  WriteCsv(dir / "b.csv", inst.b);
  Json meta;
  meta["n"] = inst.n;
  meta["d"] = inst.d;
  meta["p"] = inst.p;
  meta["noise_model"] = inst.noise_model == NoiseModel::kGaussian ? "gaussian" : "sparse-gross";
  meta["rho"] = inst.rho;
  meta["seed"] = inst.seed;
  meta["noise_sigma"] = 0.1;
  std::vector<double> planted(inst.x_planted.data(), inst.x_planted.data() + inst.x_planted.size());
  meta["x_planted"] = planted;
  meta["corrupted_count"] = inst.corrupted_rows.size();
  Json rows = Json::array();
  for (const Eigen::Index r : inst.corrupted_rows) rows.push_back(r);
  meta["corrupted_rows"] = std::move(rows);
  WriteText(dir / "meta.json", DumpJson(meta));
}

}  // namespace lpcore
