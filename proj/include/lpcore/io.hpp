#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "lpcore/linalg.hpp"
#include "lpcore/pipeline.hpp"

namespace lpcore {

enum class MatrixFormat { kAuto, kCsv, kMatrixMarket };

// CSV: comma separated rows; a first line that does not parse as numbers is
// treated as a header. Errors carry "<source>:<line>".
DenseMatrix ParseCsv(std::string_view text, const std::string& source = "<csv>");

// MatrixMarket "matrix array|coordinate real|integer general". Coordinate
// duplicates are summed.
DenseMatrix ParseMatrixMarket(std::string_view text,
                              const std::string& source = "<mtx>");

// kAuto picks MatrixMarket for .mtx/.mm files or a %%MatrixMarket banner.
DenseMatrix LoadMatrix(const std::filesystem::path& path,
                       MatrixFormat format = MatrixFormat::kAuto);

// Column vector from a one-column file (or a single row).
DenseVector LoadVector(const std::filesystem::path& path,
                       MatrixFormat format = MatrixFormat::kAuto);

std::string FormatCsv(const DenseMatrix& m);
void WriteCsv(const std::filesystem::path& path, const DenseMatrix& m);
void WriteText(const std::filesystem::path& path, const std::string& text);

nlohmann::ordered_json ReportToJson(const SolveReport& report);
nlohmann::ordered_json StatisticsToJson(const LemmaStatistics& stats);
nlohmann::ordered_json CertificateToJson(const WellConditionedBasis& basis,
                                         const BasisCertificate& cert,
                                         double spanner_max);

// Serialized report text (2-space indent, trailing newline).
std::string DumpJson(const nlohmann::ordered_json& j);
void EmitReport(const SolveReport& report, const std::filesystem::path& path);

// Writes A.csv, b.csv and meta.json into dir.
void WriteInstanceFiles(const ReferenceInstance& inst,
                        const std::filesystem::path& dir);

}  // namespace lpcore
