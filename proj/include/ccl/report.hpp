#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>

#include <json.hpp>

#include "ccl/theory.hpp"
#include "ccl/tpm.hpp"
#include "ccl/trainer.hpp"

// Machine-readable artifacts. Column layouts are documented in README.md and
// are kept stable; doubles are written with 17 significant digits.

namespace ccl::report {

using Json = nlohmann::ordered_json;

/// `{:.17g}`
std::string num(double v);

Json to_json(const Matrix& m);
Json to_json(const trainer::TrainConfig& cfg);

/// predicted.csv: `i,j,c1,c2,target` (0-based indices).
void write_prediction_csv(const theory::ConvergencePrediction& p, std::ostream& out);
/// predicted.json: TPM hash, n, delta, gamma, labels, marginal, matrices and scaled-target flags.
Json prediction_json(const FeatureSpace& space, const theory::ConvergencePrediction& p,
                     const theory::ScaledTarget& scaled, const theory::ScaledTargetConfig& scfg);

/// Header of metrics.csv for m classes.
std::string metrics_header(std::size_t m);
/// One metrics.csv row per checkpoint of the run.
void write_metrics_rows(const trainer::RunResult& run, std::ostream& out);

/// report.json contents for a finished run.
Json run_report(const trainer::RunResult& run, const FeatureSpace& space);

/// Writes metrics.csv, report.json, run.json and params.{json,csv} into dir.
void write_run(const trainer::RunResult& run, const FeatureSpace& space, const std::filesystem::path& dir);

/// report.json for a run that aborted on a numerical failure.
void write_failure(const std::filesystem::path& dir, const std::string& diagnostic);

/// summary.csv header and one row per sweep point.
std::string summary_header();
void write_summary_row(const trainer::SweepPoint& point, trainer::SweepAxis axis, std::ostream& out);

Json bounds_json(const theory::ErrorBoundReport& r, std::size_t m, std::size_t n_samples, double confidence_delta,
                 double epsilon);

/// Writes text to path, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace ccl::report
