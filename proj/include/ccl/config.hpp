#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/synth.hpp"
#include "ccl/tpm.hpp"
#include "ccl/trainer.hpp"

namespace ccl::config {

struct FeatureSpaceSpec {
    Matrix rows;
    std::vector<std::size_t> row_lines;  // source line of each `row =`
    std::vector<std::string> labels;
    std::vector<double> prior;  // empty: uniform
    std::size_t prior_line = 0;
};

struct PredictSpec {
    std::optional<std::size_t> n;  // defaults to the training batch size
    double delta = 1.0;
    double gamma = 0.0;
};

struct ExperimentConfig {
    FeatureSpaceSpec feature_space;
    synth::SyntheticDatasetConfig dataset;
    trainer::TrainConfig train;
    PredictSpec predict;
    std::uint64_t seed = 0;
    std::filesystem::path out = "out";

    std::size_t candidate_count() const { return predict.n.value_or(train.batch_size); }
};

/**
 * Parses the key-value config format:
 *
 *   # comment
 *   [section]
 *   key = value
 *
 * Unknown sections or keys, duplicate keys and malformed values throw
 * ConfigError carrying the line number. `[feature_space]` takes one
 * `row = a, b, c` line per TPM row.
 */
ExperimentConfig parse(std::istream& in);
ExperimentConfig load(const std::filesystem::path& path);

/// Validated feature space; violations become ConfigError naming the row's line.
FeatureSpace make_feature_space(const ExperimentConfig& cfg);

/// Overrides the run seed (dataset and training seeds follow).
void apply_seed(ExperimentConfig& cfg, std::uint64_t seed);

}  // namespace ccl::config
