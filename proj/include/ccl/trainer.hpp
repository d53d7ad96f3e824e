#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccl/encoder.hpp"
#include "ccl/losses.hpp"
#include "ccl/matrix.hpp"
#include "ccl/metrics.hpp"
#include "ccl/rng.hpp"
#include "ccl/synth.hpp"
#include "ccl/tpm.hpp"

namespace ccl::trainer {

struct EncoderSpec {
    encoder::EncoderKind kind = encoder::EncoderKind::mlp;
    std::size_t hidden = 32;
    std::size_t dim = 16;
};

struct TrainConfig {
    losses::LossConfig loss;
    std::size_t batch_size = 1000;
    std::size_t epochs = 300;
    std::size_t checkpoint_every = 5;
    encoder::OptimizerSpec optimizer;
    EncoderSpec encoder;
    std::uint64_t seed = 0;
};

/// Throws std::invalid_argument for B < 2, epochs < 1, checkpoint_every < 1, lr < 0
/// or an invalid loss config.
void validate(const TrainConfig& cfg);

/// One contrastive batch: B items, two independent views each. Anchor b's
/// positive is candidate b; every other candidate is a negative.
struct Batch {
    std::vector<std::size_t> items;
    Matrix anchor_features;
    Matrix candidate_features;
    std::vector<std::size_t> anchor_labels;     // view classes
    std::vector<std::size_t> candidate_labels;
};

/// Views for the given items, in order.
Batch make_batch(const synth::Dataset& data, std::span<const std::size_t> items, const FeatureSpace& space,
                 Rng& rng);

/// B items drawn without replacement from the whole dataset.
Batch build_batch(const synth::Dataset& data, const FeatureSpace& space, std::size_t batch_size, Rng& rng);

struct MetricsRecord {
    std::size_t epoch = 0;
    double loss = 0.0;  // mean training loss over the epoch's batches
    metrics::MeasuredP measured_p;
    Matrix class_sim;
    metrics::SimilaritySummary similarity;
    metrics::Spectrum spectrum;
    double mae = 0.0;   // symmetrized measured P vs. reference target
};

struct RunResult {
    std::string run_id;
    TrainConfig config;
    Matrix reference_target;  // InfoNCE target, or the scaled target for SC-InfoNCE
    std::vector<MetricsRecord> records;
    std::vector<encoder::Parameter> final_params;
    double seconds = 0.0;
};

/// Target the measured P is compared with for this loss and batch size.
Matrix reference_target(const FeatureSpace& space, const TrainConfig& cfg);

/**
 * Trains on the dataset's train split and evaluates on a fixed set of views of
 * the test split (same B as training). Records a checkpoint every
 * `checkpoint_every` epochs and after the last epoch.
 * Throws NumericalError on a non-finite loss.
 */
RunResult train(const TrainConfig& cfg, const synth::Dataset& data, const FeatureSpace& space,
                std::string run_id = "run");

/// Summary over the trailing fraction of checkpoints (at least one).
struct FinalMetrics {
    Matrix measured_p;  // symmetrized, averaged over the tail
    Matrix class_sim;
    double mae = 0.0;
    std::vector<double> row_mae;
    metrics::SimilaritySummary similarity;
    std::size_t checkpoints = 0;
};

FinalMetrics final_metrics(const RunResult& run, double tail_fraction = 0.1);

/// Mean over class pairs of the variance of m_ij across the trailing checkpoints.
double checkpoint_variance(const RunResult& run, double tail_fraction = 0.5);

enum class SweepAxis { delta, gamma, tau, batch_size, lr };

std::string_view to_string(SweepAxis axis);
/// Throws ConfigError for an unknown name.
SweepAxis parse_axis(std::string_view name);

/// Applies `value` on `axis` to `cfg`. Gamma values are divided by (B - 1).
TrainConfig with_axis_value(TrainConfig cfg, SweepAxis axis, double value);

struct SweepPoint {
    double value = 0.0;
    std::size_t repeat = 0;
    RunResult result;
};

/**
 * One run per (value, repeat). Repeat r uses seed base.seed + r for
 * training and the dataset; results are sorted by (value, repeat) whatever the
 * completion order. Up to `jobs` runs execute concurrently.
 */
std::vector<SweepPoint> sweep(const TrainConfig& base, const synth::SyntheticDatasetConfig& data_cfg,
                              const FeatureSpace& space, SweepAxis axis, std::span<const double> values,
                              std::size_t repeats, std::size_t jobs = 1);

}  // namespace ccl::trainer
