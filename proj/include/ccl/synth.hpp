#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/rng.hpp"
#include "ccl/tpm.hpp"

namespace ccl::synth {

enum class Generator { vector, graph };

struct GraphConfig {
    std::size_t nodes = 20;
    std::size_t edges = 40;
    double rewire = 0.2;
    std::size_t degree_bins = 16;  // last bin collects every degree >= degree_bins - 1
};

struct SyntheticDatasetConfig {
    std::size_t n_classes = 3;
    std::size_t n_items = 4000;
    double noise_sigma = 0.1;
    std::size_t feature_dim = 16;  // vector generator only; graph summaries size themselves
    double train_fraction = 0.5;
    std::uint64_t seed = 0;
    Generator generator = Generator::vector;
    GraphConfig graph;
};

/// Throws std::invalid_argument when the config cannot produce a dataset.
void validate(const SyntheticDatasetConfig& cfg);

struct Item {
    std::size_t id = 0;
    std::size_t source_class = 0;
    std::vector<double> features;
};

struct View {
    std::size_t parent_id = 0;
    std::size_t view_class = 0;
    std::vector<double> features;
};

struct Graph {
    std::size_t nodes = 0;
    std::vector<std::size_t> node_feature;  // one-hot category per node
    std::vector<std::pair<std::size_t, std::size_t>> edges;  // u < v, unique
};

/// Items plus what is needed to render fresh views of any class.
class Dataset {
public:
    Dataset(SyntheticDatasetConfig cfg, std::vector<Item> items, Matrix prototypes,
            std::vector<Graph> templates);

    const SyntheticDatasetConfig& config() const noexcept { return cfg_; }
    const std::vector<Item>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    std::size_t n_classes() const noexcept { return cfg_.n_classes; }
    std::size_t feature_dim() const noexcept { return feature_dim_; }
    const Matrix& prototypes() const noexcept { return prototypes_; }
    const std::vector<Graph>& templates() const noexcept { return templates_; }

    /// Fresh feature vector for an instance of class `cls`: prototype plus noise,
    /// or the summary of a rewired class template.
    std::vector<double> render(std::size_t cls, Rng& rng) const;

private:
    SyntheticDatasetConfig cfg_;
    std::vector<Item> items_;
    Matrix prototypes_;
    std::vector<Graph> templates_;
    std::size_t feature_dim_ = 0;
};

/// Class-balanced dataset (counts within one of each other), deterministic under cfg.seed.
Dataset generate(const SyntheticDatasetConfig& cfg);

/// `generate` with the graph-summary generator forced on.
Dataset graph_summary_generate(SyntheticDatasetConfig cfg);

/// View class drawn from the TPM row of the item's class; features rendered fresh.
View augment(const Item& item, const FeatureSpace& space, const Dataset& data, Rng& rng);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Shuffled train/test partition of item indices. Only the split seed matters.
Split split(const Dataset& data, double train_fraction, std::uint64_t seed);

/// CSV `id,source_class,feature_0..feature_{d-1}`.
void write_csv(const Dataset& data, std::ostream& out);

// Graph generator pieces.

/// Class-specific random graph; higher class indices concentrate edges on low-index nodes.
Graph class_template(std::size_t cls, std::size_t n_classes, const GraphConfig& cfg, Rng& rng);
/// Replaces each edge with probability p by a uniformly chosen non-edge.
Graph rewire(const Graph& g, double p, Rng& rng);
/// Node v of `g` becomes node perm[v].
Graph relabel(const Graph& g, std::span<const std::size_t> perm);
/// Degree histogram (normalized by node count) followed by the node-category histogram.
std::vector<double> summarize(const Graph& g, std::size_t categories, std::size_t degree_bins);

}  // namespace ccl::synth
