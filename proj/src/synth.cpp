#include "ccl/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include <fmt/format.h>

namespace ccl::synth {

void validate(const SyntheticDatasetConfig& cfg) {
    if (cfg.n_classes < 2) throw std::invalid_argument("dataset: n_classes must be >= 2");
    if (cfg.n_items < cfg.n_classes) throw std::invalid_argument("dataset: n_items must be >= n_classes");
    if (!(cfg.noise_sigma >= 0.0) || !std::isfinite(cfg.noise_sigma)) {
        throw std::invalid_argument("dataset: noise_sigma must be finite and >= 0");
    }
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0)) {
        throw std::invalid_argument("dataset: train_fraction must lie in (0, 1)");
    }
    if (cfg.generator == Generator::vector && cfg.feature_dim < cfg.n_classes) {
        throw std::invalid_argument(fmt::format("dataset: feature_dim {} < n_classes {}", cfg.feature_dim,
                                                cfg.n_classes));
    }
    if (cfg.generator == Generator::graph) {
        const auto& g = cfg.graph;
        const std::size_t max_edges = g.nodes * (g.nodes - 1) / 2;
        if (g.nodes < 2 || g.edges > max_edges) throw std::invalid_argument("dataset: graph edge count exceeds n(n-1)/2");
        if (!(g.rewire >= 0.0 && g.rewire <= 1.0)) throw std::invalid_argument("dataset: rewire must lie in [0, 1]");
        if (g.degree_bins < 2) throw std::invalid_argument("dataset: degree_bins must be >= 2");
    }
}

Dataset::Dataset(SyntheticDatasetConfig cfg, std::vector<Item> items, Matrix prototypes,
                 std::vector<Graph> templates)
    : cfg_(std::move(cfg)), items_(std::move(items)), prototypes_(std::move(prototypes)),
      templates_(std::move(templates)) {
    feature_dim_ = cfg_.generator == Generator::vector ? cfg_.feature_dim
                                                        : cfg_.graph.degree_bins + cfg_.n_classes;
}

std::vector<double> Dataset::render(std::size_t cls, Rng& rng) const {
    if (cls >= cfg_.n_classes) throw std::invalid_argument(fmt::format("render: class {} out of range", cls));
    if (cfg_.generator == Generator::graph) {
        return summarize(rewire(templates_[cls], cfg_.graph.rewire, rng), cfg_.n_classes,
                         cfg_.graph.degree_bins);
    }
    const auto proto = prototypes_.row(cls);
    std::vector<double> x(proto.begin(), proto.end());
    if (cfg_.noise_sigma > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg_.noise_sigma);
        for (double& v : x) v += noise(rng);
    }
    return x;
}

Dataset generate(const SyntheticDatasetConfig& cfg) {
    validate(cfg);
    Rng rng(derive_seed(cfg.seed, streams::dataset));

    Matrix prototypes;
    std::vector<Graph> templates;
    if (cfg.generator == Generator::vector) {
        prototypes = Matrix(cfg.n_classes, cfg.feature_dim);
        for (std::size_t c = 0; c < cfg.n_classes; ++c) prototypes(c, c) = 1.0;
    } else {
        Rng template_rng(derive_seed(cfg.seed, streams::graph_templates));
        for (std::size_t c = 0; c < cfg.n_classes; ++c)
            templates.push_back(class_template(c, cfg.n_classes, cfg.graph, template_rng));
    }

    std::vector<std::size_t> labels(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) labels[i] = i % cfg.n_classes;
    std::shuffle(labels.begin(), labels.end(), rng);

    Dataset shell(cfg, {}, prototypes, templates);
    std::vector<Item> items(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        items[i].id = i;
        items[i].source_class = labels[i];
        items[i].features = shell.render(labels[i], rng);
    }
    return Dataset(cfg, std::move(items), std::move(prototypes), std::move(templates));
}

Dataset graph_summary_generate(SyntheticDatasetConfig cfg) {
    cfg.generator = Generator::graph;
    return generate(cfg);
}

View augment(const Item& item, const FeatureSpace& space, const Dataset& data, Rng& rng) {
    if (item.source_class >= space.size()) {
        throw std::invalid_argument(fmt::format("augment: item class {} outside the {}-feature TPM",
                                                item.source_class, space.size()));
    }
    View v;
    v.parent_id = item.id;
    v.view_class = space.sample_target(item.source_class, rng);
    v.features = data.render(v.view_class, rng);
    return v;
}

Split split(const Dataset& data, double train_fraction, std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("split: train_fraction must lie in (0, 1)");
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, streams::split));
    std::shuffle(order.begin(), order.end(), rng);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

void write_csv(const Dataset& data, std::ostream& out) {
    out << "id,source_class";
    for (std::size_t k = 0; k < data.feature_dim(); ++k) out << ",feature_" << k;
    out << '\n';
    for (const auto& item : data.items()) {
        out << item.id << ',' << item.source_class;
        for (double v : item.features) out << ',' << fmt::format("{:.17g}", v);
        out << '\n';
    }
}

Graph class_template(std::size_t cls, std::size_t n_classes, const GraphConfig& cfg, Rng& rng) {
    Graph g;
    g.nodes = cfg.nodes;
    g.node_feature.resize(cfg.nodes);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_category(0, n_classes - 1);
    for (auto& f : g.node_feature) f = unif(rng) < 0.6 ? cls : any_category(rng);

    // Endpoint weights (nodes - v)^(cls/2): class 0 is uniform, later classes grow hubs.
    std::vector<double> weights(cfg.nodes);
    for (std::size_t v = 0; v < cfg.nodes; ++v)
        weights[v] = std::pow(static_cast<double>(cfg.nodes - v), 0.5 * static_cast<double>(cls));
    std::discrete_distribution<std::size_t> endpoint(weights.begin(), weights.end());
    std::set<std::pair<std::size_t, std::size_t>> edges;
    std::uniform_int_distribution<std::size_t> any_node(0, cfg.nodes - 1);
    std::size_t attempts = 0;
    while (edges.size() < cfg.edges) {
        // Fall back to uniform endpoints if the skewed draw keeps hitting existing edges.
        const bool skewed = attempts++ < 50 * cfg.edges;
        const std::size_t u = skewed ? endpoint(rng) : any_node(rng);
        const std::size_t v = any_node(rng);
        if (u == v) continue;
        edges.insert(std::minmax(u, v));
    }
    g.edges.assign(edges.begin(), edges.end());
    return g;
}

Graph rewire(const Graph& g, double p, Rng& rng) {
    if (p <= 0.0) return g;
    std::set<std::pair<std::size_t, std::size_t>> present(g.edges.begin(), g.edges.end());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uniform_int_distribution<std::size_t> any_node(0, g.nodes - 1);
    const std::size_t max_edges = g.nodes * (g.nodes - 1) / 2;
    Graph out = g;
    for (auto& e : out.edges) {
        if (unif(rng) >= p || present.size() >= max_edges) continue;
        std::pair<std::size_t, std::size_t> fresh;
        do {
            const std::size_t u = any_node(rng);
            const std::size_t v = any_node(rng);
            fresh = std::minmax(u, v);
        } while (fresh.first == fresh.second || present.contains(fresh));
        present.erase(e);
        present.insert(fresh);
        e = fresh;
    }
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

Graph relabel(const Graph& g, std::span<const std::size_t> perm) {
    if (perm.size() != g.nodes) throw std::invalid_argument("relabel: permutation size mismatch");
    Graph out;
    out.nodes = g.nodes;
    out.node_feature.resize(g.nodes);
    for (std::size_t v = 0; v < g.nodes; ++v) out.node_feature[perm[v]] = g.node_feature[v];
    for (const auto& [u, v] : g.edges) out.edges.push_back(std::minmax(perm[u], perm[v]));
    std::sort(out.edges.begin(), out.edges.end());
    return out;
}

std::vector<double> summarize(const Graph& g, std::size_t categories, std::size_t degree_bins) {
    std::vector<std::size_t> degree(g.nodes, 0);
    for (const auto& [u, v] : g.edges) {
        ++degree[u];
        ++degree[v];
    }
    std::vector<double> out(degree_bins + categories, 0.0);
    const double inv = g.nodes == 0 ? 0.0 : 1.0 / static_cast<double>(g.nodes);
    for (std::size_t d : degree) out[std::min(d, degree_bins - 1)] += inv;
    for (std::size_t f : g.node_feature) {
        if (f >= categories) throw std::invalid_argument("summarize: node category out of range");
        out[degree_bins + f] += inv;
    }
    return out;
}

}  // namespace ccl::synth
