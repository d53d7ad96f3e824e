#include "ccl/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "ccl/error.hpp"
#include "ccl/theory.hpp"

namespace ccl::trainer {

void validate(const TrainConfig& cfg) {
    if (cfg.batch_size < 2) throw std::invalid_argument("train: batch_size must be >= 2");
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.checkpoint_every < 1) throw std::invalid_argument("train: checkpoint_every must be >= 1");
    if (!(cfg.optimizer.lr >= 0.0) || !std::isfinite(cfg.optimizer.lr)) {
        throw std::invalid_argument("train: lr must be finite and >= 0");
    }
    if (cfg.encoder.dim < 2) throw std::invalid_argument("train: embedding dim must be >= 2");
    if (cfg.encoder.hidden < 1) throw std::invalid_argument("train: hidden width must be >= 1");
    losses::validate(cfg.loss);
}

Batch make_batch(const synth::Dataset& data, std::span<const std::size_t> items, const FeatureSpace& space,
                 Rng& rng) {
    const std::size_t b = items.size();
    const std::size_t d = data.feature_dim();
    Batch out;
    out.items.assign(items.begin(), items.end());
    out.anchor_features = Matrix(b, d);
    out.candidate_features = Matrix(b, d);
    out.anchor_labels.resize(b);
    out.candidate_labels.resize(b);
    for (std::size_t r = 0; r < b; ++r) {
        const auto& item = data.items().at(items[r]);
        const synth::View first = synth::augment(item, space, data, rng);
        const synth::View second = synth::augment(item, space, data, rng);
        std::copy(first.features.begin(), first.features.end(), out.anchor_features.row(r).begin());
        std::copy(second.features.begin(), second.features.end(), out.candidate_features.row(r).begin());
        out.anchor_labels[r] = first.view_class;
        out.candidate_labels[r] = second.view_class;
    }
    return out;
}

Batch build_batch(const synth::Dataset& data, const FeatureSpace& space, std::size_t batch_size, Rng& rng) {
    if (batch_size > data.size()) {
        throw std::invalid_argument(
            fmt::format("build_batch: dataset has {} items, batch needs {}", data.size(), batch_size));
    }
    std::vector<std::size_t> ids(data.size());
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(batch_size);
    return make_batch(data, ids, space, rng);
}

Matrix reference_target(const FeatureSpace& space, const TrainConfig& cfg) {
    if (cfg.loss.kind == losses::LossKind::sc_infonce) {
        return theory::predict_scaled_target(space, cfg.batch_size, {cfg.loss.delta, cfg.loss.gamma}).value;
    }
    return theory::predict_target(space, cfg.batch_size).target;
}

namespace {

encoder::Encoder make_encoder(const TrainConfig& cfg, const synth::Dataset& data) {
    Rng rng(derive_seed(cfg.seed, streams::init));
    if (cfg.encoder.kind == encoder::EncoderKind::table) {
        return encoder::Encoder(encoder::EmbeddingTable(data.n_classes(), cfg.encoder.dim, rng));
    }
    return encoder::Encoder(encoder::Mlp(data.feature_dim(), cfg.encoder.hidden, cfg.encoder.dim, rng));
}

struct Step {
    double loss = 0.0;
    encoder::Gradients grads;
};

Step loss_and_gradients(const encoder::Encoder& enc, const Batch& batch, const losses::LossConfig& loss_cfg) {
    encoder::Encoder::Cache anchor_cache;
    encoder::Encoder::Cache candidate_cache;
    const Matrix za = enc.forward(batch.anchor_features, batch.anchor_labels, anchor_cache);
    const Matrix zc = enc.forward(batch.candidate_features, batch.candidate_labels, candidate_cache);
    const auto block = losses::cosine_block(za, zc);
    const auto result = losses::evaluate(block, loss_cfg);
    Step step;
    step.loss = result.value;
    if (!std::isfinite(step.loss)) return step;
    const auto emb = losses::backprop_to_embeddings(block, result.grad_sims);
    step.grads = enc.backward(anchor_cache, emb.anchors);
    encoder::accumulate(step.grads, enc.backward(candidate_cache, emb.candidates));
    return step;
}

MetricsRecord evaluate(const encoder::Encoder& enc, const std::vector<Batch>& eval_batches, const TrainConfig& cfg,
                       std::size_t classes, const Matrix& reference) {
    std::vector<Matrix> probabilities;
    std::vector<metrics::BlockLabels> labels;
    const std::size_t b = cfg.batch_size;
    const std::size_t d = enc.output_dim();
    Matrix pooled(2 * b * eval_batches.size(), d);
    Matrix anchors(b * eval_batches.size(), d);
    std::vector<std::size_t> pooled_labels;
    pooled_labels.reserve(pooled.rows());

    encoder::Encoder::Cache cache;
    for (std::size_t k = 0; k < eval_batches.size(); ++k) {
        const Batch& batch = eval_batches[k];
        const Matrix za = enc.forward(batch.anchor_features, batch.anchor_labels, cache);
        const Matrix zc = enc.forward(batch.candidate_features, batch.candidate_labels, cache);
        const auto block = losses::cosine_block(za, zc);
        probabilities.push_back(losses::pair_probabilities(block, cfg.loss.tau));
        labels.push_back({batch.anchor_labels, batch.candidate_labels});
        std::copy(za.values().begin(), za.values().end(), anchors.data() + k * b * d);
        std::copy(za.values().begin(), za.values().end(), pooled.data() + 2 * k * b * d);
        std::copy(zc.values().begin(), zc.values().end(), pooled.data() + (2 * k + 1) * b * d);
        pooled_labels.insert(pooled_labels.end(), batch.anchor_labels.begin(), batch.anchor_labels.end());
        pooled_labels.insert(pooled_labels.end(), batch.candidate_labels.begin(), batch.candidate_labels.end());
    }

    MetricsRecord rec;
    rec.measured_p = metrics::measure_p_from_probabilities(probabilities, labels, classes);
    rec.class_sim = metrics::class_similarity(pooled, pooled_labels, classes).mean;
    rec.similarity = metrics::similarity_summary(pooled, pooled_labels, classes);
    if (anchors.rows() > d) rec.spectrum = metrics::covariance_spectrum(anchors);
    rec.mae = rec.measured_p.missing.empty() ? metrics::mae(rec.measured_p.mean, reference)
                                             : std::numeric_limits<double>::quiet_NaN();
    return rec;
}

}  // namespace

RunResult train(const TrainConfig& cfg, const synth::Dataset& data, const FeatureSpace& space, std::string run_id) {
    validate(cfg);
    if (space.size() != data.n_classes()) {
        throw std::invalid_argument(fmt::format("train: TPM has {} features but the dataset has {} classes",
                                                space.size(), data.n_classes()));
    }
    const auto started = std::chrono::steady_clock::now();
    const std::size_t b = cfg.batch_size;
    const synth::Split parts = synth::split(data, data.config().train_fraction, cfg.seed);
    const std::size_t n_batches = parts.train.size() / b;
    const std::size_t n_eval = parts.test.size() / b;
    if (n_batches == 0 || n_eval == 0) {
        throw std::invalid_argument(fmt::format("train: batch size {} exceeds the train ({}) or test ({}) split",
                                                b, parts.train.size(), parts.test.size()));
    }

    RunResult run;
    run.run_id = std::move(run_id);
    run.config = cfg;
    run.reference_target = reference_target(space, cfg);

    std::vector<Batch> eval_batches;
    {
        Rng eval_rng(derive_seed(cfg.seed, streams::eval_views));
        for (std::size_t k = 0; k < n_eval; ++k) {
            const std::span<const std::size_t> ids(parts.test.data() + k * b, b);
            eval_batches.push_back(make_batch(data, ids, space, eval_rng));
        }
    }

    encoder::Encoder enc = make_encoder(cfg, data);
    encoder::Optimizer opt(cfg.optimizer);
    Rng view_rng(derive_seed(cfg.seed, streams::train_views));
    Rng shuffle_rng(derive_seed(cfg.seed, streams::shuffle));
    std::vector<std::size_t> order = parts.train;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        for (std::size_t k = 0; k < n_batches; ++k) {
            const std::span<const std::size_t> ids(order.data() + k * b, b);
            const Batch batch = make_batch(data, ids, space, view_rng);
            Step step = loss_and_gradients(enc, batch, cfg.loss);
            if (!std::isfinite(step.loss)) {
                throw NumericalError(fmt::format("non-finite {} loss at epoch {}, batch {}",
                                                 losses::to_string(cfg.loss.kind), epoch, k));
            }
            loss_sum += step.loss;
            opt.step(enc.params(), step.grads);
        }
        if (epoch % cfg.checkpoint_every == 0 || epoch == cfg.epochs) {
            MetricsRecord rec = evaluate(enc, eval_batches, cfg, data.n_classes(), run.reference_target);
            rec.epoch = epoch;
            rec.loss = loss_sum / static_cast<double>(n_batches);
            run.records.push_back(std::move(rec));
        }
    }
    run.final_params = enc.params();
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return run;
}

namespace {

std::size_t tail_start(std::size_t n, double tail_fraction) {
    const auto tail = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n)));
    return n - std::clamp<std::size_t>(tail, 1, n);
}

}  // namespace

FinalMetrics final_metrics(const RunResult& run, double tail_fraction) {
    if (run.records.empty()) throw std::invalid_argument("final_metrics: run has no checkpoints");
    const std::size_t m = run.reference_target.rows();
    const std::size_t first = tail_start(run.records.size(), tail_fraction);
    FinalMetrics out;
    out.measured_p = Matrix(m, m);
    out.class_sim = Matrix(m, m);
    for (std::size_t r = first; r < run.records.size(); ++r) {
        const auto& rec = run.records[r];
        for (std::size_t i = 0; i < m * m; ++i) {
            out.measured_p.data()[i] += rec.measured_p.symmetric.data()[i];
            out.class_sim.data()[i] += rec.class_sim.data()[i];
        }
        out.similarity.mean += rec.similarity.mean;
        out.similarity.intra += rec.similarity.intra;
        out.similarity.inter += rec.similarity.inter;
    }
    out.checkpoints = run.records.size() - first;
    const double inv = 1.0 / static_cast<double>(out.checkpoints);
    for (double& v : out.measured_p.flat()) v *= inv;
    for (double& v : out.class_sim.flat()) v *= inv;
    out.similarity.mean *= inv;
    out.similarity.intra *= inv;
    out.similarity.inter *= inv;
    out.mae = metrics::mae(out.measured_p, run.reference_target);
    out.row_mae = metrics::row_mae(out.measured_p, run.reference_target);
    return out;
}

double checkpoint_variance(const RunResult& run, double tail_fraction) {
    if (run.records.size() < 2) throw std::invalid_argument("checkpoint_variance: needs >= 2 checkpoints");
    const std::size_t first = std::min(tail_start(run.records.size(), tail_fraction), run.records.size() - 2);
    const double n = static_cast<double>(run.records.size() - first);
    const std::size_t m = run.records.front().class_sim.rows();
    double total = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i; j < m; ++j) {
            double mean = 0.0;
            for (std::size_t r = first; r < run.records.size(); ++r) mean += run.records[r].class_sim(i, j);
            mean /= n;
            double var = 0.0;
            for (std::size_t r = first; r < run.records.size(); ++r) {
                const double dv = run.records[r].class_sim(i, j) - mean;
                var += dv * dv;
            }
            total += var / (n - 1.0);
            ++pairs;
        }
    return total / static_cast<double>(pairs);
}

std::string_view to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::delta: return "delta";
        case SweepAxis::gamma: return "gamma";
        case SweepAxis::tau: return "tau";
        case SweepAxis::batch_size: return "batch_size";
        case SweepAxis::lr: return "lr";
    }
    return "?";
}

SweepAxis parse_axis(std::string_view name) {
    for (auto axis : {SweepAxis::delta, SweepAxis::gamma, SweepAxis::tau, SweepAxis::batch_size, SweepAxis::lr})
        if (name == to_string(axis)) return axis;
    throw ConfigError(fmt::format("unknown sweep axis '{}' (expected delta, gamma, tau, batch_size or lr)", name));
}

TrainConfig with_axis_value(TrainConfig cfg, SweepAxis axis, double value) {
    switch (axis) {
        case SweepAxis::delta: cfg.loss.delta = value; break;
        case SweepAxis::gamma:
            if (cfg.batch_size < 2) throw std::invalid_argument("gamma sweep needs batch_size >= 2");
            cfg.loss.gamma = value / static_cast<double>(cfg.batch_size - 1);
            break;
        case SweepAxis::tau: cfg.loss.tau = value; break;
        case SweepAxis::batch_size:
            if (!(value >= 2.0) || value != std::floor(value)) {
                throw ConfigError(fmt::format("batch_size value {} is not an integer >= 2", value));
            }
            cfg.batch_size = static_cast<std::size_t>(value);
            break;
        case SweepAxis::lr: cfg.optimizer.lr = value; break;
    }
    return cfg;
}

std::vector<SweepPoint> sweep(const TrainConfig& base, const synth::SyntheticDatasetConfig& data_cfg,
                              const FeatureSpace& space, SweepAxis axis, std::span<const double> values,
                              std::size_t repeats, std::size_t jobs) {
    if (values.empty()) throw ConfigError("sweep needs at least one value");
    if (repeats < 1) throw ConfigError("repeats must be >= 1");

    std::vector<synth::Dataset> datasets;
    for (std::size_t r = 0; r < repeats; ++r) {
        auto dc = data_cfg;
        dc.seed = base.seed + r;
        datasets.push_back(synth::generate(dc));
    }

    std::vector<SweepPoint> points;
    for (double v : values)
        for (std::size_t r = 0; r < repeats; ++r) points.push_back({v, r, {}});
    std::vector<TrainConfig> configs;
    for (const auto& p : points) {
        TrainConfig cfg = with_axis_value(base, axis, p.value);
        cfg.seed = base.seed + p.repeat;
        validate(cfg);
        configs.push_back(cfg);
    }

    std::vector<std::exception_ptr> errors(points.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t k = next++; k < points.size(); k = next++) {
            try {
                const auto id = fmt::format("{}={:g}_r{}", to_string(axis), points[k].value, points[k].repeat);
                points[k].result = train(configs[k], datasets[points[k].repeat], space, id);
            } catch (...) {
                errors[k] = std::current_exception();
            }
        }
    };
    const std::size_t n_threads = std::clamp<std::size_t>(jobs, 1, points.size());
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    std::stable_sort(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
        return a.value != b.value ? a.value < b.value : a.repeat < b.repeat;
    });
    return points;
}

}  // namespace ccl::trainer
