#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <set>

#include "ccl/error.hpp"
#include "ccl/theory.hpp"
#include "ccl/trainer.hpp"
#include "support/fixtures.hpp"

using namespace ccl;
using namespace ccl::testing;

namespace {

synth::SyntheticDatasetConfig tiny_data(std::uint64_t seed = 0) {
    synth::SyntheticDatasetConfig d;
    d.n_items = 120;
    d.feature_dim = 6;
    d.seed = seed;
    return d;
}

trainer::TrainConfig tiny_train() {
    trainer::TrainConfig c;
    c.batch_size = 20;
    c.epochs = 5;
    c.checkpoint_every = 2;
    c.encoder.hidden = 8;
    c.encoder.dim = 4;
    c.optimizer.lr = 0.01;
    return c;
}

}  // namespace

TEST(Trainer, CheckpointSchedule) {
    const auto data = synth::generate(tiny_data());
    const auto run = trainer::train(tiny_train(), data, three_class_space());
    ASSERT_EQ(run.records.size(), 3u);
    EXPECT_EQ(run.records[0].epoch, 2u);
    EXPECT_EQ(run.records[1].epoch, 4u);
    EXPECT_EQ(run.records[2].epoch, 5u);
    for (const auto& rec : run.records) {
        EXPECT_TRUE(std::isfinite(rec.loss));
        EXPECT_TRUE(std::isfinite(rec.mae));
        EXPECT_EQ(rec.spectrum.eigenvalues.size(), 4u);
        for (double p : rec.measured_p.mean.flat()) {
            EXPECT_GT(p, 0.0);
            EXPECT_LT(p, 1.0);
        }
    }
}

TEST(Trainer, Deterministic) {
    const auto data = synth::generate(tiny_data());
    const auto a = trainer::train(tiny_train(), data, three_class_space());
    const auto b = trainer::train(tiny_train(), data, three_class_space());
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t r = 0; r < a.records.size(); ++r) {
        EXPECT_EQ(a.records[r].loss, b.records[r].loss);
        EXPECT_EQ(a.records[r].class_sim, b.records[r].class_sim);
        EXPECT_EQ(a.records[r].measured_p.mean, b.records[r].measured_p.mean);
    }
    for (std::size_t p = 0; p < a.final_params.size(); ++p)
        EXPECT_EQ(a.final_params[p].value, b.final_params[p].value);
}

TEST(Trainer, ZeroLearningRateFreezesEverything) {
    const auto data = synth::generate(tiny_data());
    auto cfg = tiny_train();
    cfg.optimizer.lr = 0.0;
    const auto short_run = trainer::train(cfg, data, three_class_space());
    cfg.epochs = 1;
    const auto one = trainer::train(cfg, data, three_class_space());
    for (std::size_t p = 0; p < one.final_params.size(); ++p)
        EXPECT_EQ(one.final_params[p].value, short_run.final_params[p].value);
    // Evaluation views are fixed, so frozen weights give identical checkpoints.
    EXPECT_EQ(short_run.records.front().class_sim, short_run.records.back().class_sim);
    EXPECT_EQ(trainer::checkpoint_variance(short_run), 0.0);
}

TEST(Trainer, TableEncoderLearnsIdentityTpm) {
    // With an identity TPM every view keeps its class, so InfoNCE pulls classes apart.
    const auto data = synth::generate(tiny_data());
    auto cfg = tiny_train();
    cfg.encoder.kind = encoder::EncoderKind::table;
    cfg.epochs = 60;
    cfg.checkpoint_every = 60;
    cfg.optimizer.lr = 0.05;
    const auto run = trainer::train(cfg, data, identity_space(3));
    const auto& s = run.records.back().similarity;
    EXPECT_GT(s.intra, 0.99);
    EXPECT_LT(s.inter, 0.0);
}

TEST(Trainer, RejectsBadInputs) {
    const auto data = synth::generate(tiny_data());
    auto cfg = tiny_train();
    cfg.batch_size = 61;
    EXPECT_THROW(trainer::train(cfg, data, three_class_space()), std::invalid_argument);
    cfg = tiny_train();
    cfg.optimizer.lr = -1.0;
    EXPECT_THROW(trainer::validate(cfg), std::invalid_argument);
    cfg = tiny_train();
    cfg.epochs = 0;
    EXPECT_THROW(trainer::validate(cfg), std::invalid_argument);
    EXPECT_THROW(trainer::train(tiny_train(), data, identity_space(4)), std::invalid_argument);
}

TEST(Trainer, NonFiniteLossRaisesNumericalError) {
    const auto data = synth::generate(tiny_data());
    auto cfg = tiny_train();
    cfg.loss.tau = std::numeric_limits<double>::denorm_min();
    try {
        trainer::train(cfg, data, three_class_space());
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("epoch 1, batch 0"), std::string::npos) << e.what();
    }
}

TEST(Trainer, BuildBatchDrawsDistinctItems) {
    const auto data = synth::generate(tiny_data());
    Rng rng(3);
    const auto batch = trainer::build_batch(data, identity_space(3), 50, rng);
    EXPECT_EQ(std::set<std::size_t>(batch.items.begin(), batch.items.end()).size(), 50u);
    for (std::size_t r = 0; r < 50; ++r) {
        EXPECT_EQ(batch.anchor_labels[r], data.items()[batch.items[r]].source_class);
        EXPECT_EQ(batch.candidate_labels[r], batch.anchor_labels[r]);
    }
    EXPECT_THROW(trainer::build_batch(data, identity_space(3), 121, rng), std::invalid_argument);
}

TEST(Trainer, ReferenceTargetFollowsLoss) {
    const auto space = three_class_space();
    auto cfg = tiny_train();
    EXPECT_EQ(trainer::reference_target(space, cfg), theory::predict_target(space, 20).target);
    cfg.loss.kind = losses::LossKind::sc_infonce;
    cfg.loss.delta = 0.5;
    EXPECT_EQ(trainer::reference_target(space, cfg), theory::predict_scaled_target(space, 20, {0.5, 0.0}).value);
}

TEST(Trainer, FinalMetricsAverageTail) {
    trainer::RunResult run;
    run.reference_target = Matrix(2, 2, 0.5);
    for (int k = 0; k < 10; ++k) {
        trainer::MetricsRecord rec;
        rec.measured_p.symmetric = Matrix(2, 2, double(k));
        rec.class_sim = Matrix(2, 2, double(k) / 10.0);
        rec.similarity = {double(k), 0.0, 0.0};
        run.records.push_back(rec);
    }
    const auto fin = trainer::final_metrics(run, 0.2);
    EXPECT_EQ(fin.checkpoints, 2u);
    EXPECT_DOUBLE_EQ(fin.measured_p(0, 0), 8.5);
    EXPECT_DOUBLE_EQ(fin.similarity.mean, 8.5);
    EXPECT_DOUBLE_EQ(fin.mae, 8.0);
    // Tail of 5 values 0.5..0.9: sample variance 0.025, same for all three pairs.
    EXPECT_NEAR(trainer::checkpoint_variance(run, 0.5), 0.025, 1e-15);
}

TEST(Sweep, AxisHandling) {
    EXPECT_EQ(trainer::parse_axis("tau"), trainer::SweepAxis::tau);
    EXPECT_THROW(trainer::parse_axis("momentum"), ConfigError);
    const auto cfg = trainer::with_axis_value(tiny_train(), trainer::SweepAxis::gamma, 1.9);
    EXPECT_DOUBLE_EQ(cfg.loss.gamma, 0.1);
    EXPECT_EQ(trainer::with_axis_value(tiny_train(), trainer::SweepAxis::batch_size, 32).batch_size, 32u);
    EXPECT_THROW(trainer::with_axis_value(tiny_train(), trainer::SweepAxis::batch_size, 2.5), ConfigError);
    EXPECT_DOUBLE_EQ(trainer::with_axis_value(tiny_train(), trainer::SweepAxis::delta, 4).loss.delta, 4.0);
}

TEST(Sweep, OrderedAndIndependentOfJobs) {
    auto cfg = tiny_train();
    cfg.epochs = 2;
    const std::vector<double> values{1.0, 0.5};
    const auto serial = trainer::sweep(cfg, tiny_data(), three_class_space(), trainer::SweepAxis::tau, values, 2, 1);
    const auto threaded = trainer::sweep(cfg, tiny_data(), three_class_space(), trainer::SweepAxis::tau, values, 2, 3);
    ASSERT_EQ(serial.size(), 4u);
    EXPECT_EQ(serial[0].value, 0.5);
    EXPECT_EQ(serial[1].repeat, 1u);
    EXPECT_EQ(serial[0].result.run_id, "tau=0.5_r0");
    EXPECT_EQ(serial[3].result.config.seed, cfg.seed + 1);
    for (std::size_t k = 0; k < 4; ++k) {
        EXPECT_EQ(serial[k].result.run_id, threaded[k].result.run_id);
        EXPECT_EQ(serial[k].result.records.back().class_sim, threaded[k].result.records.back().class_sim);
    }
    EXPECT_NE(serial[0].result.records.back().loss, serial[1].result.records.back().loss);
}
