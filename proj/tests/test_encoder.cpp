#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "ccl/encoder.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace ccl;
using namespace ccl::testing;

namespace {

// Σ w ⊙ mlp(x): a linear read-out for checking backward.
double readout(const encoder::Mlp& mlp, const Matrix& x, const Matrix& w) {
    const Matrix z = mlp.forward(x);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * w.data()[i];
    return s;
}

}  // namespace

TEST(EmbeddingTable, LookupAndScatter) {
    Rng rng(1);
    const encoder::EmbeddingTable table(4, 3, rng);
    for (double v : table.params()[0].value.flat()) {
        EXPECT_GE(v, -0.1);
        EXPECT_LE(v, 0.1);
    }
    const std::vector<std::size_t> idx{2, 0, 2};
    const Matrix z = table.forward(idx);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(z(0, k), table.params()[0].value(2, k));
    const Matrix up = Matrix::from_rows({{1, 1, 1}, {2, 2, 2}, {3, 3, 3}});
    const auto g = table.backward(idx, up);
    EXPECT_EQ(g[0](2, 0), 4.0);  // repeated index accumulates
    EXPECT_EQ(g[0](0, 1), 2.0);
    EXPECT_EQ(g[0](1, 2), 0.0);
}

TEST(Mlp, ForwardByHand) {
    Rng rng(2);
    encoder::Mlp mlp(2, 2, 2, rng);
    mlp.params()[0].value = Matrix::from_rows({{1, -1}, {2, 1}});
    mlp.params()[1].value = Matrix::from_rows({{0, 0.5}});
    mlp.params()[2].value = Matrix::from_rows({{1, 0}, {3, 0}});
    mlp.params()[3].value = Matrix::from_rows({{0.25, -1}});
    // x = (1, 1): pre = (3, 0.5), relu = (3, 0.5), out = 3 + 1.5 + 0.25
    EXPECT_DOUBLE_EQ(mlp.forward(Matrix::from_rows({{1, 1}}))(0, 0), 4.75);
    // x = (0, -1): pre = (-2, -0.5), relu = 0, out = 0.25
    EXPECT_DOUBLE_EQ(mlp.forward(Matrix::from_rows({{0, -1}}))(0, 0), 0.25);
}

TEST(Mlp, InitRanges) {
    Rng rng(3);
    const encoder::Mlp mlp(9, 16, 4, rng);
    for (double v : mlp.w1().flat()) EXPECT_LE(std::abs(v), 1.0 / 3.0);
    for (double v : mlp.w2().flat()) EXPECT_LE(std::abs(v), 0.25);
    for (double v : mlp.b1().flat()) EXPECT_EQ(v, 0.0);
}

TEST(Mlp, BackwardMatchesDifferences) {
    Rng rng(4);
    for (int trial = 0; trial < 5; ++trial) {
        auto mlp = random_mlp(4, 7, 3, rng);
        const Matrix x = random_matrix(6, 4, rng);
        const Matrix w = random_matrix(6, 3, rng);
        encoder::MlpCache cache;
        mlp.forward(x, &cache);
        const auto g = mlp.backward(cache, w);
        for (std::size_t p = 0; p < 4; ++p) {
            auto& value = mlp.params()[p].value;
            for (std::size_t e = 0; e < value.size(); ++e) {
                const double keep = value.data()[e];
                value.data()[e] = keep + 1e-6;
                const double up = readout(mlp, x, w);
                value.data()[e] = keep - 1e-6;
                const double down = readout(mlp, x, w);
                value.data()[e] = keep;
                EXPECT_NEAR(g[p].data()[e], (up - down) / 2e-6, 1e-7) << mlp.params()[p].name << e;
            }
        }
    }
}

TEST(Encoder, DispatchesOnKind) {
    Rng rng(5);
    const encoder::Encoder table(encoder::EmbeddingTable(3, 2, rng));
    const encoder::Encoder mlp(encoder::Mlp(4, 5, 2, rng));
    EXPECT_EQ(table.kind(), encoder::EncoderKind::table);
    EXPECT_EQ(mlp.kind(), encoder::EncoderKind::mlp);
    EXPECT_EQ(table.output_dim(), 2u);
    EXPECT_EQ(mlp.output_dim(), 2u);
    encoder::Encoder::Cache cache;
    const std::vector<std::size_t> idx{1, 1};
    EXPECT_EQ(table.forward(Matrix(2, 4), idx, cache).rows(), 2u);
    EXPECT_EQ(mlp.forward(Matrix(2, 4, 1.0), idx, cache).rows(), 2u);
}

TEST(Optimizer, SgdStep) {
    std::vector<encoder::Parameter> params{{"w", Matrix::from_rows({{1, 2}})}};
    encoder::Optimizer opt({encoder::OptimizerKind::sgd, 0.1});
    opt.step(params, {Matrix::from_rows({{1, -2}})});
    EXPECT_DOUBLE_EQ(params[0].value(0, 0), 0.9);
    EXPECT_DOUBLE_EQ(params[0].value(0, 1), 2.2);
}

TEST(Optimizer, AdamFirstStepHasMagnitudeLr) {
    std::vector<encoder::Parameter> params{{"w", Matrix::from_rows({{0, 0, 0}})}};
    encoder::Optimizer opt({encoder::OptimizerKind::adam, 0.01});
    opt.step(params, {Matrix::from_rows({{3, -0.5, 0}})});
    // Bias-corrected m / sqrt(v) = g / |g|.
    EXPECT_NEAR(params[0].value(0, 0), -0.01, 1e-10);
    EXPECT_NEAR(params[0].value(0, 1), 0.01, 1e-9);
    EXPECT_EQ(params[0].value(0, 2), 0.0);
    EXPECT_EQ(opt.step_count(), 1u);
    EXPECT_NEAR(opt.first_moments()[0](0, 0), 0.3, 1e-15);
    EXPECT_NEAR(opt.second_moments()[0](0, 0), 0.009, 1e-15);
}

TEST(Optimizer, AdamMatchesReferenceRecursion) {
    const std::vector<double> grads{0.5, -1.0, 2.0, 0.1};
    std::vector<encoder::Parameter> params{{"w", Matrix(1, 1, 1.0)}};
    encoder::Optimizer opt({encoder::OptimizerKind::adam, 0.05, 0.9, 0.999, 1e-8});
    double w = 1.0, m = 0.0, v = 0.0;
    for (std::size_t t = 1; t <= grads.size(); ++t) {
        const double g = grads[t - 1];
        m = 0.9 * m + 0.1 * g;
        v = 0.999 * v + 0.001 * g * g;
        const double mh = m / (1.0 - std::pow(0.9, double(t)));
        const double vh = v / (1.0 - std::pow(0.999, double(t)));
        w -= 0.05 * mh / (std::sqrt(vh) + 1e-8);
        opt.step(params, {Matrix(1, 1, g)});
        EXPECT_NEAR(params[0].value(0, 0), w, 1e-14);
    }
}

TEST(Optimizer, ZeroLearningRateLeavesParams) {
    Rng rng(6);
    std::vector<encoder::Parameter> params{{"w", random_matrix(3, 3, rng)}};
    const auto before = params[0].value;
    for (auto kind : {encoder::OptimizerKind::sgd, encoder::OptimizerKind::adam}) {
        encoder::Optimizer opt({kind, 0.0});
        for (int i = 0; i < 3; ++i) opt.step(params, {random_matrix(3, 3, rng)});
    }
    EXPECT_EQ(params[0].value, before);
}

TEST(Optimizer, RejectsBadGradients) {
    std::vector<encoder::Parameter> params{{"w1", Matrix(1, 2, 1.0)}};
    const auto before = params[0].value;
    encoder::Optimizer opt({encoder::OptimizerKind::adam, 0.1});
    try {
        opt.step(params, {Matrix::from_rows({{1.0, std::numeric_limits<double>::quiet_NaN()}})});
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("w1"), std::string::npos);
    }
    EXPECT_THROW(opt.step(params, {Matrix(2, 2)}), std::invalid_argument);
    EXPECT_THROW(opt.step(params, {}), std::invalid_argument);
    EXPECT_EQ(params[0].value, before);
}

TEST(Snapshot, RoundTripIsExact) {
    Rng rng(7);
    const encoder::Mlp mlp = random_mlp(3, 4, 2, rng);
    const auto dir = std::filesystem::temp_directory_path() / "ccl_test_snapshot";
    std::filesystem::create_directories(dir);
    encoder::save_snapshot(mlp.params(), dir / "params");
    const auto loaded = encoder::load_snapshot(dir / "params");
    ASSERT_EQ(loaded.size(), mlp.params().size());
    for (std::size_t p = 0; p < loaded.size(); ++p) {
        EXPECT_EQ(loaded[p].name, mlp.params()[p].name);
        EXPECT_EQ(loaded[p].value, mlp.params()[p].value);
    }
    EXPECT_THROW(encoder::load_snapshot(dir / "missing"), std::runtime_error);
    std::filesystem::remove_all(dir);
}
