#include <gtest/gtest.h>

#include <cmath>

#include "ccl/losses.hpp"
#include "support/fixtures.hpp"
#include "support/gradcheck.hpp"

using namespace ccl;
using namespace ccl::testing;
using losses::LossKind;

namespace {

// Block with all anchors and candidates equal: every similarity is one.
losses::SimilarityBlock equal_block(std::size_t b) {
    return losses::cosine_block(Matrix(b, 3, 1.0), Matrix(b, 3, 1.0));
}

losses::LossConfig config(LossKind kind, double tau = 1.0) {
    losses::LossConfig c;
    c.kind = kind;
    c.tau = tau;
    return c;
}

// Direct InfoNCE for one anchor: -log(exp(s_aa / tau) / Σ_b exp(s_ab / tau)).
double infonce_oracle(const Matrix& s, double tau) {
    double total = 0.0;
    for (std::size_t a = 0; a < s.rows(); ++a) {
        double z = 0.0;
        for (std::size_t b = 0; b < s.cols(); ++b) z += std::exp(s(a, b) / tau);
        total += -std::log(std::exp(s(a, a) / tau) / z);
    }
    return total / double(s.rows());
}

}  // namespace

TEST(Losses, EqualSimilarityInfoNceIsLogB) {
    for (std::size_t b : {2u, 8u, 1000u})
        for (double tau : {0.1, 1.0, 5.0}) {
            const auto r = losses::infonce_loss(equal_block(b), config(LossKind::infonce, tau));
            EXPECT_NEAR(r.value, std::log(double(b)), 1e-12);
        }
}

TEST(Losses, EqualSimilarityDclIsLogBMinusOne) {
    const auto r = losses::dcl_loss(equal_block(10), config(LossKind::dcl, 0.5));
    EXPECT_NEAR(r.value, std::log(9.0), 1e-12);
}

TEST(Losses, InfoNceMatchesDirectFormula) {
    Rng rng(4);
    const auto block = losses::cosine_block(random_matrix(9, 5, rng), random_matrix(9, 5, rng));
    for (double tau : {0.1, 0.7, 3.0})
        EXPECT_NEAR(losses::infonce_loss(block, config(LossKind::infonce, tau)).value, infonce_oracle(block.sims, tau),
                    1e-12);
}

TEST(Losses, SclClosedForm) {
    const auto block = losses::cosine_block(Matrix::from_rows({{1, 0}, {0, 1}}), Matrix::from_rows({{1, 0}, {1, 1}}));
    auto cfg = config(LossKind::scl);
    cfg.lambda = 0.5;
    // anchor 0: -1 + 0.5 * (1/sqrt2); anchor 1: -(1/sqrt2) + 0.5 * 0
    const double r = 1.0 / std::sqrt(2.0);
    EXPECT_NEAR(losses::scl_loss(block, cfg).value, 0.5 * (-1.0 + 0.5 * r - r), 1e-15);
}

TEST(Losses, ScInfoNceDeltaOneGammaZeroDynamicGradient) {
    // Dynamic alpha makes the positive gradient exactly -delta / (tau B).
    Rng rng(6);
    const auto block = losses::cosine_block(random_matrix(6, 4, rng), random_matrix(6, 4, rng));
    auto cfg = config(LossKind::sc_infonce, 0.5);
    cfg.delta = 0.7;
    cfg.gamma = 0.01;
    const auto r = losses::sc_infonce_loss(block, cfg);
    const auto p = losses::pair_probabilities(block, 0.5);
    for (std::size_t a = 0; a < 6; ++a) {
        EXPECT_NEAR(r.grad_sims(a, a), -0.7 / (0.5 * 6), 1e-15);
        EXPECT_NEAR(r.alpha[a], p(a, a) - 1.0 + 0.7, 1e-15);
        for (std::size_t b = 0; b < 6; ++b)
            if (b != a) EXPECT_NEAR(r.grad_sims(a, b), (p(a, b) + 0.01) / (0.5 * 6), 1e-15);
    }
}

TEST(Losses, ScInfoNceFixedAlphaIsInfoNceAtDeltaOne) {
    Rng rng(7);
    const auto block = losses::cosine_block(random_matrix(5, 3, rng), random_matrix(5, 3, rng));
    auto cfg = config(LossKind::sc_infonce, 0.4);
    cfg.alpha_mode = losses::AlphaMode::fixed;
    const auto sc = losses::sc_infonce_loss(block, cfg);
    const auto base = losses::infonce_loss(block, config(LossKind::infonce, 0.4));
    EXPECT_NEAR(sc.value, base.value, 1e-15);
    EXPECT_LT(max_abs_diff(sc.grad_sims, base.grad_sims), 1e-16);
}

TEST(Losses, PairProbabilityRowsSumToOne) {
    Rng rng(9);
    const auto block = losses::cosine_block(random_matrix(7, 3, rng), random_matrix(7, 3, rng));
    const auto p = losses::pair_probabilities(block, 0.3);
    for (std::size_t a = 0; a < 7; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < 7; ++b) {
            s += p(a, b);
            EXPECT_NEAR(p(a, b), losses::pair_probability(block, a, b, 0.3), 1e-15);
        }
        EXPECT_NEAR(s, 1.0, 1e-14);
    }
}

TEST(Losses, Errors) {
    EXPECT_THROW(losses::cosine_block(Matrix(2, 3, 1.0), Matrix(2, 4, 1.0)), std::invalid_argument);
    try {
        losses::cosine_block(Matrix::from_rows({{1, 0}, {0, 0}}), Matrix(2, 2, 1.0));
        FAIL();
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("anchor row 1"), std::string::npos);
    }
    EXPECT_THROW(losses::infonce_loss(equal_block(2), config(LossKind::infonce, 0.0)), std::invalid_argument);
    auto bad = config(LossKind::sc_infonce);
    bad.delta = -1.0;
    EXPECT_THROW(losses::sc_infonce_loss(equal_block(2), bad), std::invalid_argument);
    EXPECT_THROW(losses::dcl_loss(equal_block(1), config(LossKind::dcl)), std::invalid_argument);
}

TEST(Losses, ParseNames) {
    for (auto k : {LossKind::scl, LossKind::infonce, LossKind::dcl, LossKind::sc_infonce})
        EXPECT_EQ(losses::parse_loss_kind(losses::to_string(k)), k);
    EXPECT_FALSE(losses::parse_loss_kind("nce").has_value());
}

TEST(Losses, SimilarityGradientMatchesDifferences) {
    // Differentiate with respect to the similarity table directly.
    Rng rng(12);
    const auto base = losses::cosine_block(random_matrix(5, 4, rng), random_matrix(5, 4, rng));
    for (auto kind : {LossKind::scl, LossKind::infonce, LossKind::dcl, LossKind::sc_infonce}) {
        auto cfg = random_loss(kind, rng);
        const auto r = losses::evaluate(base, cfg);
        for (std::size_t e = 0; e < base.sims.size(); ++e) {
            auto up = base;
            auto down = base;
            up.sims.data()[e] += 1e-6;
            down.sims.data()[e] -= 1e-6;
            const double num = kind == LossKind::sc_infonce
                                   ? (losses::sc_infonce_loss(up, cfg, r.alpha).value -
                                      losses::sc_infonce_loss(down, cfg, r.alpha).value) / 2e-6
                                   : (losses::evaluate(up, cfg).value - losses::evaluate(down, cfg).value) / 2e-6;
            EXPECT_NEAR(r.grad_sims.data()[e], num, 1e-8) << losses::to_string(kind) << " entry " << e;
        }
    }
}

TEST(Losses, PipelineGradientMatchesDifferences) {
    Rng rng(13);
    for (auto kind : {LossKind::scl, LossKind::infonce, LossKind::dcl, LossKind::sc_infonce})
        for (int trial = 0; trial < 5; ++trial) {
            const auto mlp = random_mlp(5, 12, 4, rng);
            const auto cfg = random_loss(kind, rng);
            const auto check = check_pipeline(mlp, random_matrix(8, 5, rng), random_matrix(8, 5, rng), cfg);
            EXPECT_LT(check.rel_error, 1e-5) << losses::to_string(kind);
        }
}
