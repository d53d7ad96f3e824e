#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccl/error.hpp"
#include "ccl/theory.hpp"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace ccl;
using namespace ccl::testing;

namespace {

FeatureSpace random_space(std::size_t m, Rng& rng) {
    return FeatureSpace(TransitionMatrix(random_stochastic(m, rng)), Prior(random_prior(m, rng)));
}

std::vector<double> weights(const FeatureSpace& s) {
    return {s.prior().weights().begin(), s.prior().weights().end()};
}

}  // namespace

TEST(Moments, ThreeClassByHand) {
    const auto space = three_class_space();
    const auto c1 = theory::second_moment(space);
    const auto c2 = theory::first_moment_product(space);
    // c1(0,0) = (0.25 + 0.04 + 0.04) / 3, s = (0.9, 1.1, 1.0) / 3
    EXPECT_NEAR(c1(0, 0), 0.11, 1e-15);
    EXPECT_NEAR(c1(0, 1), (0.15 + 0.10 + 0.06) / 3.0, 1e-15);
    EXPECT_NEAR(c2(0, 0), 0.09, 1e-15);
    EXPECT_NEAR(c2(1, 2), 1.1 / 3.0 / 3.0, 1e-15);
}

TEST(Moments, MatchDirectSums) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const auto space = random_space(2 + trial % 6, rng);
        const auto a = space.tpm().entries();
        const auto p = weights(space);
        EXPECT_LT(max_abs_diff(theory::second_moment(space), c1_oracle(a, p)), 1e-14);
        const auto s = s_oracle(a, p);
        const auto c2 = theory::first_moment_product(space);
        for (std::size_t i = 0; i < s.size(); ++i)
            for (std::size_t j = 0; j < s.size(); ++j) EXPECT_NEAR(c2(i, j), s[i] * s[j], 1e-15);
    }
}

TEST(PredictTarget, ThreeClassValues) {
    const auto pred = theory::predict_target(three_class_space(), 1000);
    // 0.11 / (0.11 + 999 * 0.09)
    EXPECT_NEAR(pred.target(0, 0), 0.11 / 90.02, 1e-15);
    const double expected[3][3] = {{0.00122195, 0.000939451, 0.000866782},
                                   {0.000939451, 0.00106605, 0.000981836},
                                   {0.000866782, 0.000981836, 0.00113984}};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) EXPECT_LT(rel_err(pred.target(i, j), expected[i][j]), 5e-6) << i << j;
}

TEST(PredictTarget, IdentityClosedForm) {
    // c1 = diag(1/m), c2 = 1/m^2, so the diagonal is (1/m) / (1/m + (n-1)/m^2) = m / (m + n - 1).
    for (std::size_t m : {2u, 3u, 5u})
        for (std::size_t n : {2u, 10u, 1000u}) {
            const auto pred = theory::predict_target(identity_space(m), n);
            for (std::size_t i = 0; i < m; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                    const double want = i == j ? double(m) / double(m + n - 1) : 0.0;
                    EXPECT_NEAR(pred.target(i, j), want, 1e-15);
                }
        }
}

TEST(PredictTarget, FixedPointIdentityAndRange) {
    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        const auto space = random_space(2 + trial % 5, rng);
        const std::size_t n = 2 + trial * 37;
        const auto pred = theory::predict_target(space, n);
        for (std::size_t i = 0; i < space.size(); ++i)
            for (std::size_t j = 0; j < space.size(); ++j) {
                const double t = pred.target(i, j);
                EXPECT_GE(t, 0.0);
                EXPECT_LE(t, 1.0);
                EXPECT_NEAR(t * (pred.c1(i, j) + double(n - 1) * pred.c2(i, j)), pred.c1(i, j), 1e-15);
                EXPECT_NEAR(t, pred.target(j, i), 1e-15);
                EXPECT_NEAR(theory::expected_gradient_coefficient(t, pred.c1(i, j), pred.c2(i, j), n, 0.7), 0.0,
                            1e-14);
            }
    }
}

TEST(PredictTarget, PermutationEquivariant) {
    Rng rng(17);
    const std::size_t m = 5;
    const auto space = random_space(m, rng);
    std::vector<std::size_t> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix pa(m, m);
    std::vector<double> pp(m);
    for (std::size_t i = 0; i < m; ++i) {
        pp[i] = space.prior()[perm[i]];
        for (std::size_t j = 0; j < m; ++j) pa(i, j) = space.tpm()(perm[i], perm[j]);
    }
    const FeatureSpace permuted{TransitionMatrix(pa), Prior(pp)};
    const auto a = theory::predict_target(space, 1000);
    const auto b = theory::predict_target(permuted, 1000);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(b.target(i, j), a.target(perm[i], perm[j]), 1e-15);
}

TEST(PredictTarget, DecreasesWithCandidates) {
    const auto space = three_class_space();
    const auto small = theory::predict_target(space, 10);
    const auto large = theory::predict_target(space, 1000);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_GT(small.target.data()[i], large.target.data()[i]);
    EXPECT_THROW(theory::predict_target(space, 1), std::invalid_argument);
}

TEST(PiMatrix, CovarianceAtLambdaOne) {
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const auto space = random_space(2 + trial % 6, rng);
        const auto pi = theory::pi_matrix(space, 1.0);
        EXPECT_LT(max_abs_diff(pi, covariance_oracle(space.tpm().entries(), weights(space))), 1e-14);
        // Covariance rows sum to zero because every TPM row sums to one.
        for (std::size_t i = 0; i < space.size(); ++i) {
            double r = 0.0;
            for (std::size_t j = 0; j < space.size(); ++j) r += pi(i, j);
            EXPECT_NEAR(r, 0.0, 1e-14);
        }
    }
}

TEST(PiMatrix, LambdaZeroIsSecondMoment) {
    const auto space = three_class_space();
    EXPECT_LT(max_abs_diff(theory::pi_matrix(space, 0.0), theory::second_moment(space)), 1e-16);
}

TEST(PiCorrected, MatchesEnumeration) {
    Rng rng(29);
    for (std::size_t m = 2; m <= 5; ++m)
        for (int trial = 0; trial < 5; ++trial) {
            const auto space = random_space(m, rng);
            EXPECT_LT(max_abs_diff(theory::pi_matrix_corrected(space),
                                   corrected_oracle(space.tpm().entries(), weights(space))),
                      1e-14);
        }
}

// Identity: P_i (1 - P_i) on the diagonal, -P_i P_j off it.
TEST(PiCorrected, IdentityClosedForm) {
    const FeatureSpace space(TransitionMatrix(Matrix::identity(3)), Prior({0.2, 0.3, 0.5}));
    const auto pi = theory::pi_matrix_corrected(space);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            const double pi_i = space.prior()[i];
            const double want = i == j ? pi_i * (1.0 - pi_i) : -pi_i * space.prior()[j];
            EXPECT_NEAR(pi(i, j), want, 1e-15);
        }
}

TEST(PiCorrected, EqualRows) {
    // Every row r: diagonal 0, off-diagonal -r_i^2 r_j.
    const std::vector<double> r{0.1, 0.6, 0.3};
    Matrix a(3, 3);
    for (std::size_t k = 0; k < 3; ++k)
        for (std::size_t j = 0; j < 3; ++j) a(k, j) = r[j];
    const auto pi = theory::pi_matrix_corrected(FeatureSpace(TransitionMatrix(a), Prior({0.5, 0.25, 0.25})));
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(pi(i, j), i == j ? 0.0 : -r[i] * r[i] * r[j], 1e-15);
}

TEST(ScaledTarget, ValuesAndFlags) {
    const auto space = three_class_space();
    const auto unit = theory::predict_scaled_target(space, 1000, {1.0, 0.0});
    EXPECT_NEAR(unit.value(0, 0), 0.11 / (999.0 * 0.09), 1e-15);
    const auto base = theory::predict_target(space, 1000);
    for (std::size_t i = 0; i < 9; ++i) EXPECT_GT(unit.value.data()[i], base.target.data()[i]);

    const auto half = theory::predict_scaled_target(space, 1000, {0.5, 0.0});
    for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(half.value.data()[i], 0.5 * unit.value.data()[i], 1e-16);

    const auto shifted = theory::predict_scaled_target(space, 1000, {1.0, 0.01});
    EXPECT_EQ(shifted.flag(0, 0), theory::EntryFlag::out_of_range);
    EXPECT_LT(shifted.value(0, 0), 0.0);  // raw, not clipped
    EXPECT_FALSE(shifted.warnings.empty());

    const auto zero = theory::predict_scaled_target(space, 1000, {0.0, 0.0});
    for (double v : zero.value.flat()) EXPECT_EQ(v, 0.0);
}

TEST(ScaledTarget, UndefinedWhereMarginalVanishes) {
    const FeatureSpace space(TransitionMatrix(Matrix::identity(2)), Prior({1.0, 0.0}));
    const auto st = theory::predict_scaled_target(space, 10, {1.0, 0.0});
    EXPECT_EQ(st.flag(1, 1), theory::EntryFlag::undefined);
    EXPECT_TRUE(std::isinf(st.value(1, 1)));
    EXPECT_EQ(st.flag(0, 0), theory::EntryFlag::ok);
}

TEST(ScaledTarget, RejectsInfeasibleConfig) {
    const auto space = three_class_space();
    EXPECT_THROW(theory::predict_scaled_target(space, 1000, {-0.5, 0.0}), std::invalid_argument);
    EXPECT_THROW(theory::predict_scaled_target(space, 1000, {1.0, -0.1}), std::invalid_argument);
    EXPECT_THROW(theory::predict_scaled_target(space, 1, {1.0, 0.0}), std::invalid_argument);
}

TEST(Feasibility, Conditions) {
    EXPECT_TRUE(theory::feasibility_check({1.0, 0.0}).feasible);
    EXPECT_TRUE(theory::feasibility_check({0.0, 0.0}).feasible);
    EXPECT_EQ(theory::feasibility_check({-1.0, -1.0}).failed.size(), 2u);
    EXPECT_FALSE(theory::feasibility_check({std::nan(""), 0.0}).feasible);
}

TEST(GradientCoefficient, Limits) {
    EXPECT_DOUBLE_EQ(theory::expected_gradient_coefficient(0.0, 0.2, 0.1, 11, 0.5), -0.4);
    EXPECT_DOUBLE_EQ(theory::expected_gradient_coefficient(1.0, 0.2, 0.1, 11, 0.5), 2.0);
    EXPECT_THROW(theory::expected_gradient_coefficient(0.5, 0.2, 0.1, 11, 0.0), std::invalid_argument);
    // Monotone in p: below the fixed point it pushes up, above it pushes down.
    EXPECT_LT(theory::expected_gradient_coefficient(0.001, 0.11, 0.09, 1000, 1.0), 0.0);
    EXPECT_GT(theory::expected_gradient_coefficient(0.002, 0.11, 0.09, 1000, 1.0), 0.0);
}

TEST(Bounds, ConstantsByHand) {
    const auto r = theory::error_bounds(three_class_space(), 100000, 0.05, 0.0, 0.1, 1000);
    EXPECT_NEAR(r.s_min, 0.3, 1e-15);
    const long double log_term = 3.0L * std::log(2.0L) + std::log(20.0L);
    const long double eps = std::sqrt(2.0L * log_term / 100000.0L);
    EXPECT_LT(rel_err(r.eps_p, double(eps)), 1e-12);
    EXPECT_LT(rel_err(r.sample_complexity, double(288.0L / (0.01L * 0.0081L) * log_term)), 1e-12);
    EXPECT_NEAR(r.sample_complexity, 1.8045e7, 0.0001e7);
    EXPECT_NEAR(r.eta_bound, 0.1 * 0.09 / 16.0, 1e-18);
    EXPECT_NEAR(r.target_error_bound, 6.0 * r.eps_p / 0.09, 1e-12);
    EXPECT_NEAR(r.c1_exact, 4000.0 / 999.0, 1e-12);
    EXPECT_NEAR(r.c2_exact, 4004.0 / 999.0, 1e-12);
    EXPECT_FALSE(r.sample_condition);
    EXPECT_TRUE(r.eta_condition);
}

TEST(Bounds, MonotoneAndErrors) {
    const auto space = three_class_space();
    const auto a = theory::error_bounds(space, 1000, 0.05, 0.0, 0.1);
    const auto b = theory::error_bounds(space, 100000, 0.05, 0.0, 0.1);
    const auto c = theory::error_bounds(space, 100000, 0.05, 0.01, 0.1);
    EXPECT_GT(a.eps_p, b.eps_p);
    EXPECT_GT(c.target_error_bound, b.target_error_bound);
    EXPECT_FALSE(c.eta_condition);
    const auto big = theory::error_bounds(space, 20000000, 0.05, 0.0, 0.1);
    EXPECT_TRUE(big.feasible);
    EXPECT_THROW(theory::error_bounds(space, 1000, 1.0, 0.0, 0.1), std::invalid_argument);
    EXPECT_THROW(theory::error_bounds(space, 1000, 0.05, -1.0, 0.1), std::invalid_argument);
    EXPECT_THROW(theory::error_bounds(space, 1000, 0.05, 0.0, 0.0), std::invalid_argument);
    const FeatureSpace degenerate(TransitionMatrix(Matrix::identity(2)), Prior({1.0, 0.0}));
    EXPECT_THROW(theory::error_bounds(degenerate, 1000, 0.05, 0.0, 0.1), NumericalError);
}

TEST(Bounds, HoldEmpirically) {
    const auto space = three_class_space();
    const auto truth = theory::predict_target(space, 1000);
    Rng rng(99);
    int held = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        std::vector<TransitionSample> samples(20000);
        for (auto& s : samples) s = sample_transition(space, rng);
        const auto a_hat = estimate_tpm(samples, 3);
        const FeatureSpace est(a_hat, estimate_prior(samples, 3));
        const auto pred = theory::predict_target(est, 1000);
        const double err = max_abs_diff(pred.target, truth.target);
        const auto r = theory::error_bounds(space, samples.size(), 0.05,
                                            theory::max_row_error(a_hat, space.tpm()), 0.1);
        held += err <= r.target_error_bound;
    }
    EXPECT_GE(held, 19);
}

TEST(MaxRowError, Basic) {
    const TransitionMatrix a(three_class_rows());
    const TransitionMatrix b(Matrix::from_rows({{0.45, 0.35, 0.2}, {0.2, 0.5, 0.3}, {0.2, 0.3, 0.5}}));
    EXPECT_NEAR(theory::max_row_error(a, b), 0.05, 1e-15);
    EXPECT_EQ(theory::max_row_error(a, a), 0.0);
}
