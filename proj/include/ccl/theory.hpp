#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/tpm.hpp"

namespace ccl::theory {

/// Second moment c1, product of first moments c2, and the InfoNCE fixed point
/// c1 / (c1 + (n-1) c2) for softmax candidate count n.
struct ConvergencePrediction {
    Matrix c1;
    Matrix c2;
    Matrix target;
    std::size_t n = 0;
};

/// Scale (delta) and bias (gamma) of the SC-InfoNCE target.
struct ScaledTargetConfig {
    double delta = 1.0;
    double gamma = 0.0;
};

enum class EntryFlag { ok, out_of_range, undefined };

struct ScaledTarget {
    Matrix value;                 // raw, never clipped; +inf where undefined
    std::vector<EntryFlag> flags; // row-major, one per entry
    std::vector<std::string> warnings;

    EntryFlag flag(std::size_t i, std::size_t j) const { return flags[i * value.cols() + j]; }
};

struct FeasibilityReport {
    bool feasible = true;
    std::vector<std::string> failed;  // one message per failed condition
};

struct ErrorBoundReport {
    double s_min = 0.0;
    double eta_max = 0.0;
    double eps_p = 0.0;               // l1 concentration radius of the empirical prior
    double target_error_bound = 0.0;  // with the constants 6 and 8
    double target_error_bound_exact = 0.0;  // with 4n/(n-1) and (4n+4)/(n-1)
    double c1_exact = 0.0;
    double c2_exact = 0.0;
    double sample_complexity = 0.0;
    double eta_bound = 0.0;
    double denominator_margin = 0.0;  // (n-1) s_min^2 / 2 - 2n(eps_p + eta_max), candidates n
    bool sample_condition = false;
    bool eta_condition = false;
    bool feasible = false;
};

/// c1_{ij} = Σ_k P_k A_{k,i} A_{k,j}.
Matrix second_moment(const FeatureSpace& space);
/// c2_{ij} = s_i s_j with s = marginal.
Matrix first_moment_product(const FeatureSpace& space);

/// Expected SCL gradient weights: c1 - lambda * c2 (the column covariance at lambda = 1).
Matrix pi_matrix(const FeatureSpace& space, double lambda);

/// C_{ij}^{nk} of the overlap-corrected gradient weights.
double overlap_coefficient(const TransitionMatrix& a, std::size_t i, std::size_t j,
                           std::size_t n, std::size_t k);

/// Gradient weights that account for a feature showing up as both positive and
/// negative for the same anchor: Σ_n P_n Σ_k P_k C_{ij}^{nk}.
Matrix pi_matrix_corrected(const FeatureSpace& space);

/// InfoNCE convergence target for n softmax candidates. Throws for n < 2.
ConvergencePrediction predict_target(const FeatureSpace& space, std::size_t n);

/// (c1 / ((n-1) c2)) * delta - gamma, with per-entry range flags.
ScaledTarget predict_scaled_target(const FeatureSpace& space, std::size_t n,
                                   const ScaledTargetConfig& cfg);

/// Scalar multiplying the similarity gradient in the expected InfoNCE update:
/// -(1/tau) (c1 (1-p) - c2 (n-1) p).
double expected_gradient_coefficient(double p, double c1, double c2, std::size_t n, double tau);

/// Sufficient condition delta >= 0 and gamma >= 0.
FeasibilityReport feasibility_check(const ScaledTargetConfig& cfg);

/// eps_p(n, delta) = sqrt(2 (m ln 2 + ln(1/delta)) / n).
double l1_concentration_radius(std::size_t m, std::size_t n_samples, double confidence_delta);

/**
 * Perturbation bound on the InfoNCE target under TPM / prior estimation error.
 * `candidates` is the softmax candidate count used for the exact constants and
 * the denominator margin.
 */
ErrorBoundReport error_bounds(const FeatureSpace& space, std::size_t n_samples,
                              double confidence_delta, double eta_max, double epsilon,
                              std::size_t candidates = 1000);

/// max_k max_j |Â_{k,j} - A_{k,j}|.
double max_row_error(const TransitionMatrix& estimate, const TransitionMatrix& truth);

}  // namespace ccl::theory
