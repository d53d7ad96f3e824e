#include "ccl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <fmt/format.h>

#include "ccl/error.hpp"

namespace ccl::theory {

Matrix second_moment(const FeatureSpace& space) {
    const auto& a = space.tpm();
    const auto& p = space.prior();
    const std::size_t m = space.size();
    Matrix c1(m, m);
    for (std::size_t k = 0; k < m; ++k) {
        if (p[k] == 0.0) continue;
        for (std::size_t i = 0; i < m; ++i) {
            const double w = p[k] * a(k, i);
            for (std::size_t j = 0; j < m; ++j) c1(i, j) += w * a(k, j);
        }
    }
    return c1;
}

Matrix first_moment_product(const FeatureSpace& space) {
    const auto s = marginal(space.tpm(), space.prior());
    const std::size_t m = s.size();
    Matrix c2(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) c2(i, j) = s[i] * s[j];
    return c2;
}

Matrix pi_matrix(const FeatureSpace& space, double lambda) {
    if (!std::isfinite(lambda)) throw std::invalid_argument("pi_matrix: lambda must be finite");
    Matrix pi = second_moment(space);
    const Matrix c2 = first_moment_product(space);
    for (std::size_t i = 0; i < pi.size(); ++i) pi.data()[i] -= lambda * c2.data()[i];
    return pi;
}

double overlap_coefficient(const TransitionMatrix& a, std::size_t i, std::size_t j, std::size_t n,
                           std::size_t k) {
    const std::size_t m = a.size();
    double row_n = 0.0;
    double row_k = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
        row_n += a(n, c);
        row_k += a(k, c);
    }
    // Σ_{m≠i,j} A_{n,m}: i and j are excluded once each, or once when they coincide.
    const double mass_n_excl = row_n - a(n, i) - (i != j ? a(n, j) : 0.0);
    // Σ_{m≠j} A_{k,m}
    const double mass_k_excl = row_k - a(k, j);
    return a(k, i) * (mass_n_excl * a(k, j) - a(n, j) * mass_k_excl);
}

Matrix pi_matrix_corrected(const FeatureSpace& space) {
    const auto& a = space.tpm();
    const auto& p = space.prior();
    const std::size_t m = space.size();
    Matrix pi(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double acc = 0.0;
            for (std::size_t n = 0; n < m; ++n) {
                if (p[n] == 0.0) continue;
                double inner = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    if (p[k] == 0.0) continue;
                    inner += p[k] * overlap_coefficient(a, i, j, n, k);
                }
                acc += p[n] * inner;
            }
            pi(i, j) = acc;
        }
    }
    return pi;
}

ConvergencePrediction predict_target(const FeatureSpace& space, std::size_t n) {
    if (n < 2) throw std::invalid_argument(fmt::format("predict_target: n = {} must be >= 2", n));
    ConvergencePrediction out{second_moment(space), first_moment_product(space), Matrix(), n};
    const std::size_t m = space.size();
    out.target = Matrix(m, m);
    const double negatives = static_cast<double>(n - 1);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double c1 = out.c1(i, j);
            const double denom = c1 + negatives * out.c2(i, j);
            out.target(i, j) = denom > 0.0 ? c1 / denom : 0.0;
        }
    }
    return out;
}

ScaledTarget predict_scaled_target(const FeatureSpace& space, std::size_t n,
                                   const ScaledTargetConfig& cfg) {
    if (n < 2) throw std::invalid_argument(fmt::format("predict_scaled_target: n = {} must be >= 2", n));
    if (const auto fr = feasibility_check(cfg); !fr.feasible) {
        throw std::invalid_argument("predict_scaled_target: " + fr.failed.front());
    }
    const Matrix c1 = second_moment(space);
    const Matrix c2 = first_moment_product(space);
    const std::size_t m = space.size();
    const double negatives = static_cast<double>(n - 1);

    ScaledTarget out{Matrix(m, m), std::vector<EntryFlag>(m * m, EntryFlag::ok), {}};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            double v;
            EntryFlag flag = EntryFlag::ok;
            if (c2(i, j) == 0.0 && cfg.delta > 0.0) {
                v = std::numeric_limits<double>::infinity();
                flag = EntryFlag::undefined;
                out.warnings.push_back(fmt::format("entry ({}, {}) undefined: c2 = 0", i, j));
            } else if (c2(i, j) == 0.0) {
                v = -cfg.gamma;  // zero scale removes the ratio term entirely
            } else {
                v = c1(i, j) / (negatives * c2(i, j)) * cfg.delta - cfg.gamma;
            }
            if (flag == EntryFlag::ok && (v < 0.0 || v > 1.0)) {
                flag = EntryFlag::out_of_range;
                out.warnings.push_back(fmt::format("entry ({}, {}) = {} outside [0, 1]", i, j, v));
            }
            out.value(i, j) = v;
            out.flags[i * m + j] = flag;
        }
    }
    return out;
}

double expected_gradient_coefficient(double p, double c1, double c2, std::size_t n, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("expected_gradient_coefficient: tau must be > 0");
    const double negatives = static_cast<double>(n) - 1.0;
    return -(c1 * (1.0 - p) - c2 * negatives * p) / tau;
}

FeasibilityReport feasibility_check(const ScaledTargetConfig& cfg) {
    FeasibilityReport r;
    if (!(cfg.delta >= 0.0)) {
        r.feasible = false;
        r.failed.push_back(fmt::format("delta = {} violates delta >= 0", cfg.delta));
    }
    if (!(cfg.gamma >= 0.0)) {
        r.feasible = false;
        r.failed.push_back(fmt::format("gamma = {} violates gamma >= 0", cfg.gamma));
    }
    return r;
}

double l1_concentration_radius(std::size_t m, std::size_t n_samples, double confidence_delta) {
    const double log_term = static_cast<double>(m) * std::numbers::ln2 + std::log(1.0 / confidence_delta);
    return std::sqrt(2.0 * log_term / static_cast<double>(n_samples));
}

ErrorBoundReport error_bounds(const FeatureSpace& space, std::size_t n_samples,
                              double confidence_delta, double eta_max, double epsilon,
                              std::size_t candidates) {
    if (n_samples < 3) throw std::invalid_argument("error_bounds: n_samples must be >= 3");
    if (!(confidence_delta > 0.0 && confidence_delta < 1.0)) {
        throw std::invalid_argument("error_bounds: confidence delta must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("error_bounds: epsilon must be > 0");
    if (!(eta_max >= 0.0)) throw std::invalid_argument("error_bounds: eta_max must be >= 0");
    if (candidates < 2) throw std::invalid_argument("error_bounds: candidates must be >= 2");

    const auto s = marginal(space.tpm(), space.prior());
    const double s_min = *std::min_element(s.begin(), s.end());
    if (!(s_min > 0.0)) throw NumericalError("degenerate marginal: s_min = 0");

    const std::size_t m = space.size();
    const double log_term = static_cast<double>(m) * std::numbers::ln2 + std::log(1.0 / confidence_delta);
    const double s2 = s_min * s_min;
    const double nc = static_cast<double>(candidates);

    ErrorBoundReport r;
    r.s_min = s_min;
    r.eta_max = eta_max;
    r.eps_p = l1_concentration_radius(m, n_samples, confidence_delta);
    r.c1_exact = 4.0 * nc / (nc - 1.0);
    r.c2_exact = (4.0 * nc + 4.0) / (nc - 1.0);
    r.target_error_bound = 6.0 * r.eps_p / s2 + 8.0 * eta_max / s2;
    r.target_error_bound_exact = r.c1_exact * r.eps_p / s2 + r.c2_exact * eta_max / s2;
    r.sample_complexity = 288.0 / (epsilon * epsilon * s2 * s2) * log_term;
    r.eta_bound = epsilon * s2 / 16.0;
    r.denominator_margin = 0.5 * (nc - 1.0) * s2 - 2.0 * nc * (r.eps_p + eta_max);
    r.sample_condition = static_cast<double>(n_samples) >= r.sample_complexity;
    r.eta_condition = eta_max <= r.eta_bound;
    r.feasible = r.sample_condition && r.eta_condition;
    return r;
}

double max_row_error(const TransitionMatrix& estimate, const TransitionMatrix& truth) {
    if (estimate.size() != truth.size()) throw std::invalid_argument("max_row_error: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        for (std::size_t j = 0; j < truth.size(); ++j)
            worst = std::max(worst, std::abs(estimate(i, j) - truth(i, j)));
    return worst;
}

}  // namespace ccl::theory
