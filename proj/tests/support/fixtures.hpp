#pragma once

#include <cmath>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/rng.hpp"
#include "ccl/tpm.hpp"

namespace ccl::testing {

inline Matrix three_class_rows() {
    return Matrix::from_rows({{0.5, 0.3, 0.2}, {0.2, 0.5, 0.3}, {0.2, 0.3, 0.5}});
}

inline FeatureSpace three_class_space() {
    return FeatureSpace(TransitionMatrix(three_class_rows()), Prior::uniform(3));
}

inline FeatureSpace identity_space(std::size_t m) {
    return FeatureSpace(TransitionMatrix(Matrix::identity(m)), Prior::uniform(m));
}

/// Row-stochastic matrix with Dirichlet(1)-like rows.
inline Matrix random_stochastic(std::size_t m, Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    Matrix a(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) s += a(i, j) = e(rng);
        for (std::size_t j = 0; j < m; ++j) a(i, j) /= s;
    }
    return a;
}

inline std::vector<double> random_prior(std::size_t m, Rng& rng) {
    std::exponential_distribution<double> e(1.0);
    std::vector<double> p(m);
    double s = 0.0;
    for (double& v : p) s += v = e(rng);
    for (double& v : p) v /= s;
    return p;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
    std::normal_distribution<double> g(0.0, scale);
    Matrix m(r, c);
    for (double& v : m.flat()) v = g(rng);
    return m;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.data()[i] - b.data()[i]));
    return d;
}

/// |a - b| / max(|a|, |b|, floor)
inline double rel_err(double a, double b, double floor = 1e-8) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

}  // namespace ccl::testing
