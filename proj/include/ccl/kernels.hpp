#pragma once

// Data-parallel building blocks for the B x B similarity computations.
//
// Every kernel exists twice with identical signatures: `serial::` is the plain
// reference kept for testing, `parallel::` is the OpenMP version used by the
// library. Each output element is written by exactly one thread and every sum
// runs in a fixed order, so both variants agree bitwise for any thread count.

#include <cstddef>
#include <span>
#include <vector>

#include "ccl/matrix.hpp"

namespace ccl::kernels {

inline constexpr double kMinRowNorm = 1e-12;

/// Index of the first row whose L2 norm is below kMinRowNorm, or rows() if none.
std::size_t first_degenerate_row(const Matrix& x);

namespace serial {

/// unit(r) = x(r) / ||x(r)||. Rows must be non-degenerate (checked by the caller).
void normalize_rows(const Matrix& x, Matrix& unit, std::vector<double>& norms);
/// out = a cᵀ
void gram(const Matrix& a, const Matrix& c, Matrix& out);
/// p(r, :) = softmax(s(r, :) / tau), max-shifted. When given, log_norm(r) receives
/// log Σ_j exp(s(r, j) / tau).
void row_softmax(const Matrix& s, double tau, Matrix& p, std::vector<double>* log_norm = nullptr);
/// grad_a = g c_unit, grad_c = gᵀ a_unit
void backprop_gram(const Matrix& g, const Matrix& a_unit, const Matrix& c_unit, Matrix& grad_a,
                   Matrix& grad_c);
/// grad_raw(r) = (grad_unit(r) - unit(r) <unit(r), grad_unit(r)>) / norms(r)
void backprop_normalize(const Matrix& unit, std::span<const double> norms, const Matrix& grad_unit,
                        Matrix& grad_raw);
/// sums(i, j) accumulates values(a, b) over a labelled i and b labelled j;
/// a == b is skipped when skip_diagonal. counts holds the number of terms.
void class_pair_sums(const Matrix& values, std::span<const std::size_t> row_labels,
                     std::span<const std::size_t> col_labels, std::size_t classes,
                     bool skip_diagonal, Matrix& sums, Matrix& counts);

}  // namespace serial

namespace parallel {

void normalize_rows(const Matrix& x, Matrix& unit, std::vector<double>& norms);
void gram(const Matrix& a, const Matrix& c, Matrix& out);
void row_softmax(const Matrix& s, double tau, Matrix& p, std::vector<double>* log_norm = nullptr);
void backprop_gram(const Matrix& g, const Matrix& a_unit, const Matrix& c_unit, Matrix& grad_a,
                   Matrix& grad_c);
void backprop_normalize(const Matrix& unit, std::span<const double> norms, const Matrix& grad_unit,
                        Matrix& grad_raw);
void class_pair_sums(const Matrix& values, std::span<const std::size_t> row_labels,
                     std::span<const std::size_t> col_labels, std::size_t classes,
                     bool skip_diagonal, Matrix& sums, Matrix& counts);

/// Threads OpenMP will use (1 when built without OpenMP).
int max_threads();

}  // namespace parallel

using parallel::backprop_gram;
using parallel::backprop_normalize;
using parallel::class_pair_sums;
using parallel::gram;
using parallel::normalize_rows;
using parallel::row_softmax;

}  // namespace ccl::kernels
