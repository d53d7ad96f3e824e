#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "ccl/losses.hpp"
#include "ccl/matrix.hpp"

namespace ccl::metrics {

/// Labels of the anchors and candidates of one similarity block.
struct BlockLabels {
    std::vector<std::size_t> anchors;
    std::vector<std::size_t> candidates;
};

/**
 * Measured co-occurrence probabilities per class pair.
 * `mean(i, j)` averages pair_probability over anchors of class i and
 * candidates of class j, first within a block and then across blocks; `sd` is
 * the across-block standard deviation. Pairs never observed are NaN and listed
 * in `missing`.
 */
struct MeasuredP {
    Matrix mean;
    Matrix sd;
    Matrix symmetric;  // (mean + meanᵀ) / 2
    double asymmetry = 0.0;  // max |mean(i,j) - mean(j,i)|
    std::vector<std::pair<std::size_t, std::size_t>> missing;
};

MeasuredP measure_p(std::span<const losses::SimilarityBlock> blocks,
                    std::span<const BlockLabels> labels, std::size_t classes, double tau);

/// Same as measure_p from precomputed probability tables (one per block).
MeasuredP measure_p_from_probabilities(std::span<const Matrix> probabilities,
                                       std::span<const BlockLabels> labels, std::size_t classes);

/// Mean pairwise cosine similarity per class pair; self-pairs excluded.
/// Classes without a partner are NaN and listed in `missing`.
struct ClassSimilarity {
    Matrix mean;
    std::vector<std::pair<std::size_t, std::size_t>> missing;
};

ClassSimilarity class_similarity(const Matrix& embeddings, std::span<const std::size_t> labels,
                                 std::size_t classes);

/// Pair-level similarity summary: overall, same-class and different-class means.
struct SimilaritySummary {
    double mean = 0.0;
    double intra = 0.0;
    double inter = 0.0;
};

SimilaritySummary similarity_summary(const Matrix& embeddings, std::span<const std::size_t> labels,
                                     std::size_t classes);

/// Mean |measured - predicted| over all entries of the symmetrized matrices.
double mae(const Matrix& measured, const Matrix& predicted);

/// Per-row mean absolute error of the symmetrized matrices.
std::vector<double> row_mae(const Matrix& measured, const Matrix& predicted);

struct OrderingReport {
    bool matches = false;
    double rank_correlation = 0.0;  // Spearman over the unique pairs i <= j
    std::size_t strict_pairs = 0;   // comparisons with distinct predicted values
    std::size_t violations = 0;
    std::vector<std::pair<std::size_t, std::size_t>> predicted_order;  // descending
    std::vector<std::pair<std::size_t, std::size_t>> measured_order;
    std::string note;
};

/// Compares the descending order of the unique class pairs. Pairs with tied
/// predicted values are not compared.
OrderingReport ordering_check(const Matrix& measured, const Matrix& predicted);

/// Eigenvalues (descending) of the covariance of the L2-normalized rows.
/// `trace` is the covariance trace for the sum check.
struct Spectrum {
    std::vector<double> eigenvalues;
    double trace = 0.0;
};

Spectrum covariance_spectrum(const Matrix& embeddings);

}  // namespace ccl::metrics
