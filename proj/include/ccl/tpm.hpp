#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ccl/matrix.hpp"
#include "ccl/rng.hpp"

namespace ccl {

inline constexpr double kConstructionTolerance = 1e-12;
inline constexpr double kDerivedTolerance = 1e-10;

/**
 * Row-stochastic matrix over explicit features: entry (i, j) is the probability
 * that augmenting feature i yields feature j.
 *
 * Construction only checks shape. Use `validate` for the probabilistic
 * invariants; `FeatureSpace` refuses matrices that do not validate.
 */
class TransitionMatrix {
public:
    TransitionMatrix() = default;
    /// Labels default to "0", "1", ... when empty.
    explicit TransitionMatrix(Matrix entries, std::vector<std::string> labels = {});

    std::size_t size() const noexcept { return entries_.rows(); }
    double operator()(std::size_t i, std::size_t j) const noexcept { return entries_(i, j); }
    std::span<const double> row(std::size_t i) const noexcept { return entries_.row(i); }
    const Matrix& entries() const noexcept { return entries_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }

    /// Stable 64-bit FNV-1a digest of labels and entry bit patterns.
    std::uint64_t hash() const noexcept;

    /// CSV with header `row_label,col_label,prob`, one line per entry, 17 significant digits.
    void write_csv(std::ostream& out) const;

private:
    Matrix entries_;
    std::vector<std::string> labels_;
};

/// Probability vector over features.
class Prior {
public:
    Prior() = default;
    explicit Prior(std::vector<double> weights) : weights_(std::move(weights)) {}
    static Prior uniform(std::size_t m) { return Prior(std::vector<double>(m, 1.0 / static_cast<double>(m))); }

    std::size_t size() const noexcept { return weights_.size(); }
    double operator[](std::size_t i) const noexcept { return weights_[i]; }
    std::span<const double> weights() const noexcept { return weights_; }

private:
    std::vector<double> weights_;
};

struct Violation {
    std::string rule;     // "row-sum", "nonnegative", "unique-labels", "shape", ...
    std::size_t row = 0;  // row / index the violation is attached to
    std::string message;  // e.g. "row 0 sums to 1.3"
};

using ValidationReport = std::vector<Violation>;

ValidationReport validate(const TransitionMatrix& tpm);
ValidationReport validate(const Prior& prior);

/// Renders a report as one violation per line.
std::string to_string(const ValidationReport& report);

struct TransitionSample {
    std::size_t source = 0;
    std::size_t target = 0;
};

/**
 * Finite explicit feature space: a TPM, the sampling prior over features, and
 * the mask of base features (prior support). Features outside the mask are
 * reachable only through augmentation.
 */
class FeatureSpace {
public:
    /// Throws std::invalid_argument when the TPM or prior fails validation or sizes disagree.
    FeatureSpace(TransitionMatrix tpm, Prior prior);

    std::size_t size() const noexcept { return tpm_.size(); }
    const TransitionMatrix& tpm() const noexcept { return tpm_; }
    const Prior& prior() const noexcept { return prior_; }
    const std::vector<bool>& base_mask() const noexcept { return base_mask_; }

    std::size_t sample_source(Rng& rng) const;
    std::size_t sample_target(std::size_t source, Rng& rng) const;

private:
    TransitionMatrix tpm_;
    Prior prior_;
    std::vector<bool> base_mask_;
    std::vector<double> prior_cdf_;
    Matrix row_cdf_;
};

/// s_k = Σ_i prior_i · A_{i,k}: the distribution of augmented features.
std::vector<double> marginal(const TransitionMatrix& tpm, const Prior& prior);

/// Source from the prior, target from the source's TPM row.
TransitionSample sample_transition(const FeatureSpace& space, Rng& rng);

/**
 * Empirical TPM with additive smoothing:
 * (count(i→j) + smoothing) / (count(i→·) + m·smoothing).
 * Rows without any mass fall back to uniform.
 */
TransitionMatrix estimate_tpm(std::span<const TransitionSample> samples, std::size_t m,
                              double smoothing = 0.0);

/// Empirical distribution of sample sources.
Prior estimate_prior(std::span<const TransitionSample> samples, std::size_t m);

/// Inverse-CDF draw from a cumulative table whose last entry is ~1.
std::size_t sample_from_cdf(std::span<const double> cdf, Rng& rng);

}  // namespace ccl
