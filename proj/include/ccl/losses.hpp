#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ccl/matrix.hpp"

namespace ccl::losses {

enum class LossKind { scl, infonce, dcl, sc_infonce };

/// How SC-InfoNCE sets its positive weight alpha.
///   dynamic: alpha = P(anchor, positive) - 1 + delta at the current softmax, held constant
///            for differentiation. The positive-entry gradient becomes exactly -delta / tau.
///   fixed:   alpha = delta - 1 for every anchor (the P -> 0 limit).
enum class AlphaMode { dynamic, fixed };

std::string_view to_string(LossKind kind);
std::optional<LossKind> parse_loss_kind(std::string_view name);
std::string_view to_string(AlphaMode mode);
std::optional<AlphaMode> parse_alpha_mode(std::string_view name);

struct LossConfig {
    LossKind kind = LossKind::infonce;
    double tau = 1.0;
    double lambda = 0.0;  // SCL negative weight
    double delta = 1.0;   // SC-InfoNCE target scale
    double gamma = 0.0;   // SC-InfoNCE target bias (already normalized)
    AlphaMode alpha_mode = AlphaMode::dynamic;
};

/// Throws std::invalid_argument for tau <= 0 or an infeasible SC-InfoNCE (delta, gamma).
void validate(const LossConfig& cfg);

/**
 * Cosine similarities between every anchor and every candidate. The positive of
 * anchor b is candidate b. Unit vectors and norms are kept for backprop.
 */
struct SimilarityBlock {
    Matrix anchor_unit;
    Matrix candidate_unit;
    std::vector<double> anchor_norms;
    std::vector<double> candidate_norms;
    Matrix sims;

    std::size_t batch() const noexcept { return sims.rows(); }
    std::size_t positive_index(std::size_t anchor) const noexcept { return anchor; }
};

/// Throws std::invalid_argument naming the first zero-norm row.
SimilarityBlock cosine_block(const Matrix& anchors, const Matrix& candidates);

/// Softmax over all candidates of one anchor, evaluated at candidate j.
double pair_probability(const SimilarityBlock& block, std::size_t anchor, std::size_t j, double tau);

/// Full B x B table of pair probabilities.
Matrix pair_probabilities(const SimilarityBlock& block, double tau);

/// Loss averaged over anchors and its gradient with respect to `sims`.
/// Multiply the gradient by B to get the per-anchor coefficients.
struct LossResult {
    double value = 0.0;
    Matrix grad_sims;
    std::vector<double> alpha;  // SC-InfoNCE only: the alpha used for each anchor
};

LossResult scl_loss(const SimilarityBlock& block, const LossConfig& cfg);
LossResult infonce_loss(const SimilarityBlock& block, const LossConfig& cfg);
LossResult dcl_loss(const SimilarityBlock& block, const LossConfig& cfg);
/// `alpha_override`, when non-empty, replaces the per-anchor alpha (used to
/// differentiate the loss with alpha frozen).
LossResult sc_infonce_loss(const SimilarityBlock& block, const LossConfig& cfg,
                           std::span<const double> alpha_override = {});

/// Dispatches on cfg.kind.
LossResult evaluate(const SimilarityBlock& block, const LossConfig& cfg);

struct EmbeddingGrads {
    Matrix anchors;
    Matrix candidates;
};

/// Chains d(loss)/d(sims) through cosine similarity and L2 normalization back
/// to the raw embeddings the block was built from.
EmbeddingGrads backprop_to_embeddings(const SimilarityBlock& block, const Matrix& grad_sims);

}  // namespace ccl::losses
