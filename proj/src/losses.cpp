#include "ccl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "ccl/kernels.hpp"
#include "ccl/theory.hpp"

namespace ccl::losses {

std::string_view to_string(LossKind kind) {
    switch (kind) {
        case LossKind::scl: return "scl";
        case LossKind::infonce: return "infonce";
        case LossKind::dcl: return "dcl";
        case LossKind::sc_infonce: return "sc_infonce";
    }
    return "unknown";
}

std::optional<LossKind> parse_loss_kind(std::string_view name) {
    if (name == "scl") return LossKind::scl;
    if (name == "infonce") return LossKind::infonce;
    if (name == "dcl") return LossKind::dcl;
    if (name == "sc_infonce" || name == "sc-infonce") return LossKind::sc_infonce;
    return std::nullopt;
}

std::string_view to_string(AlphaMode mode) {
    return mode == AlphaMode::dynamic ? "dynamic" : "fixed";
}

std::optional<AlphaMode> parse_alpha_mode(std::string_view name) {
    if (name == "dynamic") return AlphaMode::dynamic;
    if (name == "fixed" || name == "static") return AlphaMode::fixed;
    return std::nullopt;
}

void validate(const LossConfig& cfg) {
    if (!(cfg.tau > 0.0) || !std::isfinite(cfg.tau)) {
        throw std::invalid_argument(fmt::format("tau = {} must be a finite positive number", cfg.tau));
    }
    if (!std::isfinite(cfg.lambda)) throw std::invalid_argument("lambda must be finite");
    if (cfg.kind == LossKind::sc_infonce) {
        const auto report = theory::feasibility_check({cfg.delta, cfg.gamma});
        if (!report.feasible) throw std::invalid_argument("infeasible SC-InfoNCE config: " + report.failed.front());
    }
}

SimilarityBlock cosine_block(const Matrix& anchors, const Matrix& candidates) {
    if (anchors.cols() != candidates.cols()) {
        throw std::invalid_argument(fmt::format("cosine_block: anchor dim {} != candidate dim {}",
                                                anchors.cols(), candidates.cols()));
    }
    if (const auto r = kernels::first_degenerate_row(anchors); r < anchors.rows()) {
        throw std::invalid_argument(fmt::format("cosine_block: anchor row {} has zero norm", r));
    }
    if (const auto r = kernels::first_degenerate_row(candidates); r < candidates.rows()) {
        throw std::invalid_argument(fmt::format("cosine_block: candidate row {} has zero norm", r));
    }
    SimilarityBlock block;
    kernels::normalize_rows(anchors, block.anchor_unit, block.anchor_norms);
    kernels::normalize_rows(candidates, block.candidate_unit, block.candidate_norms);
    kernels::gram(block.anchor_unit, block.candidate_unit, block.sims);
    // Rounding can push |cos| a hair past 1.
    for (double& v : block.sims.flat()) v = std::clamp(v, -1.0, 1.0);
    return block;
}

double pair_probability(const SimilarityBlock& block, std::size_t anchor, std::size_t j, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("pair_probability: tau must be > 0");
    const auto row = block.sims.row(anchor);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double s : row) z += std::exp((s - mx) / tau);
    return std::exp((row[j] - mx) / tau) / z;
}

Matrix pair_probabilities(const SimilarityBlock& block, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("pair_probabilities: tau must be > 0");
    Matrix p;
    kernels::row_softmax(block.sims, tau, p);
    return p;
}

namespace {

/// log Σ_j exp(row_j / tau), skipping `skip` when it is a valid index.
double log_sum_exp(std::span<const double> row, double tau, std::size_t skip) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < row.size(); ++j)
        if (j != skip) mx = std::max(mx, row[j] / tau);
    double z = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j)
        if (j != skip) z += std::exp(row[j] / tau - mx);
    return mx + std::log(z);
}

double off_diagonal_sum(std::span<const double> row, std::size_t a) {
    double acc = 0.0;
    for (std::size_t b = 0; b < row.size(); ++b)
        if (b != a) acc += row[b];
    return acc;
}

/// InfoNCE value and gradient; `probs` receives the softmax table.
LossResult infonce_core(const SimilarityBlock& block, double tau, Matrix& probs) {
    const std::size_t batch = block.batch();
    const double inv = 1.0 / (tau * static_cast<double>(batch));
    std::vector<double> log_norm;
    kernels::row_softmax(block.sims, tau, probs, &log_norm);
    LossResult out;
    out.grad_sims = Matrix(batch, batch);
    double total = 0.0;
    for (std::size_t a = 0; a < batch; ++a) {
        total += log_norm[a] - block.sims(a, a) / tau;
        for (std::size_t b = 0; b < batch; ++b) out.grad_sims(a, b) = probs(a, b) * inv;
        out.grad_sims(a, a) -= inv;
    }
    out.value = total / static_cast<double>(batch);
    return out;
}

}  // namespace

LossResult scl_loss(const SimilarityBlock& block, const LossConfig& cfg) {
    const std::size_t batch = block.batch();
    const double inv = 1.0 / static_cast<double>(batch);
    LossResult out;
    out.grad_sims = Matrix(batch, batch, cfg.lambda * inv);
    double total = 0.0;
    for (std::size_t a = 0; a < batch; ++a) {
        const auto row = block.sims.row(a);
        total += -row[a] + cfg.lambda * off_diagonal_sum(row, a);
        out.grad_sims(a, a) = -inv;
    }
    out.value = total * inv;
    return out;
}

LossResult infonce_loss(const SimilarityBlock& block, const LossConfig& cfg) {
    validate(cfg);
    Matrix probs;
    return infonce_core(block, cfg.tau, probs);
}

LossResult dcl_loss(const SimilarityBlock& block, const LossConfig& cfg) {
    validate(cfg);
    const std::size_t batch = block.batch();
    if (batch < 2) throw std::invalid_argument("dcl_loss: needs at least 2 candidates");
    const double tau = cfg.tau;
    const double inv = 1.0 / (tau * static_cast<double>(batch));
    LossResult out;
    out.grad_sims = Matrix(batch, batch);
    double total = 0.0;
    for (std::size_t a = 0; a < batch; ++a) {
        const auto row = block.sims.row(a);
        const double lse = log_sum_exp(row, tau, a);
        total += lse - row[a] / tau;
        for (std::size_t b = 0; b < batch; ++b)
            out.grad_sims(a, b) = b == a ? -inv : std::exp(row[b] / tau - lse) * inv;
    }
    out.value = total / static_cast<double>(batch);
    return out;
}

LossResult sc_infonce_loss(const SimilarityBlock& block, const LossConfig& cfg,
                           std::span<const double> alpha_override) {
    validate(cfg);
    const std::size_t batch = block.batch();
    if (!alpha_override.empty() && alpha_override.size() != batch) {
        throw std::invalid_argument("sc_infonce_loss: alpha_override must have one entry per anchor");
    }
    const double tau = cfg.tau;
    const double inv = 1.0 / (tau * static_cast<double>(batch));
    Matrix probs;
    LossResult out = infonce_core(block, tau, probs);
    out.alpha.resize(batch);
    double extra = 0.0;
    for (std::size_t a = 0; a < batch; ++a) {
        double alpha;
        if (!alpha_override.empty()) {
            alpha = alpha_override[a];
        } else if (cfg.alpha_mode == AlphaMode::dynamic) {
            alpha = probs(a, a) - 1.0 + cfg.delta;
        } else {
            alpha = cfg.delta - 1.0;
        }
        out.alpha[a] = alpha;
        const auto row = block.sims.row(a);
        extra += alpha * row[a] - cfg.gamma * off_diagonal_sum(row, a);
        for (std::size_t b = 0; b < batch; ++b) {
            if (b == a)
                out.grad_sims(a, b) -= alpha * inv;
            else
                out.grad_sims(a, b) += cfg.gamma * inv;
        }
    }
    out.value -= extra / (tau * static_cast<double>(batch));
    return out;
}

LossResult evaluate(const SimilarityBlock& block, const LossConfig& cfg) {
    switch (cfg.kind) {
        case LossKind::scl: return scl_loss(block, cfg);
        case LossKind::infonce: return infonce_loss(block, cfg);
        case LossKind::dcl: return dcl_loss(block, cfg);
        case LossKind::sc_infonce: return sc_infonce_loss(block, cfg);
    }
    throw std::invalid_argument("unknown loss kind");
}

EmbeddingGrads backprop_to_embeddings(const SimilarityBlock& block, const Matrix& grad_sims) {
    Matrix grad_anchor_unit;
    Matrix grad_candidate_unit;
    kernels::backprop_gram(grad_sims, block.anchor_unit, block.candidate_unit, grad_anchor_unit,
                           grad_candidate_unit);
    EmbeddingGrads out;
    kernels::backprop_normalize(block.anchor_unit, block.anchor_norms, grad_anchor_unit, out.anchors);
    kernels::backprop_normalize(block.candidate_unit, block.candidate_norms, grad_candidate_unit,
                                out.candidates);
    return out;
}

}  // namespace ccl::losses
