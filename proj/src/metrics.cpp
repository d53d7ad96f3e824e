#include "ccl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "ccl/kernels.hpp"

namespace ccl::metrics {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_labels(std::span<const std::size_t> labels, std::size_t expected, std::size_t classes,
                  const char* what) {
    if (labels.size() != expected) {
        throw std::invalid_argument(fmt::format("{}: {} labels for {} rows", what, labels.size(), expected));
    }
    for (std::size_t l : labels)
        if (l >= classes) throw std::invalid_argument(fmt::format("{}: label {} >= {} classes", what, l, classes));
}

Matrix unit_rows(const Matrix& x) {
    if (const auto r = kernels::first_degenerate_row(x); r < x.rows()) {
        throw std::invalid_argument(fmt::format("embedding row {} has zero norm", r));
    }
    Matrix unit;
    std::vector<double> norms;
    kernels::normalize_rows(x, unit, norms);
    return unit;
}

}  // namespace

MeasuredP measure_p_from_probabilities(std::span<const Matrix> probabilities,
                                       std::span<const BlockLabels> labels, std::size_t classes) {
    if (probabilities.empty()) throw std::invalid_argument("measure_p: needs at least one block");
    if (probabilities.size() != labels.size()) throw std::invalid_argument("measure_p: one label set per block");

    Matrix total(classes, classes);
    Matrix total_sq(classes, classes);
    Matrix seen(classes, classes);
    for (std::size_t b = 0; b < probabilities.size(); ++b) {
        const Matrix& p = probabilities[b];
        check_labels(labels[b].anchors, p.rows(), classes, "measure_p anchors");
        check_labels(labels[b].candidates, p.cols(), classes, "measure_p candidates");
        Matrix sums;
        Matrix counts;
        kernels::class_pair_sums(p, labels[b].anchors, labels[b].candidates, classes, false, sums, counts);
        for (std::size_t i = 0; i < classes; ++i)
            for (std::size_t j = 0; j < classes; ++j) {
                if (counts(i, j) == 0.0) continue;
                const double block_mean = sums(i, j) / counts(i, j);
                total(i, j) += block_mean;
                total_sq(i, j) += block_mean * block_mean;
                seen(i, j) += 1.0;
            }
    }

    MeasuredP out{Matrix(classes, classes), Matrix(classes, classes), Matrix(classes, classes), 0.0, {}};
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            const double n = seen(i, j);
            if (n == 0.0) {
                out.mean(i, j) = kNaN;
                out.sd(i, j) = kNaN;
                out.missing.emplace_back(i, j);
                continue;
            }
            const double mean = total(i, j) / n;
            out.mean(i, j) = mean;
            out.sd(i, j) = n > 1.0 ? std::sqrt(std::max(0.0, (total_sq(i, j) - n * mean * mean) / (n - 1.0))) : 0.0;
        }
    out.symmetric = symmetrized(out.mean);
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j)
            if (std::isfinite(out.mean(i, j)) && std::isfinite(out.mean(j, i)))
                out.asymmetry = std::max(out.asymmetry, std::abs(out.mean(i, j) - out.mean(j, i)));
    return out;
}

MeasuredP measure_p(std::span<const losses::SimilarityBlock> blocks, std::span<const BlockLabels> labels,
                    std::size_t classes, double tau) {
    std::vector<Matrix> probs;
    probs.reserve(blocks.size());
    for (const auto& block : blocks) probs.push_back(losses::pair_probabilities(block, tau));
    return measure_p_from_probabilities(probs, labels, classes);
}

namespace {

/// Sum of cosine similarities over all pairs (a, b), a != b, with labels (i, j),
/// from per-class sums of unit vectors: S_i . S_j, minus the self terms on the diagonal.
void class_cosine_sums(const Matrix& embeddings, std::span<const std::size_t> labels, std::size_t classes,
                       Matrix& sums, Matrix& counts) {
    const Matrix unit = unit_rows(embeddings);
    const std::size_t d = unit.cols();
    Matrix class_sum(classes, d);
    std::vector<double> self(classes, 0.0);
    std::vector<double> n(classes, 0.0);
    for (std::size_t r = 0; r < unit.rows(); ++r) {
        const std::size_t c = labels[r];
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) {
            class_sum(c, k) += unit(r, k);
            sq += unit(r, k) * unit(r, k);
        }
        self[c] += sq;
        n[c] += 1.0;
    }
    sums = Matrix(classes, classes);
    counts = Matrix(classes, classes);
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < d; ++k) dot += class_sum(i, k) * class_sum(j, k);
            sums(i, j) = i == j ? dot - self[i] : dot;
            counts(i, j) = i == j ? n[i] * (n[i] - 1.0) : n[i] * n[j];
        }
}

}  // namespace

ClassSimilarity class_similarity(const Matrix& embeddings, std::span<const std::size_t> labels,
                                 std::size_t classes) {
    check_labels(labels, embeddings.rows(), classes, "class_similarity");
    Matrix sums;
    Matrix counts;
    class_cosine_sums(embeddings, labels, classes, sums, counts);
    ClassSimilarity out{Matrix(classes, classes), {}};
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            if (counts(i, j) == 0.0) {
                out.mean(i, j) = kNaN;
                out.missing.emplace_back(i, j);
            } else {
                out.mean(i, j) = std::clamp(sums(i, j) / counts(i, j), -1.0, 1.0);
            }
        }
    return out;
}

SimilaritySummary similarity_summary(const Matrix& embeddings, std::span<const std::size_t> labels,
                                     std::size_t classes) {
    check_labels(labels, embeddings.rows(), classes, "similarity_summary");
    Matrix sums;
    Matrix counts;
    class_cosine_sums(embeddings, labels, classes, sums, counts);
    double intra = 0.0, intra_n = 0.0, inter = 0.0, inter_n = 0.0;
    for (std::size_t i = 0; i < classes; ++i)
        for (std::size_t j = 0; j < classes; ++j) {
            if (i == j) {
                intra += sums(i, j);
                intra_n += counts(i, j);
            } else {
                inter += sums(i, j);
                inter_n += counts(i, j);
            }
        }
    SimilaritySummary s;
    s.mean = (intra_n + inter_n) > 0.0 ? (intra + inter) / (intra_n + inter_n) : kNaN;
    s.intra = intra_n > 0.0 ? intra / intra_n : kNaN;
    s.inter = inter_n > 0.0 ? inter / inter_n : kNaN;
    return s;
}

double mae(const Matrix& measured, const Matrix& predicted) {
    if (!measured.same_shape(predicted)) {
        throw std::invalid_argument(fmt::format("mae: shape {}x{} vs {}x{}", measured.rows(), measured.cols(),
                                                predicted.rows(), predicted.cols()));
    }
    const Matrix a = symmetrized(measured);
    const Matrix b = symmetrized(predicted);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a.data()[i] - b.data()[i]);
    return acc / static_cast<double>(a.size());
}

std::vector<double> row_mae(const Matrix& measured, const Matrix& predicted) {
    if (!measured.same_shape(predicted)) throw std::invalid_argument("row_mae: shape mismatch");
    const Matrix a = symmetrized(measured);
    const Matrix b = symmetrized(predicted);
    std::vector<double> out(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) out[i] += std::abs(a(i, j) - b(i, j));
        out[i] /= static_cast<double>(a.cols());
    }
    return out;
}

namespace {

/// 1-based ranks, ties averaged.
std::vector<double> average_ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> ranks(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<std::pair<std::size_t, std::size_t>> descending_pairs(
    const std::vector<std::pair<std::size_t, std::size_t>>& pairs, const std::vector<double>& values) {
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t k : idx) out.push_back(pairs[k]);
    return out;
}

}  // namespace

OrderingReport ordering_check(const Matrix& measured, const Matrix& predicted) {
    if (!measured.same_shape(predicted) || measured.rows() != measured.cols()) {
        throw std::invalid_argument("ordering_check: matrices must be square and of equal shape");
    }
    const Matrix ms = symmetrized(measured);
    const Matrix ps = symmetrized(predicted);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<double> mv, pv;
    for (std::size_t i = 0; i < ms.rows(); ++i)
        for (std::size_t j = i; j < ms.cols(); ++j) {
            pairs.emplace_back(i, j);
            mv.push_back(ms(i, j));
            pv.push_back(ps(i, j));
        }

    OrderingReport r;
    std::size_t ties = 0;
    for (std::size_t a = 0; a < pairs.size(); ++a)
        for (std::size_t b = a + 1; b < pairs.size(); ++b) {
            if (pv[a] == pv[b]) {
                ++ties;
                continue;
            }
            ++r.strict_pairs;
            const bool pred_a_higher = pv[a] > pv[b];
            const bool meas_a_higher = mv[a] > mv[b];
            if (pred_a_higher != meas_a_higher || mv[a] == mv[b]) ++r.violations;
        }
    r.matches = r.violations == 0;
    r.rank_correlation = pearson(average_ranks(mv), average_ranks(pv));
    r.predicted_order = descending_pairs(pairs, pv);
    r.measured_order = descending_pairs(pairs, mv);
    if (ties > 0) r.note = fmt::format("{} tied predicted pair comparisons skipped", ties);
    return r;
}

Spectrum covariance_spectrum(const Matrix& embeddings) {
    const std::size_t n = embeddings.rows();
    const std::size_t d = embeddings.cols();
    if (n < d + 1) {
        throw std::invalid_argument(fmt::format("covariance_spectrum: needs at least {} rows, got {}", d + 1, n));
    }
    const Matrix unit = unit_rows(embeddings);
    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t k = 0; k < d; ++k) mean[k] += unit(r, k);
    for (double& m : mean) m /= static_cast<double>(n);

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t a = 0; a < d; ++a) {
            const double da = unit(r, a) - mean[a];
            for (std::size_t b = a; b < d; ++b) cov(a, b) += da * (unit(r, b) - mean[b]);
        }
    const double scale = 1.0 / static_cast<double>(n - 1);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b) {
            cov(a, b) *= scale;
            cov(b, a) = cov(a, b);
        }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("covariance_spectrum: eigensolver failed");
    Spectrum s;
    s.trace = cov.trace();
    const auto& ev = solver.eigenvalues();
    s.eigenvalues.assign(ev.data(), ev.data() + ev.size());
    std::sort(s.eigenvalues.begin(), s.eigenvalues.end(), std::greater<>());
    return s;
}

}  // namespace ccl::metrics
