#include "ccl/tpm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace ccl {

TransitionMatrix::TransitionMatrix(Matrix entries, std::vector<std::string> labels)
    : entries_(std::move(entries)), labels_(std::move(labels)) {
    if (entries_.rows() != entries_.cols()) {
        throw std::invalid_argument(fmt::format("TransitionMatrix must be square, got {}x{}",
                                                entries_.rows(), entries_.cols()));
    }
    if (labels_.empty()) {
        for (std::size_t i = 0; i < entries_.rows(); ++i) labels_.push_back(std::to_string(i));
    }
    if (labels_.size() != entries_.rows()) {
        throw std::invalid_argument(fmt::format("TransitionMatrix has {} labels for {} rows",
                                                labels_.size(), entries_.rows()));
    }
}

std::uint64_t TransitionMatrix::hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 0x100000001b3ULL;
    };
    for (const auto& label : labels_) {
        for (char c : label) feed(static_cast<std::uint8_t>(c));
        feed(0);
    }
    for (double v : entries_.values()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) feed(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
    return h;
}

void TransitionMatrix::write_csv(std::ostream& out) const {
    out << "row_label,col_label,prob\n";
    for (std::size_t i = 0; i < size(); ++i)
        for (std::size_t j = 0; j < size(); ++j)
            out << labels_[i] << ',' << labels_[j] << ',' << fmt::format("{:.17g}", entries_(i, j))
                << '\n';
}

ValidationReport validate(const TransitionMatrix& tpm) {
    ValidationReport report;
    const std::size_t m = tpm.size();
    for (std::size_t i = 0; i < m; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            const double v = tpm(i, j);
            if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
                report.push_back({"entry-range", i,
                                  fmt::format("entry ({}, {}) = {} is outside [0, 1]", i, j, v)});
            }
            sum += v;
        }
        if (!(std::abs(sum - 1.0) <= kConstructionTolerance)) {
            report.push_back({"row-sum", i, fmt::format("row {} sums to {:.12g}", i, sum)});
        }
    }
    std::set<std::string> seen;
    for (std::size_t i = 0; i < tpm.labels().size(); ++i) {
        if (!seen.insert(tpm.labels()[i]).second) {
            report.push_back({"unique-labels", i,
                              fmt::format("label '{}' at index {} is duplicated", tpm.labels()[i], i)});
        }
    }
    return report;
}

ValidationReport validate(const Prior& prior) {
    ValidationReport report;
    double sum = 0.0;
    for (std::size_t i = 0; i < prior.size(); ++i) {
        if (!std::isfinite(prior[i]) || prior[i] < 0.0) {
            report.push_back({"nonnegative", i, fmt::format("prior weight {} = {} is negative", i, prior[i])});
        }
        sum += prior[i];
    }
    if (!(std::abs(sum - 1.0) <= kConstructionTolerance)) {
        report.push_back({"prior-sum", 0, fmt::format("prior sums to {:.12g}", sum)});
    }
    return report;
}

std::string to_string(const ValidationReport& report) {
    std::ostringstream os;
    for (const auto& v : report) os << v.message << '\n';
    return os.str();
}

namespace {

std::vector<double> cumulative(std::span<const double> weights) {
    std::vector<double> cdf(weights.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        cdf[i] = acc;
    }
    return cdf;
}

}  // namespace

std::size_t sample_from_cdf(std::span<const double> cdf, Rng& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = unif(rng) * cdf.back();
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    // u == cdf.back() can only happen through rounding; clamp to the last index
    // with positive mass.
    if (it == cdf.end()) {
        std::size_t k = cdf.size() - 1;
        while (k > 0 && cdf[k] == cdf[k - 1]) --k;
        return k;
    }
    return static_cast<std::size_t>(it - cdf.begin());
}

FeatureSpace::FeatureSpace(TransitionMatrix tpm, Prior prior)
    : tpm_(std::move(tpm)), prior_(std::move(prior)) {
    if (auto r = validate(tpm_); !r.empty()) {
        throw std::invalid_argument("invalid transition matrix: " + r.front().message);
    }
    if (auto r = validate(prior_); !r.empty()) {
        throw std::invalid_argument("invalid prior: " + r.front().message);
    }
    if (prior_.size() != tpm_.size()) {
        throw std::invalid_argument(fmt::format("prior has {} entries but the TPM has {} features",
                                                prior_.size(), tpm_.size()));
    }
    base_mask_.resize(size());
    for (std::size_t i = 0; i < size(); ++i) base_mask_[i] = prior_[i] > 0.0;
    prior_cdf_ = cumulative(prior_.weights());
    row_cdf_ = Matrix(size(), size());
    for (std::size_t i = 0; i < size(); ++i) {
        const auto cdf = cumulative(tpm_.row(i));
        std::copy(cdf.begin(), cdf.end(), row_cdf_.row(i).begin());
    }
}

std::size_t FeatureSpace::sample_source(Rng& rng) const { return sample_from_cdf(prior_cdf_, rng); }

std::size_t FeatureSpace::sample_target(std::size_t source, Rng& rng) const {
    return sample_from_cdf(row_cdf_.row(source), rng);
}

std::vector<double> marginal(const TransitionMatrix& tpm, const Prior& prior) {
    if (tpm.size() != prior.size()) {
        throw std::invalid_argument(
            fmt::format("marginal: prior length {} != TPM size {}", prior.size(), tpm.size()));
    }
    const std::size_t m = tpm.size();
    std::vector<double> s(m, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < m; ++k) s[k] += prior[i] * tpm(i, k);
    return s;
}

TransitionSample sample_transition(const FeatureSpace& space, Rng& rng) {
    const std::size_t source = space.sample_source(rng);
    return {source, space.sample_target(source, rng)};
}

TransitionMatrix estimate_tpm(std::span<const TransitionSample> samples, std::size_t m,
                              double smoothing) {
    if (m == 0) throw std::invalid_argument("estimate_tpm: m must be positive");
    if (!(smoothing >= 0.0) || !std::isfinite(smoothing)) {
        throw std::invalid_argument("estimate_tpm: smoothing must be a finite nonnegative number");
    }
    if (samples.empty() && smoothing == 0.0) throw std::invalid_argument("estimate_tpm: no data");

    Matrix counts(m, m);
    for (const auto& s : samples) {
        if (s.source >= m || s.target >= m) {
            throw std::invalid_argument(fmt::format("estimate_tpm: sample ({} -> {}) out of range for m = {}",
                                                    s.source, s.target, m));
        }
        counts(s.source, s.target) += 1.0;
    }
    Matrix est(m, m);
    const double uniform = 1.0 / static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < m; ++j) total += counts(i, j);
        const double denom = total + static_cast<double>(m) * smoothing;
        for (std::size_t j = 0; j < m; ++j)
            est(i, j) = denom > 0.0 ? (counts(i, j) + smoothing) / denom : uniform;
    }
    return TransitionMatrix(std::move(est));
}

Prior estimate_prior(std::span<const TransitionSample> samples, std::size_t m) {
    if (samples.empty()) throw std::invalid_argument("estimate_prior: no data");
    std::vector<double> w(m, 0.0);
    for (const auto& s : samples) {
        if (s.source >= m) throw std::invalid_argument("estimate_prior: source index out of range");
        w[s.source] += 1.0;
    }
    for (double& x : w) x /= static_cast<double>(samples.size());
    return Prior(std::move(w));
}

}  // namespace ccl
