#include <algorithm>
#include <cmath>

#include "ccl/kernels.hpp"

namespace ccl::kernels {

std::size_t first_degenerate_row(const Matrix& x) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double sq = 0.0;
        for (double v : x.row(r)) sq += v * v;
        if (!(std::sqrt(sq) >= kMinRowNorm)) return r;
    }
    return x.rows();
}

namespace serial {

void normalize_rows(const Matrix& x, Matrix& unit, std::vector<double>& norms) {
    unit = Matrix(x.rows(), x.cols());
    norms.assign(x.rows(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double sq = 0.0;
        for (std::size_t k = 0; k < x.cols(); ++k) sq += x(r, k) * x(r, k);
        norms[r] = std::sqrt(sq);
        for (std::size_t k = 0; k < x.cols(); ++k) unit(r, k) = x(r, k) / norms[r];
    }
}

void gram(const Matrix& a, const Matrix& c, Matrix& out) {
    out = Matrix(a.rows(), c.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < c.rows(); ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * c(j, k);
            out(i, j) = acc;
        }
}

void row_softmax(const Matrix& s, double tau, Matrix& p, std::vector<double>* log_norm) {
    p = Matrix(s.rows(), s.cols());
    if (log_norm != nullptr) log_norm->assign(s.rows(), 0.0);
    for (std::size_t i = 0; i < s.rows(); ++i) {
        double mx = s(i, 0);
        for (std::size_t j = 1; j < s.cols(); ++j) mx = std::max(mx, s(i, j));
        double z = 0.0;
        for (std::size_t j = 0; j < s.cols(); ++j) {
            p(i, j) = std::exp((s(i, j) - mx) / tau);
            z += p(i, j);
        }
        for (std::size_t j = 0; j < s.cols(); ++j) p(i, j) /= z;
        if (log_norm != nullptr) (*log_norm)[i] = mx / tau + std::log(z);
    }
}

void backprop_gram(const Matrix& g, const Matrix& a_unit, const Matrix& c_unit, Matrix& grad_a,
                   Matrix& grad_c) {
    const std::size_t d = a_unit.cols();
    grad_a = Matrix(a_unit.rows(), d);
    grad_c = Matrix(c_unit.rows(), d);
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t k = 0; k < d; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < g.cols(); ++j) acc += g(i, j) * c_unit(j, k);
            grad_a(i, k) = acc;
        }
    for (std::size_t j = 0; j < g.cols(); ++j)
        for (std::size_t k = 0; k < d; ++k) {
            double acc = 0.0;
            for (std::size_t i = 0; i < g.rows(); ++i) acc += g(i, j) * a_unit(i, k);
            grad_c(j, k) = acc;
        }
}

void backprop_normalize(const Matrix& unit, std::span<const double> norms, const Matrix& grad_unit,
                        Matrix& grad_raw) {
    grad_raw = Matrix(unit.rows(), unit.cols());
    for (std::size_t r = 0; r < unit.rows(); ++r) {
        double dot = 0.0;
        for (std::size_t k = 0; k < unit.cols(); ++k) dot += unit(r, k) * grad_unit(r, k);
        for (std::size_t k = 0; k < unit.cols(); ++k)
            grad_raw(r, k) = (grad_unit(r, k) - unit(r, k) * dot) / norms[r];
    }
}

void class_pair_sums(const Matrix& values, std::span<const std::size_t> row_labels,
                     std::span<const std::size_t> col_labels, std::size_t classes,
                     bool skip_diagonal, Matrix& sums, Matrix& counts) {
    sums = Matrix(classes, classes);
    counts = Matrix(classes, classes);
    std::vector<double> row_sum(classes);
    std::vector<double> row_count(classes);
    for (std::size_t a = 0; a < values.rows(); ++a) {
        std::fill(row_sum.begin(), row_sum.end(), 0.0);
        std::fill(row_count.begin(), row_count.end(), 0.0);
        for (std::size_t b = 0; b < values.cols(); ++b) {
            if (skip_diagonal && a == b) continue;
            row_sum[col_labels[b]] += values(a, b);
            row_count[col_labels[b]] += 1.0;
        }
        for (std::size_t j = 0; j < classes; ++j) {
            sums(row_labels[a], j) += row_sum[j];
            counts(row_labels[a], j) += row_count[j];
        }
    }
}

}  // namespace serial
}  // namespace ccl::kernels
