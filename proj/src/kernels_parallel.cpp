#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "ccl/kernels.hpp"

namespace ccl::kernels::parallel {

namespace {
using Index = std::ptrdiff_t;  // OpenMP loop variables must be signed
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void normalize_rows(const Matrix& x, Matrix& unit, std::vector<double>& norms) {
    const Index rows = static_cast<Index>(x.rows());
    const std::size_t d = x.cols();
    unit = Matrix(x.rows(), d);
    norms.assign(x.rows(), 0.0);
    const double* src = x.data();
    double* dst = unit.data();
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        const double* xr = src + r * d;
        double sq = 0.0;
        for (std::size_t k = 0; k < d; ++k) sq += xr[k] * xr[k];
        const double norm = std::sqrt(sq);
        norms[r] = norm;
        for (std::size_t k = 0; k < d; ++k) dst[r * d + k] = xr[k] / norm;
    }
}

void gram(const Matrix& a, const Matrix& c, Matrix& out) {
    const Index rows = static_cast<Index>(a.rows());
    const std::size_t cols = c.rows();
    const std::size_t d = a.cols();
    out = Matrix(a.rows(), cols);
    // Column-major copy of c so the inner loop runs over contiguous candidates.
    // Each output still accumulates k = 0..d-1 in order, as in the serial kernel.
    const Matrix ct = c.transposed();
    const double* pa = a.data();
    const double* pc = ct.data();
    double* po = out.data();
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        const double* ai = pa + i * d;
        double* oi = po + i * cols;
        for (std::size_t k = 0; k < d; ++k) {
            const double aik = ai[k];
            const double* ck = pc + k * cols;
            for (std::size_t j = 0; j < cols; ++j) oi[j] += aik * ck[j];
        }
    }
}

void row_softmax(const Matrix& s, double tau, Matrix& p, std::vector<double>* log_norm) {
    const Index rows = static_cast<Index>(s.rows());
    const std::size_t cols = s.cols();
    p = Matrix(s.rows(), cols);
    if (log_norm != nullptr) log_norm->assign(s.rows(), 0.0);
    double* pl = log_norm != nullptr ? log_norm->data() : nullptr;
    const double* ps = s.data();
    double* pp = p.data();
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < rows; ++i) {
        const double* si = ps + i * cols;
        double* pi = pp + i * cols;
        const double mx = *std::max_element(si, si + cols);
        double z = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            pi[j] = std::exp((si[j] - mx) / tau);
            z += pi[j];
        }
        for (std::size_t j = 0; j < cols; ++j) pi[j] /= z;
        if (pl != nullptr) pl[i] = mx / tau + std::log(z);
    }
}

void backprop_gram(const Matrix& g, const Matrix& a_unit, const Matrix& c_unit, Matrix& grad_a,
                   Matrix& grad_c) {
    const std::size_t d = a_unit.cols();
    const std::size_t n_a = g.rows();
    const std::size_t n_c = g.cols();
    grad_a = Matrix(n_a, d);
    grad_c = Matrix(n_c, d);
    const double* pg = g.data();
    const double* pa = a_unit.data();
    const double* pc = c_unit.data();
    double* ga = grad_a.data();
    double* gc = grad_c.data();
    constexpr std::size_t kChunk = 64;
    const Index n_chunks = static_cast<Index>((n_c + kChunk - 1) / kChunk);
    // Loops are ordered for contiguous access; every output sums over j (resp. i)
    // in ascending order, matching the serial kernel.
#pragma omp parallel
    {
#pragma omp for schedule(static) nowait
        for (Index i = 0; i < static_cast<Index>(n_a); ++i) {
            double* gai = ga + i * d;
            for (std::size_t j = 0; j < n_c; ++j) {
                const double gij = pg[i * n_c + j];
                const double* cj = pc + j * d;
                for (std::size_t k = 0; k < d; ++k) gai[k] += gij * cj[k];
            }
        }
#pragma omp for schedule(static)
        for (Index chunk = 0; chunk < n_chunks; ++chunk) {
            const std::size_t lo = static_cast<std::size_t>(chunk) * kChunk;
            const std::size_t hi = std::min(n_c, lo + kChunk);
            for (std::size_t i = 0; i < n_a; ++i) {
                const double* ai = pa + i * d;
                const double* gi = pg + i * n_c;
                for (std::size_t j = lo; j < hi; ++j) {
                    const double gij = gi[j];
                    double* gcj = gc + j * d;
                    for (std::size_t k = 0; k < d; ++k) gcj[k] += gij * ai[k];
                }
            }
        }
    }
}

void backprop_normalize(const Matrix& unit, std::span<const double> norms, const Matrix& grad_unit,
                        Matrix& grad_raw) {
    const Index rows = static_cast<Index>(unit.rows());
    const std::size_t d = unit.cols();
    grad_raw = Matrix(unit.rows(), d);
    const double* pu = unit.data();
    const double* pg = grad_unit.data();
    double* out = grad_raw.data();
#pragma omp parallel for schedule(static)
    for (Index r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t k = 0; k < d; ++k) dot += pu[r * d + k] * pg[r * d + k];
        for (std::size_t k = 0; k < d; ++k)
            out[r * d + k] = (pg[r * d + k] - pu[r * d + k] * dot) / norms[r];
    }
}

void class_pair_sums(const Matrix& values, std::span<const std::size_t> row_labels,
                     std::span<const std::size_t> col_labels, std::size_t classes,
                     bool skip_diagonal, Matrix& sums, Matrix& counts) {
    const std::size_t rows = values.rows();
    const std::size_t cols = values.cols();
    // Per-row partials, reduced serially in row order afterwards.
    Matrix row_sums(rows, classes);
    Matrix row_counts(rows, classes);
#pragma omp parallel for schedule(static)
    for (Index a = 0; a < static_cast<Index>(rows); ++a) {
        auto rs = row_sums.row(static_cast<std::size_t>(a));
        auto rc = row_counts.row(static_cast<std::size_t>(a));
        for (std::size_t b = 0; b < cols; ++b) {
            if (skip_diagonal && static_cast<std::size_t>(a) == b) continue;
            rs[col_labels[b]] += values(static_cast<std::size_t>(a), b);
            rc[col_labels[b]] += 1.0;
        }
    }
    sums = Matrix(classes, classes);
    counts = Matrix(classes, classes);
    for (std::size_t a = 0; a < rows; ++a)
        for (std::size_t j = 0; j < classes; ++j) {
            sums(row_labels[a], j) += row_sums(a, j);
            counts(row_labels[a], j) += row_counts(a, j);
        }
}

}  // namespace ccl::kernels::parallel
