#include "noiseproto/matrix.hpp"

#include <cmath>

#include "noiseproto/error.hpp"

namespace noiseproto {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::filled(std::size_t rows, std::size_t cols, double value) {
    Matrix m(rows, cols);
    for (double& x : m.data_) x = value;
    return m;
}

bool Matrix::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

void Matrix::require_finite(const std::string& context) const {
    for (std::size_t j = 0; j < cols_; ++j) {
        for (std::size_t i = 0; i < rows_; ++i) {
            if (!std::isfinite((*this)(i, j))) {
                throw numeric_error(context + ": non-finite entry at (" + std::to_string(i) +
                                    ", " + std::to_string(j) + ")");
            }
        }
    }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw shape_error("matmul: inner dimensions disagree (" + std::to_string(a.rows()) +
                          "x" + std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                          "x" + std::to_string(b.cols()) + ")");
    }
    Matrix c(a.rows(), b.cols());
    // Accumulate column by column; the k-loop order is fixed so results do
    // not depend on any threading of the caller.
    for (std::size_t j = 0; j < b.cols(); ++j) {
        double* cj = c.col(j);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double bkj = b(k, j);
            if (bkj == 0.0) continue;
            const double* ak = a.col(k);
            for (std::size_t i = 0; i < a.rows(); ++i) cj[i] += bkj * ak[i];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t j = 0; j < m.cols(); ++j) {
        for (std::size_t i = 0; i < m.rows(); ++i) t(j, i) = m(i, j);
    }
    return t;
}

Matrix l2_normalize_columns(const Matrix& m, double eps) {
    Matrix out = m;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const double n = l2_norm(m.col_span(j));
        const double inv = 1.0 / std::max(n, eps);
        double* cj = out.col(j);
        for (std::size_t i = 0; i < m.rows(); ++i) cj[i] *= inv;
    }
    return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw shape_error("dot: length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

double l2_norm(std::span<const double> v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    if (x.size() != y.size()) throw shape_error("axpy: length mismatch");
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

}  // namespace noiseproto
