#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace noiseproto {

using Vec = std::vector<double>;

// Dense float64 matrix, column-major. Column-major is load-bearing: the
// on-disk feature container stores the payload in this exact order.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    static Matrix identity(std::size_t n);
    static Matrix filled(std::size_t rows, std::size_t cols, double value);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[j * rows_ + i]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[j * rows_ + i]; }

    double* col(std::size_t j) { return data_.data() + j * rows_; }
    const double* col(std::size_t j) const { return data_.data() + j * rows_; }
    std::span<const double> col_span(std::size_t j) const { return {col(j), rows_}; }
    std::span<double> col_span(std::size_t j) { return {col(j), rows_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool all_finite() const;
    // Throws numeric_error naming `context` if any entry is NaN/Inf.
    void require_finite(const std::string& context) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

// Each column divided by max(||col||, eps); zero columns stay zero.
Matrix l2_normalize_columns(const Matrix& m, double eps = 1e-12);

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// y += a * x
void axpy(double a, std::span<const double> x, std::span<double> y);

}  // namespace noiseproto
