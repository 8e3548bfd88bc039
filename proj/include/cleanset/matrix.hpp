#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cleanset {

// Dense row-major matrix of doubles.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    void fill(double v) { data.assign(data.size(), v); }
    bool all_finite() const;
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);

// Normalizes v to unit Euclidean norm. Throws DegenerateDataError on
// zero-norm input.
std::vector<double> l2_normalize(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);

// Numerically stable softmax (max-shifted), in place on one row.
void softmax_row_inplace(std::span<double> logits);
std::vector<double> softmax_row(std::span<const double> logits);

}  // namespace cleanset
