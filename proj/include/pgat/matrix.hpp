#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "pgat/error.hpp"

namespace pgat {

// Dense row-major matrix of doubles. All model tensors, activations and
// gradients live in this type; columns usually index nodes, rows features.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols) : rows_(rows), cols_(cols), data_(checked_size(rows, cols), 0.0) {}
    Matrix(int rows, int cols, std::initializer_list<double> values);

    static Matrix identity(int n);

    int rows() const noexcept { return rows_; }
    int cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const {
        return data_[static_cast<std::size_t>(r) * cols_ + c];
    }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }
    double* row(int r) noexcept { return data_.data() + static_cast<std::size_t>(r) * cols_; }
    const double* row(int r) const noexcept {
        return data_.data() + static_cast<std::size_t>(r) * cols_;
    }

    void fill(double v);
    void add_scaled(const Matrix& other, double scale); // *this += scale * other

    bool all_finite() const noexcept;

private:
    static std::size_t checked_size(int rows, int cols);

    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

using Vector = std::vector<double>;
using Mask = std::vector<unsigned char>; // boolean per column, 1 = real node, 0 = padding

int mask_count(const Mask& mask);

Matrix matmul(const Matrix& a, const Matrix& b);    // a(r x k) * b(k x c)
Matrix matmul_tn(const Matrix& a, const Matrix& b); // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b); // a * b^T

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

// Zeroes every column whose mask entry is false.
void zero_masked_columns(Matrix& m, const Mask& mask);

// Copies the mask-true columns of `m` into a (rows x mask_count) matrix.
Matrix compact_columns(const Matrix& m, const Mask& mask);

double max_abs_diff(const Matrix& a, const Matrix& b);

} // namespace pgat
