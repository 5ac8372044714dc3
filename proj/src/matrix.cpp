#include "pgat/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pgat {

std::size_t Matrix::checked_size(int rows, int cols) {
    if (rows < 0 || cols < 0) {
        throw DimensionError("matrix dimensions must be non-negative, got " +
                             std::to_string(rows) + "x" + std::to_string(cols));
    }
    return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
}

Matrix::Matrix(int rows, int cols, std::initializer_list<double> values) : Matrix(rows, cols) {
    if (values.size() != data_.size()) {
        throw DimensionError("initializer has " + std::to_string(values.size()) +
                             " values for a " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " matrix");
    }
    std::copy(values.begin(), values.end(), data_.begin());
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Matrix::add_scaled(const Matrix& other, double scale) {
    if (other.rows_ != rows_ || other.cols_ != cols_) {
        throw DimensionError("add_scaled: shape mismatch");
    }
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

int mask_count(const Mask& mask) {
    int n = 0;
    for (unsigned char m : mask) n += (m != 0);
    return n;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + std::to_string(a.rows()) + "x" +
                             std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                             std::to_string(b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    const int k = a.cols();
    const int c = b.cols();
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int p = 0; p < k; ++p) {
            const double av = arow[p];
            if (av == 0.0) continue;
            const double* brow = b.row(p);
            for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_tn: inner dimension mismatch");
    Matrix out(a.cols(), b.cols());
    const int c = b.cols();
    for (int p = 0; p < a.rows(); ++p) {
        const double* arow = a.row(p);
        const double* brow = b.row(p);
        for (int i = 0; i < a.cols(); ++i) {
            const double av = arow[i];
            if (av == 0.0) continue;
            double* orow = out.row(i);
            for (int j = 0; j < c; ++j) orow[j] += av * brow[j];
        }
    }
    return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt: inner dimension mismatch");
    Matrix out(a.rows(), b.rows());
    for (int i = 0; i < a.rows(); ++i) {
        const double* arow = a.row(i);
        double* orow = out.row(i);
        for (int j = 0; j < b.rows(); ++j) {
            const double* brow = b.row(j);
            double acc = 0.0;
            for (int p = 0; p < a.cols(); ++p) acc += arow[p] * brow[p];
            orow[j] = acc;
        }
    }
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("operator+: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("operator-: shape mismatch");
    Matrix out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
    return out;
}

void zero_masked_columns(Matrix& m, const Mask& mask) {
    if (static_cast<int>(mask.size()) != m.cols()) {
        throw DimensionError("zero_masked_columns: mask length does not match column count");
    }
    for (int r = 0; r < m.rows(); ++r) {
        double* row = m.row(r);
        for (int c = 0; c < m.cols(); ++c) {
            if (!mask[c]) row[c] = 0.0;
        }
    }
}

Matrix compact_columns(const Matrix& m, const Mask& mask) {
    if (static_cast<int>(mask.size()) != m.cols()) {
        throw DimensionError("compact_columns: mask length does not match column count");
    }
    Matrix out(m.rows(), mask_count(mask));
    for (int r = 0; r < m.rows(); ++r) {
        const double* src = m.row(r);
        double* dst = out.row(r);
        int j = 0;
        for (int c = 0; c < m.cols(); ++c) {
            if (mask[c]) dst[j++] = src[c];
        }
    }
    return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

} // namespace pgat
