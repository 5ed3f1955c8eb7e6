#include "ccombat/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "ccombat/error.hpp"

namespace ccombat {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    std::size_t n = rows.size();
    std::size_t m = n == 0 ? 0 : rows.begin()->size();
    Matrix out(n, m);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m) throw DimensionError("ragged initializer for Matrix");
        std::copy(row.begin(), row.end(), out.row(r).begin());
        ++r;
    }
    return out;
}

Matrix Matrix::from_data(std::size_t rows, std::size_t cols, std::vector<double> data) {
    if (data.size() != rows * cols) throw DimensionError("Matrix data size does not match shape");
    Matrix out;
    out.rows_ = rows;
    out.cols_ = cols;
    out.data_ = std::move(data);
    return out;
}

Vector Matrix::col(std::size_t c) const {
    Vector out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

Matrix Matrix::select_rows(std::span<const std::size_t> rows) const {
    Matrix out(rows.size(), cols_);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto src = row(rows[i]);
        std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
}

Matrix Matrix::transpose() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out(c, r) = (*this)(r, c);
    return out;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("max_abs_diff: size mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError("max_abs_diff: shape mismatch");
    return max_abs_diff(a.data(), b.data());
}

}  // namespace ccombat
