#ifndef ONEA_MATRIX_HPP
#define ONEA_MATRIX_HPP

//
// Dense row-major matrix of doubles and the handful of kernels the merge
// and training code needs. Sizes here are adapter-scale (tens to hundreds
// of rows), so the kernels are plain loops.
//

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "onea/errors.hpp"

namespace onea {

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        if (data_.size() != checked_size(rows, cols))
            throw dimension_error("matrix data length " + std::to_string(data_.size()) +
                                  " does not match " + shape_string(rows, cols));
    }

    /// Row-wise literal, e.g. `Matrix{{1, 2}, {3, 4}}`.
    Matrix(std::initializer_list<std::initializer_list<double>> rows)
    {
        rows_ = rows.size();
        cols_ = rows_ ? rows.begin()->size() : 0;
        checked_size(rows_, cols_);
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            if (r.size() != cols_)
                throw dimension_error("ragged matrix literal");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n)
    {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i)
            m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(std::span<const double> d)
    {
        Matrix m(d.size(), d.size());
        for (std::size_t i = 0; i < d.size(); ++i)
            m(i, i) = d[i];
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::vector<double> column(std::size_t j) const
    {
        std::vector<double> c(rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            c[i] = (*this)(i, j);
        return c;
    }

    bool same_shape(const Matrix& o) const noexcept { return rows_ == o.rows_ && cols_ == o.cols_; }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    std::string shape() const { return shape_string(rows_, cols_); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

    Matrix& operator+=(const Matrix& o)
    {
        require_same_shape(*this, o, "+=");
        for (std::size_t k = 0; k < data_.size(); ++k)
            data_[k] += o.data_[k];
        return *this;
    }

    Matrix& operator-=(const Matrix& o)
    {
        require_same_shape(*this, o, "-=");
        for (std::size_t k = 0; k < data_.size(); ++k)
            data_[k] -= o.data_[k];
        return *this;
    }

    Matrix& operator*=(double s) noexcept
    {
        for (auto& v : data_)
            v *= s;
        return *this;
    }

    static void require_same_shape(const Matrix& a, const Matrix& b, const char* op)
    {
        if (!a.same_shape(b))
            throw dimension_error(std::string(op) + ": shape mismatch " + a.shape() + " vs " + b.shape());
    }

private:
    static std::string shape_string(std::size_t r, std::size_t c)
    {
        return std::to_string(r) + "x" + std::to_string(c);
    }

    static std::size_t checked_size(std::size_t r, std::size_t c)
    {
        if ((r == 0) != (c == 0))
            throw dimension_error("matrix with zero extent in only one dimension: " + shape_string(r, c));
        return r * c;
    }

    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
inline Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
inline Matrix operator*(Matrix a, double s) { return a *= s; }
inline Matrix operator*(double s, Matrix a) { return a *= s; }

inline Matrix transpose(const Matrix& a)
{
    Matrix t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            t(j, i) = a(i, j);
    return t;
}

/// a·b
inline Matrix matmul(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows())
        throw dimension_error("matmul: " + a.shape() + " times " + b.shape());
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik == 0.0)
                continue;
            auto bk = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j)
                ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// aᵀ·b without materialising the transpose.
inline Matrix matmul_tn(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw dimension_error("matmul_tn: " + a.shape() + "^T times " + b.shape());
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        auto ak = a.row(k);
        auto bk = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = ak[i];
            if (aki == 0.0)
                continue;
            auto ci = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j)
                ci[j] += aki * bk[j];
        }
    }
    return c;
}

/// a·bᵀ
inline Matrix matmul_nt(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.cols())
        throw dimension_error("matmul_nt: " + a.shape() + " times " + b.shape() + "^T");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k)
                s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    return c;
}

inline double dot(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size())
        throw dimension_error("dot: length mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double squared_frobenius_norm(const Matrix& a)
{
    double s = 0.0;
    for (double v : a.data())
        s += v * v;
    return s;
}

inline double frobenius_norm(const Matrix& a) { return std::sqrt(squared_frobenius_norm(a)); }

inline double frobenius_distance(const Matrix& a, const Matrix& b) { return frobenius_norm(a - b); }

inline Matrix relu(Matrix a)
{
    for (auto& v : a.data())
        v = std::max(v, 0.0);
    return a;
}

/// Scales column j of `a` by s[j].
inline Matrix scale_columns(Matrix a, std::span<const double> s)
{
    if (s.size() != a.cols())
        throw dimension_error("scale_columns: " + std::to_string(s.size()) + " factors for " + a.shape());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j)
            a(i, j) *= s[j];
    return a;
}

/// Rows [first, first+count) as a new matrix.
inline Matrix row_block(const Matrix& a, std::size_t first, std::size_t count)
{
    if (first + count > a.rows())
        throw dimension_error("row_block out of range for " + a.shape());
    Matrix b(count, a.cols());
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(first * a.cols()), count * a.cols(),
                b.data().begin());
    return b;
}

/// Gathers the listed rows.
inline Matrix select_rows(const Matrix& a, std::span<const std::size_t> rows)
{
    Matrix b(rows.size(), a.cols());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        auto src = a.row(rows[k]);
        std::copy(src.begin(), src.end(), b.row(k).begin());
    }
    return b;
}

/// [a | b], side by side.
inline Matrix hconcat(const Matrix& a, const Matrix& b)
{
    if (a.rows() != b.rows())
        throw dimension_error("hconcat: " + a.shape() + " and " + b.shape());
    Matrix c(a.rows(), a.cols() + b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto ci = c.row(i);
        std::copy(a.row(i).begin(), a.row(i).end(), ci.begin());
        std::copy(b.row(i).begin(), b.row(i).end(), ci.begin() + static_cast<std::ptrdiff_t>(a.cols()));
    }
    return c;
}

} // namespace onea

#endif // ONEA_MATRIX_HPP
