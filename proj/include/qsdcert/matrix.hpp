#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace qsdcert {

using Vector = std::vector<double>;

/// Dense row-major matrix.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(const std::vector<std::vector<double>>& rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transpose() const;

    bool operator==(const Matrix&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// How a data-parallel kernel is executed. Both paths accumulate every output
/// entry in the same order in extended precision, so results are bit-identical
/// whatever the thread count.
enum class Execution { Serial, Parallel };

Matrix multiply(const Matrix& a, const Matrix& b, Execution exec = Execution::Parallel);

/// Row vector times matrix: (v A)[j] = sum_i v[i] A(i, j).
Vector left_multiply(std::span<const double> v, const Matrix& a,
                     Execution exec = Execution::Parallel);

/// Matrix times column vector: (A v)[i] = sum_j A(i, j) v[j].
Vector right_multiply(const Matrix& a, std::span<const double> v,
                      Execution exec = Execution::Parallel);

/// A^t by repeated squaring; t = 0 gives the identity.
Matrix power(const Matrix& a, std::uint64_t t, Execution exec = Execution::Parallel);

Vector row_sums(const Matrix& a);
Vector column_sums(const Matrix& a);

double sum(std::span<const double> v);
double dot(std::span<const double> a, std::span<const double> b);
double l1_distance(std::span<const double> a, std::span<const double> b);
double sup_distance(std::span<const double> a, std::span<const double> b);

/// 64-bit FNV-1a over the dimensions and raw IEEE bytes of the entries.
std::uint64_t content_hash(const Matrix& a);
std::uint64_t content_hash(std::span<const double> v);

}  // namespace qsdcert
