#include "qsdcert/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

constexpr std::size_t kColumnBlock = 64;

void multiply_row(const Matrix& a, const Matrix& b, std::size_t i, std::vector<long double>& acc,
                  Matrix& out) {
    std::fill(acc.begin(), acc.end(), 0.0L);
    const std::size_t m = b.cols();
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const long double aik = a(i, k);
        if (aik == 0.0L) continue;
        const auto brow = b.row(k);
        for (std::size_t j = 0; j < m; ++j) acc[j] += aik * brow[j];
    }
    auto orow = out.row(i);
    for (std::size_t j = 0; j < m; ++j) orow[j] = static_cast<double>(acc[j]);
}

void left_multiply_block(std::span<const double> v, const Matrix& a, std::size_t block,
                         Vector& out) {
    const std::size_t j0 = block * kColumnBlock;
    const std::size_t j1 = std::min(a.cols(), j0 + kColumnBlock);
    long double acc[kColumnBlock] = {};
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const long double vi = v[i];
        if (vi == 0.0L) continue;
        const auto arow = a.row(i);
        for (std::size_t j = j0; j < j1; ++j) acc[j - j0] += vi * arow[j];
    }
    for (std::size_t j = j0; j < j1; ++j) out[j] = static_cast<double>(acc[j - j0]);
}

double row_dot(const Matrix& a, std::size_t i, std::span<const double> v) {
    long double acc = 0.0L;
    const auto arow = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) acc += static_cast<long double>(arow[j]) * v[j];
    return static_cast<double>(acc);
}

template <typename Bytes>
void fnv_mix(std::uint64_t& h, const Bytes* p, std::size_t len) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
}

}  // namespace

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.front().size();
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
        if (rows[i].size() != c)
            throw Error(ErrorCode::DimensionMismatch, "ragged row " + std::to_string(i), {i});
        std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
    }
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix multiply(const Matrix& a, const Matrix& b, Execution exec) {
    if (a.cols() != b.rows())
        throw Error(ErrorCode::DimensionMismatch, "multiply: inner dimensions differ");
    Matrix out(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
    if (exec == Execution::Serial) {
        std::vector<long double> acc(b.cols());
        for (std::ptrdiff_t i = 0; i < rows; ++i) multiply_row(a, b, i, acc, out);
        return out;
    }
#pragma omp parallel
    {
        std::vector<long double> acc(b.cols());
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < rows; ++i) multiply_row(a, b, i, acc, out);
    }
    return out;
}

Vector left_multiply(std::span<const double> v, const Matrix& a, Execution exec) {
    if (v.size() != a.rows())
        throw Error(ErrorCode::DimensionMismatch, "left_multiply: vector length differs");
    Vector out(a.cols(), 0.0);
    const auto blocks = static_cast<std::ptrdiff_t>((a.cols() + kColumnBlock - 1) / kColumnBlock);
    if (exec == Execution::Serial) {
        for (std::ptrdiff_t b = 0; b < blocks; ++b) left_multiply_block(v, a, b, out);
        return out;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t b = 0; b < blocks; ++b) left_multiply_block(v, a, b, out);
    return out;
}

Vector right_multiply(const Matrix& a, std::span<const double> v, Execution exec) {
    if (v.size() != a.cols())
        throw Error(ErrorCode::DimensionMismatch, "right_multiply: vector length differs");
    Vector out(a.rows(), 0.0);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
    if (exec == Execution::Serial) {
        for (std::ptrdiff_t i = 0; i < rows; ++i) out[i] = row_dot(a, i, v);
        return out;
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) out[i] = row_dot(a, i, v);
    return out;
}

Matrix power(const Matrix& a, std::uint64_t t, Execution exec) {
    if (!a.square()) throw Error(ErrorCode::NotSquare, "power of non-square matrix");
    Matrix result = Matrix::identity(a.rows());
    Matrix base = a;
    bool first = true;
    while (t > 0) {
        if (t & 1U) {
            result = first ? base : multiply(result, base, exec);
            first = false;
        }
        t >>= 1U;
        if (t > 0) base = multiply(base, base, exec);
    }
    return result;
}

Vector row_sums(const Matrix& a) {
    Vector s(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) s[i] = sum(a.row(i));
    return s;
}

Vector column_sums(const Matrix& a) {
    std::vector<long double> acc(a.cols(), 0.0L);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto r = a.row(i);
        for (std::size_t j = 0; j < a.cols(); ++j) acc[j] += r[j];
    }
    return Vector(acc.begin(), acc.end());
}

double sum(std::span<const double> v) {
    long double acc = 0.0L;
    for (double x : v) acc += x;
    return static_cast<double>(acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "dot: lengths differ");
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
    return static_cast<double>(acc);
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "l1: lengths differ");
    long double acc = 0.0L;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::fabs(static_cast<long double>(a[i]) - b[i]);
    return static_cast<double>(acc);
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error(ErrorCode::DimensionMismatch, "sup: lengths differ");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

std::uint64_t content_hash(const Matrix& a) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::uint64_t dims[2] = {a.rows(), a.cols()};
    fnv_mix(h, dims, sizeof(dims));
    fnv_mix(h, a.data().data(), a.data().size() * sizeof(double));
    return h;
}

std::uint64_t content_hash(std::span<const double> v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const std::uint64_t n = v.size();
    fnv_mix(h, &n, sizeof(n));
    fnv_mix(h, v.data(), v.size() * sizeof(double));
    return h;
}

}  // namespace qsdcert
