#include "qsdcert/linear_program.hpp"

#include <cmath>
#include <limits>

#include "qsdcert/error.hpp"

namespace qsdcert {

namespace {

struct Tableau {
    std::size_t m = 0;       // constraint rows
    std::size_t width = 0;   // variable columns (rhs stored separately)
    Matrix t;                // m x width
    Vector rhs;              // m
    Vector reduced;          // width, c_j - z_j
    double value = 0.0;      // current objective
    std::vector<std::size_t> basis;

    void pivot(std::size_t row, std::size_t col) {
        const double p = t(row, col);
        for (std::size_t j = 0; j < width; ++j) t(row, j) /= p;
        rhs[row] /= p;
        for (std::size_t i = 0; i < m; ++i) {
            if (i == row) continue;
            const double f = t(i, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < width; ++j) t(i, j) -= f * t(row, j);
            rhs[i] -= f * rhs[row];
        }
        const double f = reduced[col];
        if (f != 0.0) {
            for (std::size_t j = 0; j < width; ++j) reduced[j] -= f * t(row, j);
            value += f * rhs[row];
        }
        basis[row] = col;
    }

    // Returns false when unbounded.
    bool optimize(std::size_t usable_columns, double eps) {
        for (std::size_t guard = 0; guard < 100000; ++guard) {
            std::size_t enter = width;
            for (std::size_t j = 0; j < usable_columns; ++j) {
                if (reduced[j] > eps) {
                    enter = j;
                    break;
                }
            }
            if (enter == width) return true;
            std::size_t leave = m;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m; ++i) {
                if (t(i, enter) > eps) {
                    const double ratio = rhs[i] / t(i, enter);
                    if (ratio < best - eps ||
                        (std::fabs(ratio - best) <= eps && leave < m && basis[i] < basis[leave])) {
                        best = ratio;
                        leave = i;
                    }
                }
            }
            if (leave == m) return false;
            pivot(leave, enter);
        }
        throw Error(ErrorCode::NoConvergence, "simplex did not terminate");
    }
};

}  // namespace

LpResult maximize(const Matrix& a, const Vector& b, const Vector& c, double eps) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m || c.size() != n)
        throw Error(ErrorCode::DimensionMismatch, "LP dimensions do not agree");

    Tableau tab;
    tab.m = m;
    tab.width = n + m;
    tab.t = Matrix(m, n + m);
    tab.rhs = b;
    tab.basis.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
        const double sign = b[i] < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j) tab.t(i, j) = sign * a(i, j);
        tab.rhs[i] = sign * b[i];
        tab.t(i, n + i) = 1.0;
        tab.basis[i] = n + i;
    }

    // Phase 1: maximize -sum(artificials).
    tab.reduced.assign(n + m, 0.0);
    tab.value = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) tab.reduced[j] += tab.t(i, j);
        tab.value -= tab.rhs[i];
    }
    tab.optimize(n, eps);
    if (tab.value < -1e-9) return {LpStatus::Infeasible, 0.0, {}};

    // Drive zero-level artificials out of the basis; drop redundant rows.
    for (std::size_t i = 0; i < tab.m;) {
        if (tab.basis[i] < n) {
            ++i;
            continue;
        }
        std::size_t col = n;
        for (std::size_t j = 0; j < n; ++j)
            if (std::fabs(tab.t(i, j)) > eps) {
                col = j;
                break;
            }
        if (col < n) {
            tab.pivot(i, col);
            ++i;
            continue;
        }
        Matrix shrunk(tab.m - 1, tab.width);
        Vector rhs;
        std::vector<std::size_t> basis;
        for (std::size_t r = 0, k = 0; r < tab.m; ++r) {
            if (r == i) continue;
            for (std::size_t j = 0; j < tab.width; ++j) shrunk(k, j) = tab.t(r, j);
            rhs.push_back(tab.rhs[r]);
            basis.push_back(tab.basis[r]);
            ++k;
        }
        tab.t = std::move(shrunk);
        tab.rhs = std::move(rhs);
        tab.basis = std::move(basis);
        --tab.m;
    }

    // Phase 2 on the original objective.
    tab.reduced.assign(n + m, 0.0);
    for (std::size_t j = 0; j < n; ++j) tab.reduced[j] = c[j];
    tab.value = 0.0;
    for (std::size_t i = 0; i < tab.m; ++i) {
        const double cb = c[tab.basis[i]];
        if (cb == 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) tab.reduced[j] -= cb * tab.t(i, j);
        tab.value += cb * tab.rhs[i];
    }
    if (!tab.optimize(n, eps)) return {LpStatus::Unbounded, 0.0, {}};

    LpResult out;
    out.status = LpStatus::Optimal;
    out.objective = tab.value;
    out.x.assign(n, 0.0);
    for (std::size_t i = 0; i < tab.m; ++i) out.x[tab.basis[i]] = tab.rhs[i];
    return out;
}

}  // namespace qsdcert
