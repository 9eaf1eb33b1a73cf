#pragma once

#include "qsdcert/matrix.hpp"

namespace qsdcert {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    Vector x;
};

/// maximize c.x subject to A x = b, x >= 0. Dense two-phase tableau simplex
/// with Bland's rule; intended for the handful of variables a drift set has.
LpResult maximize(const Matrix& a, const Vector& b, const Vector& c, double eps = 1e-12);

}  // namespace qsdcert
