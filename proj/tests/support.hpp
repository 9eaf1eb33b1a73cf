#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "qsdcert/finite_kernel.hpp"
#include "qsdcert/matrix.hpp"
#include "qsdcert/rng.hpp"

namespace qsdcert::testing {

inline std::string config(const std::string& name) { return std::string(QSDCERT_CONFIG_DIR) + "/" + name; }

/// Uniform entries, some zeroed with probability `sparsity`, each row scaled
/// to a uniform total mass in [0.3, 1]. Retries until primitive.
inline SubMarkovKernel random_kernel(Stream& rng, std::size_t n, double sparsity = 0.0) {
    while (true) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                const double u = rng.uniform();
                m(i, j) = rng.uniform() < sparsity ? 0.0 : u;
                s += m(i, j);
            }
            if (s == 0.0) continue;
            const double mass = rng.uniform(0.3, 1.0);
            for (std::size_t j = 0; j < n; ++j) m(i, j) *= mass / s;
        }
        bool dead = false;
        for (double s : row_sums(m)) dead = dead || s == 0.0;
        if (dead) continue;
        const SubMarkovKernel k = validate_kernel(m);
        if (!is_irreducible(k) || period(k) != 1) continue;
        return k;
    }
}

inline Distribution random_distribution(Stream& rng, std::size_t n) {
    Vector w(n);
    for (double& x : w) x = rng.uniform();
    return Distribution::normalized(std::move(w));
}

struct EigenPair {
    double lambda = 0.0;
    Vector left;   // probability
    Vector right;  // normalized so left . right = 1
};

/// Dominant eigenpair from a full dense eigendecomposition.
inline EigenPair dense_oracle(const Matrix& p) {
    const auto n = static_cast<Eigen::Index>(p.rows());
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = p(i, j);
    auto dominant = [](const Eigen::MatrixXd& m) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(m);
        Eigen::Index best = 0;
        for (Eigen::Index k = 1; k < m.rows(); ++k)
            if (es.eigenvalues()(k).real() > es.eigenvalues()(best).real()) best = k;
        Eigen::VectorXd v = es.eigenvectors().col(best).real();
        if (v.sum() < 0) v = -v;
        return std::pair{es.eigenvalues()(best).real(), v};
    };
    auto [lambda, left] = dominant(a.transpose());
    auto [lambda_r, right] = dominant(a);
    (void)lambda_r;
    left /= left.sum();
    right /= left.dot(right);
    EigenPair out;
    out.lambda = lambda;
    out.left.assign(left.data(), left.data() + n);
    out.right.assign(right.data(), right.data() + n);
    return out;
}

/// Sample mean; `se` receives the standard error of the mean.
inline double mean_and_se(const std::vector<double>& xs, double& se) {
    const double n = static_cast<double>(xs.size());
    double m = 0.0;
    for (double x : xs) m += x;
    m /= n;
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    se = std::sqrt(v / (n - 1.0) / n);
    return m;
}

}  // namespace qsdcert::testing
