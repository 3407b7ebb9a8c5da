#pragma once

#include <Eigen/Dense>

namespace loadshift::linalg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Minimum-norm least-squares solution (handles rank-deficient X).
Vector solve_least_squares(const Matrix& X, const Vector& y);

// Least squares with coefficient standard errors, for regression tests of
// significance. Requires full column rank.
struct LsFit {
    Vector beta;
    Vector se;    // sqrt(sigma^2 * diag((X'X)^-1))
    double ssr;   // sum of squared residuals
    int df;       // n - k
};

LsFit solve_ls_with_se(const Matrix& X, const Vector& y);

}  // namespace loadshift::linalg
