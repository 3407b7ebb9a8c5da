#include "loadshift/linalg.hpp"

#include <stdexcept>

namespace loadshift::linalg {

Vector solve_least_squares(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("solve_least_squares: dimension mismatch");
    }
    if (X.rows() == 0) {
        throw std::invalid_argument("solve_least_squares: empty system");
    }
    return X.completeOrthogonalDecomposition().solve(y);
}

LsFit solve_ls_with_se(const Matrix& X, const Vector& y) {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("solve_ls_with_se: dimension mismatch");
    }
    const Eigen::Index n = X.rows();
    const Eigen::Index k = X.cols();
    if (n <= k) {
        throw std::invalid_argument("solve_ls_with_se: need more rows than columns");
    }

    Eigen::ColPivHouseholderQR<Matrix> qr(X);
    if (qr.rank() < k) {
        throw std::runtime_error("solve_ls_with_se: rank-deficient design matrix");
    }

    LsFit fit;
    fit.beta = qr.solve(y);
    fit.ssr = (y - X * fit.beta).squaredNorm();
    fit.df = static_cast<int>(n - k);
    const double sigma2 = fit.ssr / static_cast<double>(fit.df);

    // X P = Q R  =>  (X'X)^-1 = P R^-1 R^-T P'
    const Matrix R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Matrix Rinv = R.inverse();
    const Matrix cov = qr.colsPermutation() * (Rinv * Rinv.transpose()) *
                       qr.colsPermutation().transpose();
    fit.se.resize(k);
    for (Eigen::Index j = 0; j < k; ++j) {
        fit.se(j) = std::sqrt(sigma2 * cov(j, j));
    }
    return fit;
}

}  // namespace loadshift::linalg
