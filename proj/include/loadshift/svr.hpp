#pragma once

#include <cstdint>

#include "loadshift/linalg.hpp"

namespace loadshift::forecast {

struct SvrConfig {
    double c = 1.0;
    double gamma = 0.1;   // K(u,v) = exp(-gamma * ||u-v||^2)
    double eps = 0.1;     // tube half-width
    double tol = 1e-3;    // KKT violation tolerance
    std::int64_t max_iter = 0;  // 0: max(200000, 50n)
    // Training-set cap enforced by the forecast layer (most recent rows
    // kept); carried here so refits apply the same cap. 0 disables.
    std::size_t subset_cap = 5000;
};

struct SvrModel {
    SvrConfig cfg;
    linalg::Matrix support_vectors;  // rows with nonzero coefficient
    linalg::Vector coefficients;     // alpha - alpha* per support vector
    double bias = 0.0;
    std::int64_t iterations = 0;
    double final_gap = 0.0;  // m(beta) - M(beta) at exit
    std::size_t n_support = 0;
};

// Epsilon-tube SVR in the dual, solved by SMO with maximal-violating-pair
// selection over the 2n-variable formulation. Throws on non-convergence,
// reporting the remaining KKT gap.
SvrModel svr_fit(const linalg::Matrix& X, const linalg::Vector& y,
                 const SvrConfig& cfg);

linalg::Vector svr_predict(const SvrModel& model, const linalg::Matrix& X);

}  // namespace loadshift::forecast
