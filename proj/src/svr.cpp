#include "loadshift/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace loadshift::forecast {

namespace {

// FIFO-evicting cache of Gaussian kernel rows. Row p holds K(x_p, x_q) for
// all q; the SMO loop touches two rows per iteration, usually from a small
// working set, so a bounded cache captures nearly all reuse.
class KernelCache {
public:
    KernelCache(const linalg::Matrix& X, double gamma, std::size_t budget_doubles)
        : X_(X), gamma_(gamma), n_(static_cast<std::size_t>(X.rows())) {
        std::size_t rows = n_ == 0 ? 1 : std::max<std::size_t>(2, budget_doubles / n_);
        rows = std::min(rows, n_ == 0 ? std::size_t{1} : n_);
        slots_.resize(rows);
        slot_of_.assign(n_, SIZE_MAX);
        sq_norm_.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) sq_norm_[i] = X_.row(i).squaredNorm();
    }

    const double* row(std::size_t p) {
        if (slot_of_[p] != SIZE_MAX) return slots_[slot_of_[p]].values.data();
        const std::size_t s = next_;
        next_ = (next_ + 1) % slots_.size();
        if (slots_[s].owner != SIZE_MAX) slot_of_[slots_[s].owner] = SIZE_MAX;
        slots_[s].owner = p;
        slots_[s].values.resize(n_);
        slot_of_[p] = s;
        for (std::size_t q = 0; q < n_; ++q) {
            const double d2 = sq_norm_[p] + sq_norm_[q] - 2.0 * X_.row(p).dot(X_.row(q));
            slots_[s].values[q] = std::exp(-gamma_ * std::max(0.0, d2));
        }
        return slots_[s].values.data();
    }

private:
    struct Slot {
        std::size_t owner = SIZE_MAX;
        std::vector<double> values;
    };
    const linalg::Matrix& X_;
    double gamma_;
    std::size_t n_;
    std::vector<Slot> slots_;
    std::vector<std::size_t> slot_of_;
    std::vector<double> sq_norm_;
    std::size_t next_ = 0;
};

}  // namespace

SvrModel svr_fit(const linalg::Matrix& X, const linalg::Vector& y,
                 const SvrConfig& cfg) {
    const std::size_t n = static_cast<std::size_t>(X.rows());
    if (n == 0 || X.rows() != y.size()) {
        throw std::invalid_argument("svr_fit: empty or mismatched input");
    }
    if (cfg.c <= 0.0 || cfg.gamma <= 0.0 || cfg.eps < 0.0) {
        throw std::invalid_argument("svr_fit: C and gamma must be positive, eps >= 0");
    }
    const std::int64_t max_iter =
        cfg.max_iter > 0 ? cfg.max_iter
                         : std::max<std::int64_t>(200000, 50 * static_cast<std::int64_t>(n));

    // Dual variables beta = [alpha; alpha*] with signs z = [+1; -1]; the
    // quadratic term factors as Q_ij = z_i z_j K(x_{i%n}, x_{j%n}), so the
    // gradient only ever needs plain kernel rows.
    const std::size_t m = 2 * n;
    std::vector<double> beta(m, 0.0);
    std::vector<double> grad(m);  // G_i = (Q beta)_i + p_i, starts at p
    for (std::size_t i = 0; i < n; ++i) {
        grad[i] = cfg.eps - y(static_cast<Eigen::Index>(i));
        grad[i + n] = cfg.eps + y(static_cast<Eigen::Index>(i));
    }
    auto sign_of = [n](std::size_t i) { return i < n ? 1.0 : -1.0; };

    KernelCache cache(X, cfg.gamma, /*budget_doubles=*/16u << 20);

    double gap = std::numeric_limits<double>::infinity();
    std::int64_t iter = 0;
    for (; iter < max_iter; ++iter) {
        // Maximal violating pair: i maximizes -z G over the up-set,
        // j minimizes -z G over the low-set.
        double up_best = -std::numeric_limits<double>::infinity();
        double low_best = std::numeric_limits<double>::infinity();
        std::size_t i_up = m, j_low = m;
        for (std::size_t i = 0; i < m; ++i) {
            const double z = sign_of(i);
            const double v = -z * grad[i];
            const bool in_up = (z > 0.0) ? beta[i] < cfg.c : beta[i] > 0.0;
            const bool in_low = (z > 0.0) ? beta[i] > 0.0 : beta[i] < cfg.c;
            if (in_up && v > up_best) {
                up_best = v;
                i_up = i;
            }
            if (in_low && v < low_best) {
                low_best = v;
                j_low = i;
            }
        }
        gap = up_best - low_best;
        if (gap <= cfg.tol || i_up == m || j_low == m) break;

        const std::size_t i = i_up, j = j_low;
        const std::size_t pi = i % n, pj = j % n;
        const double zi = sign_of(i), zj = sign_of(j);
        // Fetch j's row first: a miss may evict, but a second fetch never
        // displaces the row the first one just loaded.
        const double* Kj = cache.row(pj);
        const double* Ki = cache.row(pi);
        const double eta = Ki[pi] + Kj[pj] - 2.0 * Ki[pj];

        // Step t moves beta_i by +z_i t and beta_j by -z_j t, preserving the
        // equality constraint. Unconstrained optimum then box clipping.
        double t = (eta > 1e-12) ? (-(zi * grad[i]) + zj * grad[j]) / eta
                                 : std::numeric_limits<double>::infinity();
        const double t_max_i = (zi > 0.0) ? cfg.c - beta[i] : beta[i];
        const double t_max_j = (zj > 0.0) ? beta[j] : cfg.c - beta[j];
        t = std::min(t, std::min(t_max_i, t_max_j));
        if (!(t > 0.0)) {
            // Numerically stuck pair; treat as converged at current gap.
            break;
        }

        beta[i] += zi > 0.0 ? t : -t;
        beta[j] -= zj > 0.0 ? t : -t;
        // Clamp accumulated float drift to the box.
        beta[i] = std::clamp(beta[i], 0.0, cfg.c);
        beta[j] = std::clamp(beta[j], 0.0, cfg.c);

        for (std::size_t k = 0; k < m; ++k) {
            const double zk = sign_of(k);
            grad[k] += t * zk * (Ki[k % n] - Kj[k % n]);
        }
    }

    if (gap > cfg.tol) {
        throw std::runtime_error("svr_fit: no convergence after " +
                                 std::to_string(iter) + " iterations, KKT gap " +
                                 std::to_string(gap) + " > tol " +
                                 std::to_string(cfg.tol));
    }

    // b via the optimality interval [m(beta), M(beta)]; with any free
    // variable the interval collapses onto -z_i G_i.
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
        const double z = sign_of(i);
        const double v = -z * grad[i];
        const bool in_up = (z > 0.0) ? beta[i] < cfg.c : beta[i] > 0.0;
        const bool in_low = (z > 0.0) ? beta[i] > 0.0 : beta[i] < cfg.c;
        if (in_up) lo = std::max(lo, v);
        if (in_low) hi = std::min(hi, v);
    }
    const double b = 0.5 * (lo + hi);

    SvrModel model;
    model.cfg = cfg;
    model.bias = b;
    model.iterations = iter;
    model.final_gap = gap;

    std::vector<std::size_t> sv;
    for (std::size_t p = 0; p < n; ++p) {
        if (beta[p] != beta[p + n]) sv.push_back(p);
    }
    model.n_support = sv.size();
    model.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
    model.coefficients.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t r = 0; r < sv.size(); ++r) {
        model.support_vectors.row(static_cast<Eigen::Index>(r)) = X.row(sv[r]);
        model.coefficients(static_cast<Eigen::Index>(r)) = beta[sv[r]] - beta[sv[r] + n];
    }
    return model;
}

linalg::Vector svr_predict(const SvrModel& model, const linalg::Matrix& X) {
    if (model.support_vectors.rows() > 0 &&
        X.cols() != model.support_vectors.cols()) {
        throw std::invalid_argument("svr_predict: feature width mismatch");
    }
    linalg::Vector out(X.rows());
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        double acc = model.bias;
        for (Eigen::Index s = 0; s < model.support_vectors.rows(); ++s) {
            const double d2 = (X.row(r) - model.support_vectors.row(s)).squaredNorm();
            acc += model.coefficients(s) * std::exp(-model.cfg.gamma * d2);
        }
        out(r) = acc;
    }
    return out;
}

}  // namespace loadshift::forecast
