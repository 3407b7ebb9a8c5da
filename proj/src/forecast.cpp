#include "loadshift/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "loadshift/util.hpp"

namespace loadshift::forecast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double mean_squared_error(const linalg::Vector& pred, const linalg::Vector& actual) {
    if (pred.size() != actual.size() || pred.size() == 0)
        throw std::invalid_argument("mean_squared_error: size mismatch");
    return (pred - actual).squaredNorm() / static_cast<double>(pred.size());
}

// Picks the grid candidate with the lowest mean fold MSE; strict comparison
// keeps the earliest grid entry on ties. Returns the winning index.
std::size_t select_candidate(const std::vector<std::vector<double>>& fold_mse,
                             std::vector<double>* means) {
    std::size_t best = fold_mse.size();
    double best_mean = kInf;
    means->assign(fold_mse.size(), kInf);
    for (std::size_t c = 0; c < fold_mse.size(); ++c) {
        double sum = 0.0;
        for (double m : fold_mse[c]) sum += m;
        const double mean = sum / static_cast<double>(fold_mse[c].size());
        (*means)[c] = mean;
        if (mean < best_mean) {
            best_mean = mean;
            best = c;
        }
    }
    if (best == fold_mse.size() || !std::isfinite(best_mean))
        throw std::runtime_error("cross-validation: no feasible hyperparameter candidate");
    return best;
}

struct FoldView {
    linalg::Matrix train_x;
    linalg::Vector train_y;
    linalg::Matrix val_x;
    linalg::Vector val_y;
};

std::vector<FoldView> make_folds(const linalg::Matrix& X, const linalg::Vector& y,
                                 int folds) {
    const auto blocks = time_blocks(static_cast<std::size_t>(X.rows()), folds);
    std::vector<FoldView> out;
    out.reserve(blocks.size() - 1);
    for (std::size_t f = 1; f < blocks.size(); ++f) {
        const auto [begin, end] = blocks[f];
        FoldView fv;
        fv.train_x = X.topRows(static_cast<Eigen::Index>(begin));
        fv.train_y = y.head(static_cast<Eigen::Index>(begin));
        fv.val_x = X.middleRows(static_cast<Eigen::Index>(begin),
                                static_cast<Eigen::Index>(end - begin));
        fv.val_y = y.segment(static_cast<Eigen::Index>(begin),
                             static_cast<Eigen::Index>(end - begin));
        out.push_back(std::move(fv));
    }
    return out;
}

std::string lambda_label(double lambda) {
    return "lambda=" + util::fmt_double(lambda);
}

void require_grid(bool nonempty, const char* what) {
    if (!nonempty)
        throw std::invalid_argument(std::string("empty hyperparameter grid for ") + what);
}

void require_rows(const linalg::Matrix& X, const linalg::Vector& y) {
    if (X.rows() == 0 || X.cols() == 0)
        throw std::invalid_argument("forecast fit: empty design matrix");
    if (X.rows() != y.size())
        throw std::invalid_argument("forecast fit: row count mismatch");
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::OLS: return "ols";
        case Method::Lasso: return "lasso";
        case Method::Ridge: return "ridge";
        case Method::KNN: return "knn";
        case Method::SVR: return "svr";
        case Method::Tree: return "tree";
    }
    throw std::logic_error("method_name: unknown method");
}

std::optional<Method> method_from_name(const std::string& name) {
    if (name == "ols") return Method::OLS;
    if (name == "lasso") return Method::Lasso;
    if (name == "ridge") return Method::Ridge;
    if (name == "knn") return Method::KNN;
    if (name == "svr") return Method::SVR;
    if (name == "tree") return Method::Tree;
    return std::nullopt;
}

std::vector<std::pair<std::size_t, std::size_t>> time_blocks(std::size_t n, int folds) {
    if (folds < 1) throw std::invalid_argument("time_blocks: folds must be >= 1");
    const std::size_t blocks = static_cast<std::size_t>(folds) + 1;
    if (n < blocks)
        throw std::invalid_argument("time_blocks: need at least folds+1 rows, have " +
                                    std::to_string(n));
    const std::size_t base = n / blocks;
    const std::size_t extra = n % blocks;
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(blocks);
    std::size_t begin = 0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t len = base + (b < extra ? 1 : 0);
        out.emplace_back(begin, begin + len);
        begin += len;
    }
    return out;
}

linalg::Vector ridge_solve(const linalg::Matrix& X, const linalg::Vector& y,
                           double lambda) {
    require_rows(X, y);
    if (lambda < 0.0) throw std::invalid_argument("ridge_solve: negative lambda");
    if (lambda == 0.0) return linalg::solve_least_squares(X, y);
    linalg::Matrix gram = X.transpose() * X;
    gram.diagonal().array() += lambda;
    return gram.ldlt().solve(X.transpose() * y);
}

LassoResult lasso_solve_gram(const linalg::Matrix& gram, const linalg::Vector& xty,
                             double lambda, linalg::Vector warm_start, double tol,
                             int max_sweeps) {
    const Eigen::Index p = gram.rows();
    if (gram.cols() != p || xty.size() != p)
        throw std::invalid_argument("lasso_solve_gram: dimension mismatch");
    if (lambda < 0.0) throw std::invalid_argument("lasso_solve_gram: negative lambda");
    linalg::Vector beta = warm_start.size() == p
                              ? std::move(warm_start)
                              : linalg::Vector::Zero(p);
    linalg::Vector gb = gram * beta;
    LassoResult res;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double gjj = gram(j, j);
            if (gjj <= 0.0) continue;  // constant-zero column stays at zero
            const double rho = xty(j) - gb(j) + gjj * beta(j);
            double next = 0.0;
            if (rho > lambda)
                next = (rho - lambda) / gjj;
            else if (rho < -lambda)
                next = (rho + lambda) / gjj;
            const double delta = next - beta(j);
            if (delta != 0.0) {
                beta(j) = next;
                gb += delta * gram.col(j);
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        res.sweeps = sweep;
        res.last_delta = max_delta;
        if (max_delta <= tol) {
            res.beta = std::move(beta);
            return res;
        }
    }
    std::ostringstream msg;
    msg << "lasso did not converge: lambda=" << util::fmt_double(lambda)
        << " sweeps=" << res.sweeps << " last max coefficient change="
        << util::fmt_double(res.last_delta) << " (tolerance " << util::fmt_double(tol)
        << ")";
    throw std::runtime_error(msg.str());
}

linalg::Vector lasso_solve(const linalg::Matrix& X, const linalg::Vector& y,
                           double lambda) {
    require_rows(X, y);
    const linalg::Matrix gram = X.transpose() * X;
    const linalg::Vector xty = X.transpose() * y;
    return lasso_solve_gram(gram, xty, lambda, linalg::Vector()).beta;
}

linalg::Vector knn_predict(const linalg::Matrix& train_x, const linalg::Vector& train_y,
                           int k, const linalg::Matrix& queries) {
    if (train_x.rows() != train_y.size())
        throw std::invalid_argument("knn_predict: row count mismatch");
    if (queries.cols() != train_x.cols())
        throw std::invalid_argument("knn_predict: feature width mismatch");
    const Eigen::Index n = train_x.rows();
    if (k < 1 || k > n)
        throw std::invalid_argument("knn: k=" + std::to_string(k) +
                                    " outside [1, " + std::to_string(n) + "]");
    linalg::Vector out(queries.rows());
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    for (Eigen::Index q = 0; q < queries.rows(); ++q) {
        for (Eigen::Index i = 0; i < n; ++i)
            dist[static_cast<std::size_t>(i)] = {
                (train_x.row(i) - queries.row(q)).squaredNorm(), i};
        // Ties in distance resolve to the earlier training row.
        std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
        std::sort(dist.begin(), dist.begin() + k);
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += train_y(dist[static_cast<std::size_t>(j)].second);
        out(q) = sum / static_cast<double>(k);
    }
    return out;
}

linalg::Vector ForecastModel::predict(const linalg::Matrix& X) const {
    return std::visit(
        [&](const auto& p) -> linalg::Vector {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                if (X.cols() != p.beta.size())
                    throw std::invalid_argument("predict: feature width mismatch");
                return X * p.beta;
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                return knn_predict(p.train_x, p.train_y, p.k, X);
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                return svr_predict(p, X);
            } else {
                return tree_predict(p, X);
            }
        },
        params_);
}

ForecastModel fit_ols(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      std::uint64_t schema_hash) {
    require_rows(X0, Y0);
    LinearModel lm{linalg::solve_least_squares(X0, Y0), 0.0};
    CVRecord cv;
    cv.chosen = "none";
    return {Method::OLS, std::move(lm), std::move(cv), schema_hash};
}

namespace {

// Shared CV driver for the two penalized linear models. The solver callback
// maps (gram, xty, lambda, warm start) to a coefficient vector; lambdas are
// visited in descending order so warm starts track the regularization path.
template <typename Solver>
ForecastModel fit_penalized(Method method, const linalg::Matrix& X0,
                            const linalg::Vector& Y0, const CVConfig& cv,
                            std::uint64_t schema_hash, Solver&& solve) {
    require_rows(X0, Y0);
    require_grid(!cv.lambda_grid.empty(), method_name(method).c_str());

    std::vector<std::size_t> order(cv.lambda_grid.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return cv.lambda_grid[a] > cv.lambda_grid[b];
    });

    const auto folds = make_folds(X0, Y0, cv.folds);
    std::vector<std::vector<double>> fold_mse(cv.lambda_grid.size());
    for (const auto& fold : folds) {
        const linalg::Matrix gram = fold.train_x.transpose() * fold.train_x;
        const linalg::Vector xty = fold.train_x.transpose() * fold.train_y;
        linalg::Vector warm;
        for (std::size_t idx : order) {
            const double lambda = cv.lambda_grid[idx];
            linalg::Vector beta =
                solve(fold.train_x, fold.train_y, gram, xty, lambda, warm);
            warm = beta;
            fold_mse[idx].push_back(
                mean_squared_error(fold.val_x * beta, fold.val_y));
        }
    }

    std::vector<double> means;
    const std::size_t best = select_candidate(fold_mse, &means);
    const double chosen_lambda = cv.lambda_grid[best];

    // Final coefficients on the full training set, warm-started down the path.
    const linalg::Matrix gram = X0.transpose() * X0;
    const linalg::Vector xty = X0.transpose() * Y0;
    linalg::Vector warm;
    linalg::Vector beta;
    for (std::size_t idx : order) {
        const double lambda = cv.lambda_grid[idx];
        beta = solve(X0, Y0, gram, xty, lambda, warm);
        warm = beta;
        if (idx == best) break;
    }

    CVRecord rec;
    rec.chosen = lambda_label(chosen_lambda);
    rec.fold_mse = fold_mse[best];
    rec.mean_mse = means[best];
    return {method, LinearModel{std::move(beta), chosen_lambda}, std::move(rec),
            schema_hash};
}

}  // namespace

ForecastModel fit_lasso(const linalg::Matrix& X0, const linalg::Vector& Y0,
                        const CVConfig& cv, std::uint64_t schema_hash) {
    return fit_penalized(
        Method::Lasso, X0, Y0, cv, schema_hash,
        [](const linalg::Matrix&, const linalg::Vector&, const linalg::Matrix& gram,
           const linalg::Vector& xty, double lambda, const linalg::Vector& warm) {
            return lasso_solve_gram(gram, xty, lambda, warm).beta;
        });
}

ForecastModel fit_ridge(const linalg::Matrix& X0, const linalg::Vector& Y0,
                        const CVConfig& cv, std::uint64_t schema_hash) {
    return fit_penalized(
        Method::Ridge, X0, Y0, cv, schema_hash,
        [](const linalg::Matrix& X, const linalg::Vector& y, const linalg::Matrix& gram,
           const linalg::Vector& xty, double lambda,
           const linalg::Vector&) -> linalg::Vector {
            if (lambda == 0.0) return linalg::solve_least_squares(X, y);
            linalg::Matrix g = gram;
            g.diagonal().array() += lambda;
            return g.ldlt().solve(xty);
        });
}

ForecastModel fit_knn(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      const CVConfig& cv, std::uint64_t schema_hash) {
    require_rows(X0, Y0);
    require_grid(!cv.knn_grid.empty(), "knn");
    const auto folds = make_folds(X0, Y0, cv.folds);
    std::vector<std::vector<double>> fold_mse(cv.knn_grid.size());

    std::vector<std::pair<double, Eigen::Index>> dist;
    for (const auto& fold : folds) {
        const Eigen::Index t = fold.train_x.rows();
        dist.resize(static_cast<std::size_t>(t));
        std::vector<double> sq_err(cv.knn_grid.size(), 0.0);
        std::vector<bool> feasible(cv.knn_grid.size());
        for (std::size_t c = 0; c < cv.knn_grid.size(); ++c)
            feasible[c] = cv.knn_grid[c] >= 1 &&
                          cv.knn_grid[c] <= static_cast<int>(t);
        // One neighbor sort per validation row serves every k via prefix means.
        std::vector<double> prefix(static_cast<std::size_t>(t) + 1, 0.0);
        for (Eigen::Index q = 0; q < fold.val_x.rows(); ++q) {
            for (Eigen::Index i = 0; i < t; ++i)
                dist[static_cast<std::size_t>(i)] = {
                    (fold.train_x.row(i) - fold.val_x.row(q)).squaredNorm(), i};
            std::sort(dist.begin(), dist.end());
            for (Eigen::Index i = 0; i < t; ++i)
                prefix[static_cast<std::size_t>(i) + 1] =
                    prefix[static_cast<std::size_t>(i)] +
                    fold.train_y(dist[static_cast<std::size_t>(i)].second);
            for (std::size_t c = 0; c < cv.knn_grid.size(); ++c) {
                if (!feasible[c]) continue;
                const int k = cv.knn_grid[c];
                const double pred = prefix[static_cast<std::size_t>(k)] / k;
                const double err = pred - fold.val_y(q);
                sq_err[c] += err * err;
            }
        }
        for (std::size_t c = 0; c < cv.knn_grid.size(); ++c)
            fold_mse[c].push_back(feasible[c]
                                      ? sq_err[c] / static_cast<double>(fold.val_x.rows())
                                      : kInf);
    }

    std::vector<double> means;
    const std::size_t best = select_candidate(fold_mse, &means);
    const int k = cv.knn_grid[best];
    if (k > X0.rows())
        throw std::runtime_error("knn: chosen k exceeds training rows");

    CVRecord rec;
    rec.chosen = "k=" + std::to_string(k);
    rec.fold_mse = fold_mse[best];
    rec.mean_mse = means[best];
    return {Method::KNN, KnnModel{X0, Y0, k}, std::move(rec), schema_hash};
}

namespace {

// Keeps the most recent rows when the training set exceeds the cap; SMO cost
// grows too fast for full multi-year histories.
void cap_rows(linalg::Matrix* X, linalg::Vector* y, std::size_t cap) {
    if (cap == 0 || static_cast<std::size_t>(X->rows()) <= cap) return;
    const Eigen::Index n = static_cast<Eigen::Index>(cap);
    *X = X->bottomRows(n).eval();
    *y = y->tail(n).eval();
}

std::string svr_label(const SvrConfig& cfg) {
    return "c=" + util::fmt_double(cfg.c) + " gamma=" + util::fmt_double(cfg.gamma) +
           " eps=" + util::fmt_double(cfg.eps);
}

}  // namespace

ForecastModel fit_svr(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      const CVConfig& cv, std::uint64_t schema_hash) {
    require_rows(X0, Y0);
    require_grid(!cv.svr_c.empty() && !cv.svr_gamma.empty() && !cv.svr_eps.empty(),
                 "svr");
    linalg::Matrix X = X0;
    linalg::Vector y = Y0;
    cap_rows(&X, &y, cv.svr_subset_cap);

    std::vector<SvrConfig> grid;
    for (double c : cv.svr_c)
        for (double g : cv.svr_gamma)
            for (double e : cv.svr_eps) {
                SvrConfig cfg;
                cfg.c = c;
                cfg.gamma = g;
                cfg.eps = e;
                cfg.subset_cap = cv.svr_subset_cap;
                grid.push_back(cfg);
            }

    const auto folds = make_folds(X, y, cv.folds);
    std::vector<std::vector<double>> fold_mse(grid.size());
    for (const auto& fold : folds) {
        for (std::size_t c = 0; c < grid.size(); ++c) {
            double mse = kInf;
            try {
                const SvrModel m = svr_fit(fold.train_x, fold.train_y, grid[c]);
                mse = mean_squared_error(svr_predict(m, fold.val_x), fold.val_y);
            } catch (const std::runtime_error&) {
                // Non-convergence disqualifies the candidate on this fold.
            }
            fold_mse[c].push_back(mse);
        }
    }

    std::vector<double> means;
    const std::size_t best = select_candidate(fold_mse, &means);
    SvrModel model = svr_fit(X, y, grid[best]);

    CVRecord rec;
    rec.chosen = svr_label(grid[best]);
    rec.fold_mse = fold_mse[best];
    rec.mean_mse = means[best];
    return {Method::SVR, std::move(model), std::move(rec), schema_hash};
}

ForecastModel fit_tree(const linalg::Matrix& X0, const linalg::Vector& Y0,
                       const CVConfig& cv, std::uint64_t schema_hash) {
    require_rows(X0, Y0);
    require_grid(!cv.tree_depths.empty(), "tree");
    const int grid_max = *std::max_element(cv.tree_depths.begin(), cv.tree_depths.end());

    const auto folds = make_folds(X0, Y0, cv.folds);
    std::vector<std::vector<double>> fold_mse(cv.tree_depths.size());
    for (const auto& fold : folds) {
        // One deep tree per fold; shallower candidates score by truncating
        // prediction depth, which matches a tree grown to that depth.
        const TreeModel deep =
            tree_fit(fold.train_x, fold.train_y, grid_max, cv.tree_min_samples);
        for (std::size_t c = 0; c < cv.tree_depths.size(); ++c) {
            const int depth = cv.tree_depths[c];
            const linalg::Vector pred = tree_predict(deep, fold.val_x, depth);
            fold_mse[c].push_back(mean_squared_error(pred, fold.val_y));
        }
    }

    std::vector<double> means;
    const std::size_t best = select_candidate(fold_mse, &means);
    const int depth = cv.tree_depths[best];
    TreeModel model = tree_fit(X0, Y0, depth, cv.tree_min_samples);

    CVRecord rec;
    rec.chosen = "max_depth=" + std::to_string(depth);
    rec.fold_mse = fold_mse[best];
    rec.mean_mse = means[best];
    return {Method::Tree, std::move(model), std::move(rec), schema_hash};
}

ForecastModel fit_method(Method m, const linalg::Matrix& X0, const linalg::Vector& Y0,
                         const CVConfig& cv, std::uint64_t schema_hash) {
    switch (m) {
        case Method::OLS: return fit_ols(X0, Y0, schema_hash);
        case Method::Lasso: return fit_lasso(X0, Y0, cv, schema_hash);
        case Method::Ridge: return fit_ridge(X0, Y0, cv, schema_hash);
        case Method::KNN: return fit_knn(X0, Y0, cv, schema_hash);
        case Method::SVR: return fit_svr(X0, Y0, cv, schema_hash);
        case Method::Tree: return fit_tree(X0, Y0, cv, schema_hash);
    }
    throw std::logic_error("fit_method: unknown method");
}

HoldoutFit fit_with_holdout(Method m, const linalg::Matrix& X0,
                            const linalg::Vector& Y0, const CVConfig& cv,
                            double holdout_fraction, std::uint64_t schema_hash) {
    require_rows(X0, Y0);
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
        throw std::invalid_argument("fit_with_holdout: fraction must be in (0,1)");
    const Eigen::Index n = X0.rows();
    Eigen::Index held = static_cast<Eigen::Index>(
        std::floor(static_cast<double>(n) * holdout_fraction));
    held = std::max<Eigen::Index>(held, 1);
    const Eigen::Index train = n - held;
    if (train < cv.folds + 1)
        throw std::invalid_argument("fit_with_holdout: too few rows before the holdout");

    const ForecastModel pre =
        fit_method(m, X0.topRows(train), Y0.head(train), cv, schema_hash);
    HoldoutFit out{refit(pre, X0, Y0), pre.predict(X0.bottomRows(held)), train};
    return out;
}

ForecastModel refit(const ForecastModel& chosen, const linalg::Matrix& X,
                    const linalg::Vector& y) {
    require_rows(X, y);
    CVRecord rec = chosen.cv_record();
    switch (chosen.method()) {
        case Method::OLS:
            return {Method::OLS, LinearModel{linalg::solve_least_squares(X, y), 0.0},
                    std::move(rec), chosen.schema_hash()};
        case Method::Lasso: {
            const double lambda = std::get<LinearModel>(chosen.params()).lambda;
            return {Method::Lasso, LinearModel{lasso_solve(X, y, lambda), lambda},
                    std::move(rec), chosen.schema_hash()};
        }
        case Method::Ridge: {
            const double lambda = std::get<LinearModel>(chosen.params()).lambda;
            return {Method::Ridge, LinearModel{ridge_solve(X, y, lambda), lambda},
                    std::move(rec), chosen.schema_hash()};
        }
        case Method::KNN: {
            const int k = std::get<KnnModel>(chosen.params()).k;
            if (k > X.rows())
                throw std::invalid_argument("knn refit: k exceeds training rows");
            return {Method::KNN, KnnModel{X, y, k}, std::move(rec),
                    chosen.schema_hash()};
        }
        case Method::SVR: {
            SvrConfig cfg = std::get<SvrModel>(chosen.params()).cfg;
            linalg::Matrix Xc = X;
            linalg::Vector yc = y;
            cap_rows(&Xc, &yc, cfg.subset_cap);
            return {Method::SVR, svr_fit(Xc, yc, cfg), std::move(rec),
                    chosen.schema_hash()};
        }
        case Method::Tree: {
            const TreeModel& t = std::get<TreeModel>(chosen.params());
            return {Method::Tree, tree_fit(X, y, t.max_depth, t.min_samples),
                    std::move(rec), chosen.schema_hash()};
        }
    }
    throw std::logic_error("refit: unknown method");
}

namespace {

using nlohmann::json;

json vector_to_json(const linalg::Vector& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

linalg::Vector vector_from_json(const json& arr) {
    linalg::Vector v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i)
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    return v;
}

json matrix_to_json(const linalg::Matrix& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

linalg::Matrix matrix_from_json(const json& rows) {
    if (rows.empty()) return {};
    const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index c = static_cast<Eigen::Index>(rows[0].size());
    linalg::Matrix m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
        const json& row = rows[static_cast<std::size_t>(i)];
        if (static_cast<Eigen::Index>(row.size()) != c)
            throw std::runtime_error("model file: ragged matrix");
        for (Eigen::Index j = 0; j < c; ++j)
            m(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    return m;
}

json params_to_json(const ForecastModel::Params& params) {
    return std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, LinearModel>) {
                return {{"beta", vector_to_json(p.beta)}, {"lambda", p.lambda}};
            } else if constexpr (std::is_same_v<T, KnnModel>) {
                return {{"k", p.k},
                        {"train_x", matrix_to_json(p.train_x)},
                        {"train_y", vector_to_json(p.train_y)}};
            } else if constexpr (std::is_same_v<T, SvrModel>) {
                return {{"c", p.cfg.c},
                        {"gamma", p.cfg.gamma},
                        {"eps", p.cfg.eps},
                        {"tol", p.cfg.tol},
                        {"max_iter", p.cfg.max_iter},
                        {"subset_cap", p.cfg.subset_cap},
                        {"bias", p.bias},
                        {"coefficients", vector_to_json(p.coefficients)},
                        {"support_vectors", matrix_to_json(p.support_vectors)},
                        {"iterations", p.iterations},
                        {"final_gap", p.final_gap},
                        {"n_support", p.n_support}};
            } else {
                json nodes = json::array();
                for (const TreeNode& n : p.nodes)
                    nodes.push_back(json::array({n.feature, n.threshold, n.left,
                                                 n.right, n.prediction, n.n_samples}));
                return {{"max_depth", p.max_depth},
                        {"min_samples", p.min_samples},
                        {"nodes", std::move(nodes)}};
            }
        },
        params);
}

ForecastModel::Params params_from_json(Method method, const json& j) {
    switch (method) {
        case Method::OLS:
        case Method::Lasso:
        case Method::Ridge:
            return LinearModel{vector_from_json(j.at("beta")),
                               j.at("lambda").get<double>()};
        case Method::KNN:
            return KnnModel{matrix_from_json(j.at("train_x")),
                            vector_from_json(j.at("train_y")), j.at("k").get<int>()};
        case Method::SVR: {
            SvrModel m;
            m.cfg.c = j.at("c").get<double>();
            m.cfg.gamma = j.at("gamma").get<double>();
            m.cfg.eps = j.at("eps").get<double>();
            m.cfg.tol = j.at("tol").get<double>();
            m.cfg.max_iter = j.at("max_iter").get<std::int64_t>();
            m.cfg.subset_cap = j.at("subset_cap").get<std::size_t>();
            m.bias = j.at("bias").get<double>();
            m.coefficients = vector_from_json(j.at("coefficients"));
            m.support_vectors = matrix_from_json(j.at("support_vectors"));
            m.iterations = j.at("iterations").get<std::int64_t>();
            m.final_gap = j.at("final_gap").get<double>();
            m.n_support = j.at("n_support").get<std::size_t>();
            return m;
        }
        case Method::Tree: {
            TreeModel t;
            t.max_depth = j.at("max_depth").get<int>();
            t.min_samples = j.at("min_samples").get<int>();
            for (const json& n : j.at("nodes")) {
                if (n.size() != 6) throw std::runtime_error("model file: bad tree node");
                TreeNode node;
                node.feature = n[0].get<int>();
                node.threshold = n[1].get<double>();
                node.left = n[2].get<int>();
                node.right = n[3].get<int>();
                node.prediction = n[4].get<double>();
                node.n_samples = n[5].get<std::size_t>();
                t.nodes.push_back(node);
            }
            return t;
        }
    }
    throw std::logic_error("params_from_json: unknown method");
}

}  // namespace

void ForecastModel::save(const std::filesystem::path& path) const {
    json j;
    j["format"] = "loadshift-model-v1";
    j["method"] = method_name(method_);
    j["schema_hash"] = util::hex64(schema_hash_);
    json cv;
    cv["chosen"] = cv_.chosen;
    cv["fold_mse"] = cv_.fold_mse;
    cv["mean_mse"] = std::isfinite(cv_.mean_mse) ? json(cv_.mean_mse) : json(nullptr);
    j["cv"] = std::move(cv);
    j["params"] = params_to_json(params_);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write model file: " + path.string());
    out << j.dump(1) << "\n";
    if (!out) throw std::runtime_error("failed writing model file: " + path.string());
}

ForecastModel ForecastModel::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::runtime_error("model file " + path.string() + ": " + e.what());
    }
    if (j.value("format", "") != "loadshift-model-v1")
        throw std::runtime_error("model file " + path.string() + ": unknown format");
    const auto method = method_from_name(j.at("method").get<std::string>());
    if (!method)
        throw std::runtime_error("model file " + path.string() + ": unknown method");
    CVRecord cv;
    const json& cvj = j.at("cv");
    cv.chosen = cvj.at("chosen").get<std::string>();
    cv.fold_mse = cvj.at("fold_mse").get<std::vector<double>>();
    cv.mean_mse = cvj.at("mean_mse").is_null()
                      ? std::numeric_limits<double>::quiet_NaN()
                      : cvj.at("mean_mse").get<double>();
    std::uint64_t schema = 0;
    const std::string hex = j.at("schema_hash").get<std::string>();
    schema = std::stoull(hex, nullptr, 16);
    return {*method, params_from_json(*method, j.at("params")), std::move(cv), schema};
}

}  // namespace loadshift::forecast
