#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "loadshift/linalg.hpp"
#include "loadshift/svr.hpp"
#include "loadshift/tree.hpp"

namespace loadshift::forecast {

// The ISO 10-in-10 baseline lives in baseline.hpp; it predicts from raw
// history rather than covariates, so it is not a ForecastModel.
enum class Method { OLS, Lasso, Ridge, KNN, SVR, Tree };

std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct CVConfig {
    int folds = 5;
    std::uint64_t seed = 0;
    std::vector<double> lambda_grid;  // lasso and ridge
    std::vector<int> knn_grid;
    std::vector<double> svr_c;
    std::vector<double> svr_gamma;
    std::vector<double> svr_eps;
    std::size_t svr_subset_cap = 5000;
    std::vector<int> tree_depths;
    int tree_min_samples = 5;
};

struct CVRecord {
    std::string chosen;  // rendered hyperparameters, "none" for OLS
    std::vector<double> fold_mse;
    double mean_mse = std::numeric_limits<double>::quiet_NaN();
};

struct LinearModel {
    linalg::Vector beta;
    double lambda = 0.0;
};

struct KnnModel {
    linalg::Matrix train_x;
    linalg::Vector train_y;
    int k = 1;
};

class ForecastModel {
public:
    using Params = std::variant<LinearModel, KnnModel, SvrModel, TreeModel>;

    ForecastModel(Method method, Params params, CVRecord cv, std::uint64_t schema_hash)
        : method_(method),
          params_(std::move(params)),
          cv_(std::move(cv)),
          schema_hash_(schema_hash) {}

    Method method() const { return method_; }
    const Params& params() const { return params_; }
    const CVRecord& cv_record() const { return cv_; }
    std::uint64_t schema_hash() const { return schema_hash_; }

    linalg::Vector predict(const linalg::Matrix& X) const;

    void save(const std::filesystem::path& path) const;
    static ForecastModel load(const std::filesystem::path& path);

private:
    Method method_;
    Params params_;
    CVRecord cv_;
    std::uint64_t schema_hash_;
};

// Forward-chaining fold layout: rows [0, n) cut into folds+1 contiguous
// blocks; fold i trains on blocks 0..i-1 and validates on block i, so no
// validation row ever precedes a training row.
std::vector<std::pair<std::size_t, std::size_t>> time_blocks(std::size_t n, int folds);

// Direct solvers, also used by the property tests.
linalg::Vector ridge_solve(const linalg::Matrix& X, const linalg::Vector& y,
                           double lambda);

struct LassoResult {
    linalg::Vector beta;
    int sweeps = 0;
    double last_delta = 0.0;
};

// Cyclic coordinate descent on the Gram system for
// (1/2)||y - X b||^2 + lambda ||b||_1; this scaling makes
// lambda >= ||X'y||_inf zero out every coefficient.
LassoResult lasso_solve_gram(const linalg::Matrix& gram, const linalg::Vector& xty,
                             double lambda, linalg::Vector warm_start,
                             double tol = 1e-7, int max_sweeps = 100000);
linalg::Vector lasso_solve(const linalg::Matrix& X, const linalg::Vector& y,
                           double lambda);

linalg::Vector knn_predict(const linalg::Matrix& train_x, const linalg::Vector& train_y,
                           int k, const linalg::Matrix& queries);

ForecastModel fit_ols(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      std::uint64_t schema_hash);
ForecastModel fit_lasso(const linalg::Matrix& X0, const linalg::Vector& Y0,
                        const CVConfig& cv, std::uint64_t schema_hash);
ForecastModel fit_ridge(const linalg::Matrix& X0, const linalg::Vector& Y0,
                        const CVConfig& cv, std::uint64_t schema_hash);
ForecastModel fit_knn(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      const CVConfig& cv, std::uint64_t schema_hash);
ForecastModel fit_svr(const linalg::Matrix& X0, const linalg::Vector& Y0,
                      const CVConfig& cv, std::uint64_t schema_hash);
ForecastModel fit_tree(const linalg::Matrix& X0, const linalg::Vector& Y0,
                       const CVConfig& cv, std::uint64_t schema_hash);

ForecastModel fit_method(Method m, const linalg::Matrix& X0, const linalg::Vector& Y0,
                         const CVConfig& cv, std::uint64_t schema_hash);

struct HoldoutFit {
    ForecastModel model;          // refit on every row after evaluation
    linalg::Vector holdout_pred;  // predictions for rows [holdout_begin, n)
    Eigen::Index holdout_begin = 0;
};

// Cross-validates and fits on the leading rows, predicts the trailing
// holdout_fraction of rows with that fit, then refits the chosen
// hyperparameters on all rows.
HoldoutFit fit_with_holdout(Method m, const linalg::Matrix& X0,
                            const linalg::Vector& Y0, const CVConfig& cv,
                            double holdout_fraction, std::uint64_t schema_hash);

// Refits the same method with the already-chosen hyperparameters on new
// data (no fresh CV); used to refit on the full training set after the
// holdout evaluation.
ForecastModel refit(const ForecastModel& chosen, const linalg::Matrix& X,
                    const linalg::Vector& y);

}  // namespace loadshift::forecast
