#include "doctest.h"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

#include "helpers.hpp"
#include "loadshift/forecast.hpp"
#include "loadshift/util.hpp"

using namespace loadshift;
using namespace loadshift::forecast;

namespace {

linalg::Matrix random_matrix(Eigen::Index rows, Eigen::Index cols,
                             std::uint64_t seed) {
    linalg::Matrix m(rows, cols);
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = util::normal01(rng);
    return m;
}

linalg::Vector random_vector(Eigen::Index n, std::uint64_t seed) {
    linalg::Vector v(n);
    std::mt19937_64 rng(seed);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = util::normal01(rng);
    return v;
}

// Matrix with orthonormal columns (Q factor of a random matrix).
linalg::Matrix orthonormal_columns(Eigen::Index rows, Eigen::Index cols,
                                   std::uint64_t seed) {
    const linalg::Matrix a = random_matrix(rows, cols, seed);
    return Eigen::HouseholderQR<linalg::Matrix>(a).householderQ() *
           linalg::Matrix::Identity(rows, cols);
}

double max_abs_diff(const linalg::Vector& a, const linalg::Vector& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

CVConfig small_cv() {
    CVConfig cv;
    cv.folds = 4;
    cv.lambda_grid = {0.0, 0.1, 1.0, 10.0};
    cv.knn_grid = {1, 3, 5};
    cv.svr_c = {10.0};
    cv.svr_gamma = {0.5};
    cv.svr_eps = {0.05};
    cv.tree_depths = {1, 2, 4};
    cv.tree_min_samples = 4;
    return cv;
}

}  // namespace

TEST_CASE("time_blocks cuts rows into forward-chained folds") {
    const auto blocks = time_blocks(13, 5);
    REQUIRE(blocks.size() == 6);
    CHECK(blocks.front() == std::pair<std::size_t, std::size_t>{0, 3});
    CHECK(blocks.back() == std::pair<std::size_t, std::size_t>{11, 13});
    std::size_t covered = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        CHECK(blocks[b].first == covered);
        CHECK(blocks[b].second > blocks[b].first);
        covered = blocks[b].second;
    }
    CHECK(covered == 13);
    CHECK_THROWS_AS(time_blocks(5, 5), std::invalid_argument);
    CHECK_THROWS_AS(time_blocks(10, 0), std::invalid_argument);
}

TEST_CASE("ols fits exactly on well-posed designs") {
    SUBCASE("identity design returns the targets") {
        const linalg::Matrix X = linalg::Matrix::Identity(10, 10);
        const linalg::Vector y = random_vector(10, 1);
        const ForecastModel m = fit_ols(X, y, 7);
        CHECK(max_abs_diff(m.predict(X), y) < 1e-12);
        CHECK(m.cv_record().chosen == "none");
        CHECK(m.schema_hash() == 7);
    }
    SUBCASE("noiseless linear data is recovered") {
        const linalg::Matrix X = random_matrix(100, 8, 2);
        const linalg::Vector beta = random_vector(8, 3);
        const linalg::Vector y = X * beta;
        const ForecastModel m = fit_ols(X, y, 0);
        const linalg::Matrix Xq = random_matrix(20, 8, 4);
        CHECK(max_abs_diff(m.predict(Xq), Xq * beta) < 1e-8);
    }
    SUBCASE("residuals are orthogonal to the columns") {
        const linalg::Matrix X = random_matrix(60, 5, 5);
        const linalg::Vector y = random_vector(60, 6);
        const ForecastModel m = fit_ols(X, y, 0);
        const linalg::Vector resid = y - m.predict(X);
        CHECK((X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8);
    }
    SUBCASE("rank-deficient design still solves") {
        linalg::Matrix X = random_matrix(40, 4, 7);
        X.conservativeResize(Eigen::NoChange, 5);
        X.col(4) = X.col(0);  // duplicate column
        const linalg::Vector y = random_vector(40, 8);
        const ForecastModel m = fit_ols(X, y, 0);
        const linalg::Vector resid = y - m.predict(X);
        CHECK((X.transpose() * resid).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("ridge_solve obeys closed-form identities") {
    SUBCASE("identity design halves the targets at lambda 1") {
        const linalg::Matrix X = linalg::Matrix::Identity(8, 8);
        const linalg::Vector y = random_vector(8, 11);
        const linalg::Vector b = ridge_solve(X, y, 1.0);
        CHECK(max_abs_diff(b, y / 2.0) < 1e-12);
    }
    SUBCASE("lambda 0 equals least squares on full-rank designs") {
        const linalg::Matrix X = random_matrix(50, 6, 12);
        const linalg::Vector y = random_vector(50, 13);
        const linalg::Vector b0 = ridge_solve(X, y, 0.0);
        const linalg::Vector bls = linalg::solve_least_squares(X, y);
        CHECK(max_abs_diff(b0, bls) < 1e-8);
    }
    SUBCASE("coefficient norm shrinks as lambda grows") {
        const linalg::Matrix X = random_matrix(50, 6, 14);
        const linalg::Vector y = random_vector(50, 15);
        double prev = ridge_solve(X, y, 0.0).norm();
        for (double lambda : {0.1, 1.0, 10.0, 100.0}) {
            const double cur = ridge_solve(X, y, lambda).norm();
            CHECK(cur <= prev + 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("lasso coordinate descent matches soft-threshold identities") {
    SUBCASE("lambda at the max inner product zeroes every coefficient") {
        const linalg::Matrix X = random_matrix(40, 5, 21);
        const linalg::Vector y = random_vector(40, 22);
        const double lam = (X.transpose() * y).cwiseAbs().maxCoeff();
        CHECK(lasso_solve(X, y, lam).cwiseAbs().maxCoeff() == 0.0);
        CHECK(lasso_solve(X, y, lam * 1.01).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("lambda 0 approaches least squares") {
        const linalg::Matrix X = random_matrix(40, 5, 23);
        const linalg::Vector y = random_vector(40, 24);
        const linalg::Vector ols = linalg::solve_least_squares(X, y);
        CHECK(max_abs_diff(lasso_solve(X, y, 0.0), ols) < 1e-5);
    }
    SUBCASE("orthonormal design soft-thresholds each coordinate") {
        const linalg::Matrix X = orthonormal_columns(40, 5, 25);
        const linalg::Vector y = random_vector(40, 26);
        const linalg::Vector xty = X.transpose() * y;
        for (double lam : {0.05, 0.2, 0.5, 1.0}) {
            const linalg::Vector b = lasso_solve(X, y, lam);
            for (Eigen::Index j = 0; j < 5; ++j) {
                const double expect =
                    std::abs(xty(j)) > lam
                        ? (xty(j) > 0 ? xty(j) - lam : xty(j) + lam)
                        : 0.0;
                CHECK(b(j) == doctest::Approx(expect).epsilon(1e-8));
            }
        }
    }
    SUBCASE("support shrinks monotonically on orthonormal designs") {
        const linalg::Matrix X = orthonormal_columns(60, 8, 27);
        const linalg::Vector y = random_vector(60, 28);
        int prev = 9;
        for (double lam : {0.0, 0.1, 0.3, 0.8, 2.0}) {
            const linalg::Vector b = lasso_solve(X, y, lam);
            const int nz = static_cast<int>((b.cwiseAbs().array() > 0.0).count());
            CHECK(nz <= prev);
            prev = nz;
        }
    }
}

TEST_CASE("knn averages the nearest training rows") {
    linalg::Matrix X(3, 2);
    X << 0, 0, 1, 0, 10, 10;
    linalg::Vector y(3);
    y << 1, 2, 100;

    SUBCASE("k=1 on its own rows returns the targets") {
        CHECK(max_abs_diff(knn_predict(X, y, 1, X), y) == 0.0);
    }
    SUBCASE("k=n returns the global mean everywhere") {
        linalg::Matrix q(2, 2);
        q << -5, 3, 42, 0;
        const linalg::Vector pred = knn_predict(X, y, 3, q);
        CHECK(pred(0) == doctest::Approx(103.0 / 3));
        CHECK(pred(1) == doctest::Approx(103.0 / 3));
    }
    SUBCASE("k=2 averages the two closest") {
        linalg::Matrix q(1, 2);
        q << 0.4, 0.0;
        CHECK(knn_predict(X, y, 2, q)(0) == 1.5);
    }
    SUBCASE("distance ties resolve to the earlier row") {
        linalg::Matrix T(2, 1);
        T << 1, -1;
        linalg::Vector ty(2);
        ty << 5, 7;
        linalg::Matrix q(1, 1);
        q << 0;
        CHECK(knn_predict(T, ty, 1, q)(0) == 5.0);
    }
    SUBCASE("k outside [1, n] is rejected") {
        CHECK_THROWS_AS(knn_predict(X, y, 0, X), std::invalid_argument);
        CHECK_THROWS_AS(knn_predict(X, y, 4, X), std::invalid_argument);
    }
}

TEST_CASE("svr respects the tube and the box") {
    SUBCASE("targets inside the tube need no support vectors") {
        const linalg::Matrix X = random_matrix(30, 2, 31);
        const linalg::Vector y = linalg::Vector::Constant(30, 3.0);
        SvrConfig cfg;
        cfg.c = 10.0;
        cfg.gamma = 0.5;
        cfg.eps = 0.5;
        const SvrModel m = svr_fit(X, y, cfg);
        CHECK(m.n_support == 0);
        const linalg::Vector pred = svr_predict(m, X);
        for (Eigen::Index i = 0; i < pred.size(); ++i)
            CHECK(std::abs(pred(i) - 3.0) <= 0.5 + cfg.tol);
    }
    SUBCASE("smooth signal is tracked within tube plus tolerance") {
        const Eigen::Index n = 80;
        linalg::Matrix X(n, 1);
        linalg::Vector y(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = 2.0 * M_PI * static_cast<double>(i) / (n - 1);
            X(i, 0) = x;
            y(i) = std::sin(x);
        }
        SvrConfig cfg;
        cfg.c = 50.0;
        cfg.gamma = 1.0;
        cfg.eps = 0.05;
        const SvrModel m = svr_fit(X, y, cfg);
        const linalg::Vector pred = svr_predict(m, X);
        CHECK((pred - y).cwiseAbs().maxCoeff() < 0.15);
        // Dual coefficients stay inside the box.
        CHECK(m.coefficients.cwiseAbs().maxCoeff() <= cfg.c + 1e-12);
        CHECK(m.n_support == static_cast<std::size_t>(m.support_vectors.rows()));
    }
}

TEST_CASE("cart splits greedily with documented tie rules") {
    SUBCASE("constant outcome yields a single leaf") {
        const linalg::Matrix X = random_matrix(20, 3, 41);
        const linalg::Vector y = linalg::Vector::Constant(20, 2.5);
        const TreeModel t = tree_fit(X, y, 5, 2);
        REQUIRE(t.nodes.size() == 1);
        CHECK(t.nodes[0].feature == -1);
        CHECK(t.nodes[0].prediction == 2.5);
    }
    SUBCASE("depth-1 step function splits at the midpoint") {
        linalg::Matrix X(10, 1);
        linalg::Vector y(10);
        for (int i = 0; i < 10; ++i) {
            X(i, 0) = i;
            y(i) = i < 5 ? 0.0 : 1.0;
        }
        const TreeModel t = tree_fit(X, y, 1, 2);
        REQUIRE(t.nodes.size() == 3);
        CHECK(t.nodes[0].feature == 0);
        CHECK(t.nodes[0].threshold == 4.5);
        const linalg::Vector pred = tree_predict(t, X);
        for (int i = 0; i < 10; ++i) CHECK(pred(i) == (i < 5 ? 0.0 : 1.0));
    }
    SUBCASE("feature ties prefer the lower index, cuts the lower threshold") {
        linalg::Matrix X(4, 2);
        X << 0, 0, 1, 1, 2, 2, 3, 3;  // identical columns
        linalg::Vector y(4);
        y << 0, 1, 1, 0;  // cuts at 0.5 and 2.5 tie
        const TreeModel t = tree_fit(X, y, 1, 2);
        CHECK(t.nodes[0].feature == 0);
        CHECK(t.nodes[0].threshold == 0.5);
    }
    SUBCASE("leaf predictions equal the mean of the rows they receive") {
        const linalg::Matrix X = random_matrix(120, 4, 43);
        const linalg::Vector y = random_vector(120, 44);
        const TreeModel t = tree_fit(X, y, 3, 5);
        std::map<int, std::vector<double>> leaf_rows;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
            int node = 0;
            while (t.nodes[static_cast<std::size_t>(node)].feature >= 0) {
                const TreeNode& nd = t.nodes[static_cast<std::size_t>(node)];
                node = X(i, nd.feature) <= nd.threshold ? nd.left : nd.right;
            }
            leaf_rows[node].push_back(y(i));
        }
        CHECK(leaf_rows.size() > 1);
        for (const auto& [node, rows] : leaf_rows) {
            CHECK(t.nodes[static_cast<std::size_t>(node)].n_samples == rows.size());
            CHECK(t.nodes[static_cast<std::size_t>(node)].prediction ==
                  doctest::Approx(util::mean(rows)).epsilon(1e-12));
        }
    }
    SUBCASE("depth truncation predicts like a shallower fit") {
        const linalg::Matrix X = random_matrix(200, 5, 45);
        const linalg::Vector y = random_vector(200, 46);
        const TreeModel deep = tree_fit(X, y, 6, 4);
        const TreeModel shallow = tree_fit(X, y, 2, 4);
        const linalg::Matrix q = random_matrix(50, 5, 47);
        CHECK(max_abs_diff(tree_predict(deep, q, 2), tree_predict(shallow, q)) ==
              0.0);
    }
    SUBCASE("exhaustive single-feature oracle agrees on eight points") {
        linalg::Matrix X(8, 1);
        linalg::Vector y(8);
        const double xs[8] = {0, 1, 2, 3, 4, 5, 6, 7};
        const double ys[8] = {1.0, 0.8, 2.4, 2.6, 2.5, 7.0, 7.2, 6.8};
        for (int i = 0; i < 8; ++i) {
            X(i, 0) = xs[i];
            y(i) = ys[i];
        }
        double best_cost = std::numeric_limits<double>::infinity();
        double best_cut = 0.0;
        for (int s = 1; s < 8; ++s) {
            double ml = 0, mr = 0;
            for (int i = 0; i < s; ++i) ml += ys[i];
            for (int i = s; i < 8; ++i) mr += ys[i];
            ml /= s;
            mr /= (8 - s);
            double cost = 0;
            for (int i = 0; i < s; ++i) cost += (ys[i] - ml) * (ys[i] - ml);
            for (int i = s; i < 8; ++i) cost += (ys[i] - mr) * (ys[i] - mr);
            if (cost < best_cost) {
                best_cost = cost;
                best_cut = (xs[s - 1] + xs[s]) / 2.0;
            }
        }
        const TreeModel t = tree_fit(X, y, 1, 2);
        CHECK(t.nodes[0].threshold == best_cut);
    }
}

TEST_CASE("cross-validated fits choose sensible hyperparameters") {
    // Noiseless linear signal: penalty-free candidates should win.
    const linalg::Matrix X = random_matrix(90, 4, 51);
    const linalg::Vector beta = random_vector(4, 52);
    const linalg::Vector y = X * beta;
    const CVConfig cv = small_cv();

    SUBCASE("ridge picks lambda 0 on noiseless linear data") {
        const ForecastModel m = fit_ridge(X, y, cv, 0);
        CHECK(std::get<LinearModel>(m.params()).lambda == 0.0);
        CHECK(m.cv_record().fold_mse.size() == 4);
        CHECK(m.cv_record().mean_mse < 1e-10);
    }
    SUBCASE("lasso picks lambda 0 on noiseless linear data") {
        const ForecastModel m = fit_lasso(X, y, cv, 0);
        CHECK(std::get<LinearModel>(m.params()).lambda == 0.0);
    }
    SUBCASE("knn records its chosen k") {
        const ForecastModel m = fit_knn(X, y, cv, 0);
        const int k = std::get<KnnModel>(m.params()).k;
        CHECK(k >= 1);
        CHECK(m.cv_record().chosen == "k=" + std::to_string(k));
    }
    SUBCASE("tree records its chosen depth") {
        const ForecastModel m = fit_tree(X, y, cv, 0);
        const TreeModel& t = std::get<TreeModel>(m.params());
        CHECK(t.max_depth >= 1);
        CHECK(m.cv_record().chosen == "max_depth=" + std::to_string(t.max_depth));
    }
    SUBCASE("fold errors are finite and as many as folds") {
        for (Method method : {Method::Ridge, Method::KNN, Method::Tree}) {
            const ForecastModel m = fit_method(method, X, y, cv, 0);
            REQUIRE(m.cv_record().fold_mse.size() == 4);
            for (double e : m.cv_record().fold_mse) CHECK(std::isfinite(e));
        }
    }
}

TEST_CASE("fit_with_holdout evaluates the tail then refits everything") {
    const linalg::Matrix X = random_matrix(120, 4, 61);
    const linalg::Vector beta = random_vector(4, 62);
    linalg::Vector y = X * beta;
    std::mt19937_64 rng(63);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.05 * util::normal01(rng);
    const CVConfig cv = small_cv();

    const HoldoutFit hf = fit_with_holdout(Method::OLS, X, y, cv, 0.2, 0);
    CHECK(hf.holdout_begin == 96);
    CHECK(hf.holdout_pred.size() == 24);

    // Holdout predictions come from a fit on the leading rows only.
    const ForecastModel head = fit_ols(X.topRows(96), y.head(96), 0);
    CHECK(max_abs_diff(hf.holdout_pred, head.predict(X.bottomRows(24))) < 1e-10);

    // The returned model saw every row.
    const ForecastModel full = fit_ols(X, y, 0);
    const linalg::Matrix q = random_matrix(10, 4, 64);
    CHECK(max_abs_diff(hf.model.predict(q), full.predict(q)) < 1e-10);

    SUBCASE("tiny holdout fraction still holds out one row") {
        const HoldoutFit one = fit_with_holdout(Method::OLS, X, y, cv, 0.001, 0);
        CHECK(one.holdout_begin == 119);
        CHECK(one.holdout_pred.size() == 1);
    }
}

TEST_CASE("models round trip through their checkpoint files") {
    const auto dir = testutil::test_dir("forecast_roundtrip");
    const linalg::Matrix X = random_matrix(60, 3, 71);
    const linalg::Vector beta = random_vector(3, 72);
    linalg::Vector y = X * beta;
    std::mt19937_64 rng(73);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.1 * util::normal01(rng);
    CVConfig cv = small_cv();
    cv.folds = 3;
    const linalg::Matrix q = random_matrix(15, 3, 74);

    for (Method method : {Method::OLS, Method::Lasso, Method::Ridge, Method::KNN,
                          Method::SVR, Method::Tree}) {
        CAPTURE(method_name(method));
        const ForecastModel m = fit_method(method, X, y, cv, 12345);
        const auto path = dir / ("model_" + method_name(method) + ".json");
        m.save(path);
        const ForecastModel back = ForecastModel::load(path);
        CHECK(back.method() == m.method());
        CHECK(back.schema_hash() == 12345);
        CHECK(back.cv_record().chosen == m.cv_record().chosen);
        CHECK(back.cv_record().fold_mse == m.cv_record().fold_mse);
        CHECK(max_abs_diff(back.predict(q), m.predict(q)) == 0.0);
    }
    CHECK_THROWS(ForecastModel::load(dir / "absent.json"));
}

TEST_CASE("method names round trip") {
    for (Method m : {Method::OLS, Method::Lasso, Method::Ridge, Method::KNN,
                     Method::SVR, Method::Tree}) {
        CHECK(method_from_name(method_name(m)) == m);
    }
    CHECK(!method_from_name("iso").has_value());  // handled outside this enum
    CHECK(!method_from_name("bogus").has_value());
}

TEST_CASE("fitting is deterministic") {
    const linalg::Matrix X = random_matrix(80, 4, 81);
    linalg::Vector y = X * random_vector(4, 82);
    std::mt19937_64 rng(83);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += 0.2 * util::normal01(rng);
    const CVConfig cv = small_cv();
    const linalg::Matrix q = random_matrix(12, 4, 84);

    for (Method method : {Method::Ridge, Method::KNN, Method::Tree}) {
        const ForecastModel a = fit_method(method, X, y, cv, 0);
        const ForecastModel b = fit_method(method, X, y, cv, 0);
        CHECK(a.cv_record().chosen == b.cv_record().chosen);
        CHECK(max_abs_diff(a.predict(q), b.predict(q)) == 0.0);
    }
}
