#include "loadshift/tree.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace loadshift::forecast {

namespace {

struct BuildContext {
    const linalg::Matrix& X;
    const linalg::Vector& y;
    int max_depth;
    int min_samples;
    std::vector<TreeNode> nodes;
};

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double cost = std::numeric_limits<double>::infinity();  // SSE_l + SSE_r
};

double subset_mean(const BuildContext& ctx, const std::vector<std::size_t>& idx) {
    double s = 0.0;
    for (std::size_t i : idx) s += ctx.y(static_cast<Eigen::Index>(i));
    return s / static_cast<double>(idx.size());
}

double subset_sse(const BuildContext& ctx, const std::vector<std::size_t>& idx,
                  double mean) {
    double s = 0.0;
    for (std::size_t i : idx) {
        const double d = ctx.y(static_cast<Eigen::Index>(i)) - mean;
        s += d * d;
    }
    return s;
}

Split best_split(const BuildContext& ctx, const std::vector<std::size_t>& idx) {
    Split best;
    const std::size_t n = idx.size();
    std::vector<std::pair<double, double>> xy(n);  // (feature value, outcome)
    for (Eigen::Index j = 0; j < ctx.X.cols(); ++j) {
        for (std::size_t r = 0; r < n; ++r) {
            const Eigen::Index i = static_cast<Eigen::Index>(idx[r]);
            xy[r] = {ctx.X(i, j), ctx.y(i)};
        }
        std::sort(xy.begin(), xy.end());
        if (xy.front().first == xy.back().first) continue;  // constant feature

        // Prefix sums give left/right SSE at each cut in O(1):
        // SSE = sum(y^2) - sum(y)^2 / n.
        double sum_l = 0.0, sq_l = 0.0;
        double sum_total = 0.0, sq_total = 0.0;
        for (const auto& [xv, yv] : xy) {
            sum_total += yv;
            sq_total += yv * yv;
        }
        for (std::size_t s = 1; s < n; ++s) {
            sum_l += xy[s - 1].second;
            sq_l += xy[s - 1].second * xy[s - 1].second;
            if (xy[s].first == xy[s - 1].first) continue;  // not a boundary
            const double nl = static_cast<double>(s);
            const double nr = static_cast<double>(n - s);
            const double sse_l = sq_l - sum_l * sum_l / nl;
            const double sum_r = sum_total - sum_l;
            const double sse_r = (sq_total - sq_l) - sum_r * sum_r / nr;
            const double cost = sse_l + sse_r;
            if (cost < best.cost) {
                best.cost = cost;
                best.feature = static_cast<int>(j);
                best.threshold = xy[s - 1].first + (xy[s].first - xy[s - 1].first) / 2.0;
            }
        }
    }
    return best;
}

int build_node(BuildContext& ctx, std::vector<std::size_t> idx, int depth) {
    const int node_id = static_cast<int>(ctx.nodes.size());
    ctx.nodes.emplace_back();
    const double mean = subset_mean(ctx, idx);
    ctx.nodes[node_id].prediction = mean;
    ctx.nodes[node_id].n_samples = idx.size();

    if (depth >= ctx.max_depth ||
        idx.size() < static_cast<std::size_t>(ctx.min_samples)) {
        return node_id;
    }
    const double node_sse = subset_sse(ctx, idx, mean);
    if (node_sse <= 0.0) return node_id;  // pure node

    const Split split = best_split(ctx, idx);
    if (split.feature < 0 || !(split.cost < node_sse)) return node_id;

    std::vector<std::size_t> left_idx, right_idx;
    left_idx.reserve(idx.size());
    right_idx.reserve(idx.size());
    for (std::size_t i : idx) {
        if (ctx.X(static_cast<Eigen::Index>(i), split.feature) <= split.threshold) {
            left_idx.push_back(i);
        } else {
            right_idx.push_back(i);
        }
    }
    idx.clear();
    idx.shrink_to_fit();

    const int left = build_node(ctx, std::move(left_idx), depth + 1);
    const int right = build_node(ctx, std::move(right_idx), depth + 1);
    ctx.nodes[node_id].feature = split.feature;
    ctx.nodes[node_id].threshold = split.threshold;
    ctx.nodes[node_id].left = left;
    ctx.nodes[node_id].right = right;
    return node_id;
}

}  // namespace

TreeModel tree_fit(const linalg::Matrix& X, const linalg::Vector& y, int max_depth,
                   int min_samples) {
    if (X.rows() == 0 || X.rows() != y.size()) {
        throw std::invalid_argument("tree_fit: empty or mismatched input");
    }
    if (max_depth < 1 || min_samples < 2) {
        throw std::invalid_argument("tree_fit: need max_depth >= 1, min_samples >= 2");
    }
    BuildContext ctx{X, y, max_depth, min_samples, {}};
    std::vector<std::size_t> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), 0);
    build_node(ctx, std::move(idx), 0);

    TreeModel model;
    model.nodes = std::move(ctx.nodes);
    model.max_depth = max_depth;
    model.min_samples = min_samples;
    return model;
}

double tree_predict_row(const TreeModel& model, const double* row,
                        Eigen::Index width, int depth_limit) {
    int node = 0;
    int depth = 0;
    while (true) {
        const TreeNode& nd = model.nodes[static_cast<std::size_t>(node)];
        if (nd.feature < 0 || (depth_limit >= 0 && depth >= depth_limit)) {
            return nd.prediction;
        }
        if (nd.feature >= width) {
            throw std::invalid_argument("tree_predict: feature width mismatch");
        }
        node = row[nd.feature] <= nd.threshold ? nd.left : nd.right;
        ++depth;
    }
}

linalg::Vector tree_predict(const TreeModel& model, const linalg::Matrix& X,
                            int depth_limit) {
    linalg::Vector out(X.rows());
    std::vector<double> row(static_cast<std::size_t>(X.cols()));
    for (Eigen::Index r = 0; r < X.rows(); ++r) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) row[static_cast<std::size_t>(j)] = X(r, j);
        out(r) = tree_predict_row(model, row.data(), X.cols(), depth_limit);
    }
    return out;
}

}  // namespace loadshift::forecast
