#pragma once

#include <cstddef>
#include <vector>

#include "loadshift/linalg.hpp"

namespace loadshift::forecast {

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double prediction = 0.0;  // node mean, kept for internal nodes too
    std::size_t n_samples = 0;
};

struct TreeModel {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    int max_depth = 0;
    int min_samples = 5;
};

// Greedy CART with MSE impurity and exhaustive midpoint split search.
// A node becomes a leaf at the depth limit, below min_samples, or when no
// split strictly reduces the summed child SSE. Ties prefer the lower feature
// index, then the lower threshold.
TreeModel tree_fit(const linalg::Matrix& X, const linalg::Vector& y, int max_depth,
                   int min_samples);

// depth_limit < 0 uses the full tree. A smaller limit predicts exactly like
// a tree grown with that max_depth, because greedy splits do not depend on
// the remaining depth budget.
double tree_predict_row(const TreeModel& model, const double* row,
                        Eigen::Index width, int depth_limit = -1);
linalg::Vector tree_predict(const TreeModel& model, const linalg::Matrix& X,
                            int depth_limit = -1);

}  // namespace loadshift::forecast
