#pragma once

#include <memory>
#include <span>
#include <vector>

#include "kirsf/dataset.hpp"
#include "kirsf/rng.hpp"
#include "kirsf/splitrules.hpp"
#include "kirsf/step_function.hpp"

namespace kirsf {

// Nelson-Aalen estimator: knots are the distinct event times, value at the
// k-th knot is sum_{i<=k} d_i / r_i. All-censored samples give the zero
// function.
StepFunction nelson_aalen(const NodeSample& sample);

struct TreeConfig {
    int mtry = 0;             // features tried per node; 0 = ceil(sqrt(p))
    int min_node_events = 3;  // nodes with fewer events become terminal
    int min_node_size = 3;    // nodes with fewer members become terminal
    SplitRule split_rule = SplitRule::logrank;
    int max_depth = 0;        // 0 = unlimited

    int resolve_mtry(std::size_t p) const;  // applies the default and clamps to p
};

// Binary survival tree node. Internal nodes carry (feature, threshold) with
// the <= convention routing left; terminals carry the Nelson-Aalen CHF of
// their members (bootstrap multiplicity included).
struct TreeNode {
    int feature_index = -1;  // < 0 marks a terminal
    double threshold = 0.0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;

    StepFunction chf;
    int member_count = 0;

    bool is_terminal() const { return feature_index < 0; }

    static TreeNode terminal(StepFunction chf, int member_count);
    static TreeNode internal(int feature_index, double threshold, TreeNode left, TreeNode right);
};

// Grows one tree on the bootstrap bag (row indices with multiplicity).
// Requires a nonempty bag with at least one event.
TreeNode grow_tree(const SurvivalDataset& data, std::span<const std::size_t> bag,
                   const TreeConfig& config, Rng& rng);

// Routes x to its terminal node and returns that node's CHF.
const StepFunction& tree_chf(const TreeNode& tree, std::span<const double> x);

}  // namespace kirsf
