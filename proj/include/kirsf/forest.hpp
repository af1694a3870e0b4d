#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kirsf/dataset.hpp"
#include "kirsf/step_function.hpp"
#include "kirsf/tree.hpp"

namespace kirsf {

struct ForestConfig {
    int n_trees = 1000;
    TreeConfig tree;
    std::uint64_t seed = 0;
};

// Bagged ensemble of survival trees with in-bag bookkeeping. The event time
// grid holds the distinct training event times used to represent ensemble
// CHFs; training_times holds every training time (with multiplicity) for the
// mortality sum.
class SurvivalForest {
public:
    SurvivalForest() = default;  // empty until assigned from fit() or load()

    // Fits B trees on full-size bootstrap samples. Per-tree seeds are derived
    // from config.seed by counter, so any thread count reproduces the
    // sequential result bit for bit.
    static SurvivalForest fit(const SurvivalDataset& data, const ForestConfig& config,
                              unsigned n_threads = 0);

    StepFunction ensemble_chf(std::span<const double> x) const;

    // Average over exactly the trees where the record was out of bag.
    // Throws if the record was in bag everywhere.
    StepFunction oob_ensemble_chf(std::size_t train_index) const;
    bool has_oob(std::size_t train_index) const;

    // sum of chf over the grid points; the OOB ranking value when the grid
    // is event_time_grid()
    static double predicted_outcome(const StepFunction& chf, std::span<const double> grid);

    // ensemble mortality: sum of the ensemble CHF over all training times
    double ensemble_mortality(std::span<const double> x) const;

    const std::vector<TreeNode>& trees() const { return trees_; }
    const std::vector<std::vector<std::uint32_t>>& inbag_counts() const { return inbag_; }
    const std::vector<double>& event_time_grid() const { return event_time_grid_; }
    const std::vector<double>& training_times() const { return training_times_; }
    std::size_t feature_dim() const { return feature_dim_; }
    std::size_t n_trees() const { return trees_.size(); }
    std::size_t n_train() const { return inbag_.empty() ? 0 : inbag_.front().size(); }

    // Versioned self-describing JSON container; round-trips bit-exact.
    std::string save() const;
    static SurvivalForest load(const std::string& bytes);

private:
    std::vector<TreeNode> trees_;
    std::vector<std::vector<std::uint32_t>> inbag_;  // [tree][record]
    std::vector<double> event_time_grid_;
    std::vector<double> training_times_;
    Matrix training_covariates_;  // needed to route OOB records through trees
    std::size_t feature_dim_ = 0;
};

}  // namespace kirsf
