#pragma once

#include <string>
#include <vector>

#include "kirsf/step_function.hpp"

namespace kirsf {

enum class SplitRule { logrank, deviance };

std::string to_string(SplitRule rule);
SplitRule split_rule_from_string(const std::string& name);

// The (time, event) pairs of the observations sitting in one tree node.
struct NodeSample {
    std::vector<double> times;
    std::vector<int> events;

    std::size_t size() const { return times.size(); }
    std::size_t event_count() const;
};

struct SplitCandidate {
    int feature_index = -1;
    double threshold = 0.0;
    double score = 0.0;
    SplitRule rule = SplitRule::logrank;
};

// Two-sample log-rank statistic with hypergeometric variance, in absolute
// value form: |sum_i (d_iL - r_iL d_i / r_i)| / sqrt(sum_i V_i) over the
// distinct event times of the combined sample. Zero variance gives 0.
double logrank_statistic(const NodeSample& left, const NodeSample& right);

// Nelson-Aalen on the given sample; the one-step baseline held fixed while
// scoring child splits of that node.
StepFunction estimate_baseline_chf(const NodeSample& sample);

// theta_hat = (sum_i delta_i) / (sum_i Lambda0(t_i))
double estimate_theta(const NodeSample& sample, const StepFunction& baseline);

// D = sum_i 2 { delta_i log(delta_i / (Lambda0(t_i) theta)) - (delta_i - Lambda0(t_i) theta) }
// with 0 log 0 = 0 for censored terms; event terms with Lambda0(t_i) = 0 are skipped.
double node_deviance(const NodeSample& sample, const StepFunction& baseline, double theta);

// D(parent) - D(left) - D(right), every node scored against the parent
// baseline with its own theta_hat. Non-negative up to roundoff.
double deviance_reduction(const NodeSample& parent, const NodeSample& left,
                          const NodeSample& right);

}  // namespace kirsf
