#include "kirsf/splitrules.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "kirsf/tree.hpp"

namespace kirsf {

std::string to_string(SplitRule rule) {
    return rule == SplitRule::logrank ? "logrank" : "deviance";
}

SplitRule split_rule_from_string(const std::string& name) {
    if (name == "logrank") return SplitRule::logrank;
    if (name == "deviance") return SplitRule::deviance;
    throw std::runtime_error("unknown split rule '" + name + "' (valid: logrank, deviance)");
}

std::size_t NodeSample::event_count() const {
    std::size_t n = 0;
    for (int e : events) n += static_cast<std::size_t>(e);
    return n;
}

namespace {

void check_sample(const NodeSample& s, const char* who) {
    if (s.times.size() != s.events.size())
        throw std::invalid_argument(std::string(who) + ": times/events length mismatch");
    for (std::size_t i = 0; i < s.times.size(); ++i) {
        if (!std::isfinite(s.times[i]) || s.times[i] < 0)
            throw std::invalid_argument(std::string(who) + ": invalid time");
        if (s.events[i] != 0 && s.events[i] != 1)
            throw std::invalid_argument(std::string(who) + ": event outside {0,1}");
    }
}

// count of entries in ascending `sorted` that are >= t
double at_risk(const std::vector<double>& sorted, double t) {
    auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
    return static_cast<double>(sorted.end() - it);
}

}  // namespace

double logrank_statistic(const NodeSample& left, const NodeSample& right) {
    check_sample(left, "logrank_statistic(left)");
    check_sample(right, "logrank_statistic(right)");
    if (left.size() == 0 || right.size() == 0)
        throw std::invalid_argument("logrank_statistic: empty group");
    if (left.event_count() + right.event_count() == 0)
        throw std::invalid_argument("logrank_statistic: no event in combined sample");

    std::vector<double> event_times;
    for (std::size_t i = 0; i < left.size(); ++i)
        if (left.events[i]) event_times.push_back(left.times[i]);
    for (std::size_t i = 0; i < right.size(); ++i)
        if (right.events[i]) event_times.push_back(right.times[i]);
    std::sort(event_times.begin(), event_times.end());
    event_times.erase(std::unique(event_times.begin(), event_times.end()), event_times.end());

    std::vector<double> left_sorted = left.times;
    std::sort(left_sorted.begin(), left_sorted.end());
    std::vector<double> all_sorted = left_sorted;
    all_sorted.insert(all_sorted.end(), right.times.begin(), right.times.end());
    std::sort(all_sorted.begin(), all_sorted.end());

    double num = 0.0;
    double den = 0.0;
    for (double t : event_times) {
        double d = 0.0, dl = 0.0;
        for (std::size_t i = 0; i < left.size(); ++i)
            if (left.events[i] && left.times[i] == t) {
                d += 1.0;
                dl += 1.0;
            }
        for (std::size_t i = 0; i < right.size(); ++i)
            if (right.events[i] && right.times[i] == t) d += 1.0;
        const double r = at_risk(all_sorted, t);
        const double rl = at_risk(left_sorted, t);
        num += dl - rl * (d / r);
        if (r > 1.0) den += (rl / r) * (1.0 - rl / r) * ((r - d) / (r - 1.0)) * d;
    }
    if (den <= 0.0) return 0.0;
    return std::abs(num) / std::sqrt(den);
}

StepFunction estimate_baseline_chf(const NodeSample& sample) {
    check_sample(sample, "estimate_baseline_chf");
    if (sample.size() == 0) throw std::invalid_argument("estimate_baseline_chf: empty sample");
    return nelson_aalen(sample);
}

double estimate_theta(const NodeSample& sample, const StepFunction& baseline) {
    check_sample(sample, "estimate_theta");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        num += sample.events[i];
        den += baseline(sample.times[i]);
    }
    if (den <= 0.0) {
        if (num == 0.0) return 0.0;
        throw std::runtime_error("estimate_theta: zero cumulative baseline with events present");
    }
    return num / den;
}

double node_deviance(const NodeSample& sample, const StepFunction& baseline, double theta) {
    check_sample(sample, "node_deviance");
    if (!(theta >= 0.0)) throw std::invalid_argument("node_deviance: theta must be >= 0");
    double total = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double lam = baseline(sample.times[i]);
        if (sample.events[i]) {
            if (!(lam > 0.0)) continue;  // term skipped
            total += 2.0 * (std::log(1.0 / (lam * theta)) - (1.0 - lam * theta));
        } else {
            total += 2.0 * (lam * theta);
        }
    }
    return total;
}

double deviance_reduction(const NodeSample& parent, const NodeSample& left,
                          const NodeSample& right) {
    if (left.size() == 0 || right.size() == 0)
        throw std::invalid_argument("deviance_reduction: children must be nonempty");
    if (left.size() + right.size() != parent.size())
        throw std::invalid_argument("deviance_reduction: children do not partition the parent");

    const StepFunction baseline = estimate_baseline_chf(parent);
    const double d_parent = node_deviance(parent, baseline, estimate_theta(parent, baseline));
    const double d_left = node_deviance(left, baseline, estimate_theta(left, baseline));
    const double d_right = node_deviance(right, baseline, estimate_theta(right, baseline));
    return d_parent - d_left - d_right;
}

}  // namespace kirsf
