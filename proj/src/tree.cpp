#include "kirsf/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace kirsf {

StepFunction nelson_aalen(const NodeSample& sample) {
    if (sample.times.size() != sample.events.size())
        throw std::invalid_argument("nelson_aalen: times/events length mismatch");
    const std::size_t n = sample.size();
    if (n == 0) throw std::invalid_argument("nelson_aalen: empty sample");

    std::vector<std::pair<double, int>> obs(n);
    for (std::size_t i = 0; i < n; ++i) obs[i] = {sample.times[i], sample.events[i]};
    std::sort(obs.begin(), obs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::vector<double> knots, values;
    double cum = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        double deaths = 0.0;
        while (j < n && obs[j].first == obs[i].first) {
            deaths += obs[j].second;
            ++j;
        }
        if (deaths > 0.0) {
            cum += deaths / static_cast<double>(n - i);  // r_i = count with time >= t_i
            knots.push_back(obs[i].first);
            values.push_back(cum);
        }
        i = j;
    }
    return StepFunction(std::move(knots), std::move(values));
}

int TreeConfig::resolve_mtry(std::size_t p) const {
    if (p == 0) throw std::invalid_argument("resolve_mtry: zero features");
    if (mtry >= 1) return std::min<int>(mtry, static_cast<int>(p));
    return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(p))));
}

TreeNode TreeNode::terminal(StepFunction chf, int member_count) {
    TreeNode node;
    node.chf = std::move(chf);
    node.member_count = member_count;
    return node;
}

TreeNode TreeNode::internal(int feature_index, double threshold, TreeNode left, TreeNode right) {
    TreeNode node;
    node.feature_index = feature_index;
    node.threshold = threshold;
    node.left = std::make_unique<TreeNode>(std::move(left));
    node.right = std::make_unique<TreeNode>(std::move(right));
    return node;
}

namespace {

// Per-node survival bookkeeping shared by every candidate split: the node's
// distinct event times with total death/at-risk counts, and for each member
// the index of the largest event time <= its own time (-1 if none).
struct NodeSurvival {
    std::vector<double> times;   // per member
    std::vector<char> events;    // per member
    std::size_t n_events = 0;

    std::vector<double> event_times;  // distinct, ascending
    std::vector<double> total_d;      // deaths per event time
    std::vector<double> total_r;      // at risk per event time
    std::vector<int> member_j;        // last event-time index covered by each member

    // deviance pieces against the node's own Nelson-Aalen baseline
    std::vector<double> member_lambda;
    double sum_events = 0.0;
    double sum_lambda = 0.0;
    double sum_log_lambda = 0.0;  // over event members
    double own_deviance = 0.0;    // at the node's own theta-hat (which is 1)
};

NodeSurvival build_node_survival(const SurvivalDataset& data,
                                 std::span<const std::size_t> members, bool for_deviance) {
    NodeSurvival ns;
    const std::size_t m = members.size();
    ns.times.resize(m);
    ns.events.resize(m);
    for (std::size_t q = 0; q < m; ++q) {
        const auto& rec = data.records[members[q]];
        ns.times[q] = rec.time;
        ns.events[q] = static_cast<char>(rec.event);
        ns.n_events += static_cast<std::size_t>(rec.event);
    }

    for (std::size_t q = 0; q < m; ++q)
        if (ns.events[q]) ns.event_times.push_back(ns.times[q]);
    std::sort(ns.event_times.begin(), ns.event_times.end());
    ns.event_times.erase(std::unique(ns.event_times.begin(), ns.event_times.end()),
                         ns.event_times.end());
    const std::size_t T = ns.event_times.size();

    ns.member_j.resize(m);
    ns.total_d.assign(T, 0.0);
    std::vector<double> ends(T, 0.0);
    double covered = 0.0;  // members with j >= 0
    for (std::size_t q = 0; q < m; ++q) {
        auto it = std::upper_bound(ns.event_times.begin(), ns.event_times.end(), ns.times[q]);
        const int j = static_cast<int>(it - ns.event_times.begin()) - 1;
        ns.member_j[q] = j;
        if (j >= 0) {
            ends[static_cast<std::size_t>(j)] += 1.0;
            covered += 1.0;
        }
        if (ns.events[q]) ns.total_d[static_cast<std::size_t>(j)] += 1.0;
    }
    ns.total_r.resize(T);
    double r = covered;
    for (std::size_t k = 0; k < T; ++k) {
        ns.total_r[k] = r;
        r -= ends[k];
    }

    if (for_deviance) {
        // cumulative d/r gives the baseline values at the event times
        std::vector<double> cum(T);
        double acc = 0.0;
        for (std::size_t k = 0; k < T; ++k) {
            acc += ns.total_d[k] / ns.total_r[k];
            cum[k] = acc;
        }
        ns.member_lambda.resize(m);
        for (std::size_t q = 0; q < m; ++q) {
            const int j = ns.member_j[q];
            const double lam = j >= 0 ? cum[static_cast<std::size_t>(j)] : 0.0;
            ns.member_lambda[q] = lam;
            ns.sum_events += ns.events[q];
            ns.sum_lambda += lam;
            if (ns.events[q]) ns.sum_log_lambda += std::log(lam);
        }
        if (ns.sum_events > 0.0)
            ns.own_deviance = 2.0 * (-ns.sum_log_lambda -
                                     ns.sum_events * std::log(ns.sum_events / ns.sum_lambda));
    }
    return ns;
}

double closed_form_deviance(double e, double w, double s) {
    if (!(e > 0.0)) return 0.0;
    return 2.0 * (-s - e * std::log(e / w));
}

struct BestSplit {
    double score = 0.0;
    int feature = std::numeric_limits<int>::max();
    double threshold = std::numeric_limits<double>::infinity();
    bool found = false;

    void offer(double cand_score, int cand_feature, double cand_threshold) {
        if (!(cand_score > 0.0)) return;
        bool better = false;
        if (!found || cand_score > score) {
            better = true;
        } else if (cand_score == score) {
            if (cand_feature < feature ||
                (cand_feature == feature && cand_threshold < threshold))
                better = true;
        }
        if (better) {
            score = cand_score;
            feature = cand_feature;
            threshold = cand_threshold;
            found = true;
        }
    }
};

class TreeGrower {
public:
    TreeGrower(const SurvivalDataset& data, const TreeConfig& config, Rng& rng)
        : data_(data), config_(config), rng_(rng), p_(data.dim()),
          mtry_(config.resolve_mtry(data.dim())) {}

    TreeNode grow(std::vector<std::size_t> members, int depth) {
        const NodeSurvival ns =
            build_node_survival(data_, members, config_.split_rule == SplitRule::deviance);

        const bool stop = ns.n_events < static_cast<std::size_t>(config_.min_node_events) ||
                          members.size() < static_cast<std::size_t>(config_.min_node_size) ||
                          (config_.max_depth > 0 && depth >= config_.max_depth);
        if (!stop) {
            const BestSplit best = find_best_split(members, ns);
            if (best.found) {
                std::vector<std::size_t> left, right;
                for (std::size_t idx : members) {
                    if (data_.records[idx].covariates[static_cast<std::size_t>(best.feature)] <=
                        best.threshold)
                        left.push_back(idx);
                    else
                        right.push_back(idx);
                }
                members.clear();
                members.shrink_to_fit();
                TreeNode l = grow(std::move(left), depth + 1);
                TreeNode r = grow(std::move(right), depth + 1);
                return TreeNode::internal(best.feature, best.threshold, std::move(l), std::move(r));
            }
        }

        NodeSample sample;
        sample.times = ns.times;
        sample.events.assign(ns.events.begin(), ns.events.end());
        return TreeNode::terminal(nelson_aalen(sample), static_cast<int>(members.size()));
    }

private:
    BestSplit find_best_split(const std::vector<std::size_t>& members, const NodeSurvival& ns) {
        BestSplit best;
        const std::vector<int> features = sample_features();
        order_.resize(members.size());
        for (int f : features) {
            for (std::size_t q = 0; q < members.size(); ++q)
                order_[q] = {data_.records[members[q]].covariates[static_cast<std::size_t>(f)], q};
            std::sort(order_.begin(), order_.end());
            if (order_.front().first == order_.back().first) continue;  // constant feature
            if (config_.split_rule == SplitRule::logrank)
                sweep_logrank(ns, f, best);
            else
                sweep_deviance(ns, f, best);
        }
        return best;
    }

    std::vector<int> sample_features() {
        std::vector<int> feats(p_);
        std::iota(feats.begin(), feats.end(), 0);
        for (int i = 0; i < mtry_; ++i) {
            const auto j = static_cast<std::size_t>(i) +
                           static_cast<std::size_t>(rng_.bounded(p_ - static_cast<std::size_t>(i)));
            std::swap(feats[static_cast<std::size_t>(i)], feats[j]);
        }
        feats.resize(static_cast<std::size_t>(mtry_));
        return feats;
    }

    // Moves members into the left group one run of equal feature values at a
    // time; after each run the log-rank statistic for (left, rest) follows
    // from the per-event-time left counts. The arithmetic per event time
    // matches logrank_statistic term for term.
    void sweep_logrank(const NodeSurvival& ns, int feature, BestSplit& best) {
        const std::size_t m = order_.size();
        const std::size_t T = ns.event_times.size();
        left_d_.assign(T, 0.0);
        left_ends_.assign(T, 0.0);
        double left_covered = 0.0;
        double left_events = 0.0;
        const double total_events = static_cast<double>(ns.n_events);

        std::size_t pos = 0;
        while (pos < m) {
            const double value = order_[pos].first;
            while (pos < m && order_[pos].first == value) {
                const std::size_t q = order_[pos].second;
                const int j = ns.member_j[q];
                if (j >= 0) {
                    left_ends_[static_cast<std::size_t>(j)] += 1.0;
                    left_covered += 1.0;
                }
                if (ns.events[q]) {
                    left_d_[static_cast<std::size_t>(j)] += 1.0;
                    left_events += 1.0;
                }
                ++pos;
            }
            if (pos == m) break;
            if (left_events < 1.0 || total_events - left_events < 1.0) continue;

            double num = 0.0, den = 0.0;
            double rl = left_covered;
            for (std::size_t k = 0; k < T; ++k) {
                if (rl <= 0.0) break;  // every later term is exactly zero
                const double d = ns.total_d[k];
                const double r = ns.total_r[k];
                const double dl = left_d_[k];
                num += dl - rl * (d / r);
                if (r > 1.0) den += (rl / r) * (1.0 - rl / r) * ((r - d) / (r - 1.0)) * d;
                rl -= left_ends_[k];
            }
            if (den > 0.0)
                best.offer(std::abs(num) / std::sqrt(den), feature,
                           pick_threshold(value, order_[pos].first));
        }
    }

    void sweep_deviance(const NodeSurvival& ns, int feature, BestSplit& best) {
        const std::size_t m = order_.size();
        double le = 0.0, lw = 0.0, ls = 0.0;

        std::size_t pos = 0;
        while (pos < m) {
            const double value = order_[pos].first;
            while (pos < m && order_[pos].first == value) {
                const std::size_t q = order_[pos].second;
                le += ns.events[q];
                lw += ns.member_lambda[q];
                if (ns.events[q]) ls += std::log(ns.member_lambda[q]);
                ++pos;
            }
            if (pos == m) break;
            const double re = ns.sum_events - le;
            const double rw = ns.sum_lambda - lw;
            const double rs = ns.sum_log_lambda - ls;
            const double reduction = ns.own_deviance - closed_form_deviance(le, lw, ls) -
                                     closed_form_deviance(re, rw, rs);
            best.offer(reduction, feature, pick_threshold(value, order_[pos].first));
        }
    }

    static double pick_threshold(double lo, double hi) {
        const double mid = std::midpoint(lo, hi);
        return mid < hi ? mid : lo;  // keep the <= convention separating the runs
    }

    const SurvivalDataset& data_;
    const TreeConfig& config_;
    Rng& rng_;
    std::size_t p_;
    int mtry_;

    std::vector<std::pair<double, std::size_t>> order_;
    std::vector<double> left_d_;
    std::vector<double> left_ends_;
};

}  // namespace

TreeNode grow_tree(const SurvivalDataset& data, std::span<const std::size_t> bag,
                   const TreeConfig& config, Rng& rng) {
    if (bag.empty()) throw std::invalid_argument("grow_tree: empty bag");
    if (data.dim() == 0) throw std::invalid_argument("grow_tree: dataset has no features");
    bool has_event = false;
    for (std::size_t idx : bag) {
        if (idx >= data.size()) throw std::invalid_argument("grow_tree: bag index out of range");
        has_event = has_event || data.records[idx].event == 1;
    }
    if (!has_event) throw std::invalid_argument("grow_tree: bag contains no event");

    TreeGrower grower(data, config, rng);
    return grower.grow(std::vector<std::size_t>(bag.begin(), bag.end()), 0);
}

const StepFunction& tree_chf(const TreeNode& tree, std::span<const double> x) {
    const TreeNode* node = &tree;
    while (!node->is_terminal()) {
        const auto f = static_cast<std::size_t>(node->feature_index);
        if (f >= x.size())
            throw std::runtime_error("tree_chf: expected dimension > " + std::to_string(f) +
                                     ", got " + std::to_string(x.size()));
        node = x[f] <= node->threshold ? node->left.get() : node->right.get();
    }
    return node->chf;
}

}  // namespace kirsf
