#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "kirsf/rng.hpp"
#include "kirsf/tree.hpp"
#include "test_util.hpp"

using namespace kirsf;

TEST_CASE("nelson_aalen hand examples") {
    {
        const auto chf = nelson_aalen({{1, 2, 3}, {1, 0, 1}});
        REQUIRE(chf.knots() == std::vector<double>{1.0, 3.0});
        CHECK(chf.values()[0] == 1.0 / 3.0);
        CHECK(chf.values()[1] == 1.0 / 3.0 + 1.0);
    }
    {
        const auto chf = nelson_aalen({{5, 7}, {0, 0}});
        CHECK(chf.is_zero());
        CHECK(chf(100.0) == 0.0);
    }
    {
        // tied deaths: d = 2 with r = 3 at t = 2, then 1/1 at t = 4
        const auto chf = nelson_aalen({{2, 2, 4}, {1, 1, 1}});
        REQUIRE(chf.knots() == std::vector<double>{2.0, 4.0});
        CHECK(chf.values()[0] == 2.0 / 3.0);
        CHECK(chf.values()[1] == 2.0 / 3.0 + 1.0);
    }
}

TEST_CASE("nelson_aalen is invariant to record order") {
    const auto a = nelson_aalen({{4, 1, 2, 2, 9}, {1, 0, 1, 1, 0}});
    const auto b = nelson_aalen({{9, 2, 2, 1, 4}, {0, 1, 1, 0, 1}});
    CHECK(a.knots() == b.knots());
    CHECK(a.values() == b.values());
}

TEST_CASE("nelson_aalen output is monotone with a positive first step") {
    Rng rng(41);
    for (int rep = 0; rep < 200; ++rep) {
        const auto sample = testutil::random_sample(rng, 1 + rng.bounded(20));
        const auto chf = nelson_aalen(sample);
        const auto& v = chf.values();
        for (std::size_t i = 1; i < v.size(); ++i) CHECK(v[i] >= v[i - 1]);
        if (sample.event_count() > 0) {
            REQUIRE(!v.empty());
            CHECK(v.front() > 0.0);
        } else {
            CHECK(chf.is_zero());
        }
    }
}

TEST_CASE("step function evaluation is right-continuous and zero before the first knot") {
    const StepFunction f({1.0, 3.0}, {0.25, 0.75});
    CHECK(f(0.999) == 0.0);
    CHECK(f(1.0) == 0.25);
    CHECK(f(2.999) == 0.25);
    CHECK(f(3.0) == 0.75);
    CHECK(f(100.0) == 0.75);
}

TEST_CASE("step function constructor enforces its invariants") {
    CHECK_THROWS(StepFunction({2.0, 1.0}, {0.1, 0.2}));  // knots not increasing
    CHECK_THROWS(StepFunction({1.0, 2.0}, {0.2, 0.1}));  // values decreasing
    CHECK_THROWS(StepFunction({1.0}, {0.1, 0.2}));       // length mismatch
    CHECK_THROWS(StepFunction({std::nan("")}, {0.1}));
}

TEST_CASE("identical covariates grow a single terminal") {
    SurvivalDataset data;
    data.feature_names = {"x"};
    for (int i = 0; i < 10; ++i)
        data.records.push_back({1.0 + i, i % 2, {3.5}});
    Rng rng(1);
    TreeConfig config;
    config.min_node_events = 1;
    config.min_node_size = 1;
    const auto tree = grow_tree(data, testutil::identity_bag(10), config, rng);
    CHECK(tree.is_terminal());
    CHECK(tree.member_count == 10);
}

TEST_CASE("a perfectly separating feature is chosen at the root") {
    // feature 0 separates a short-lived group from a long-lived one,
    // feature 1 is pure noise
    SurvivalDataset data;
    data.feature_names = {"sep", "noise"};
    Rng gen(77);
    for (int i = 0; i < 40; ++i) {
        const bool risky = i % 2 == 0;
        SurvivalRecord rec;
        rec.covariates = {risky ? 2.0 + gen.uniform01() : 0.0 + gen.uniform01(), gen.normal()};
        rec.time = risky ? 0.2 + gen.uniform01() : 5.0 + gen.uniform01();
        rec.event = 1;
        data.records.push_back(std::move(rec));
    }
    Rng rng(2);
    TreeConfig config;
    config.min_node_events = 1;
    config.min_node_size = 1;
    config.mtry = 2;
    const auto tree = grow_tree(data, testutil::identity_bag(40), config, rng);
    REQUIRE(!tree.is_terminal());
    CHECK(tree.feature_index == 0);
    CHECK(tree.threshold > 1.0);
    CHECK(tree.threshold < 2.0);
    // the two children carry different hazards (knots live on disjoint time ranges)
    const auto& left = tree_chf(tree, std::vector<double>{0.5, 0.0});
    const auto& right = tree_chf(tree, std::vector<double>{2.5, 0.0});
    CHECK(left != right);
    CHECK(right(2.0) > left(2.0));  // the risky group has hazard mass before t = 2
}

TEST_CASE("tree growth is deterministic under a fixed seed") {
    Rng data_rng(55);
    const auto data = testutil::random_dataset(data_rng, 30, 3);
    TreeConfig config;
    Rng rng_a(99), rng_b(99);
    const auto a = grow_tree(data, testutil::identity_bag(30), config, rng_a);
    const auto b = grow_tree(data, testutil::identity_bag(30), config, rng_b);
    CHECK(testutil::tree_equal(a, b));
}

TEST_CASE("with mtry = p the tree does not depend on the rng at all") {
    Rng data_rng(56);
    const auto data = testutil::random_dataset(data_rng, 25, 4);
    TreeConfig config;
    config.mtry = 4;
    Rng rng_a(1), rng_b(123456789);
    const auto a = grow_tree(data, testutil::identity_bag(25), config, rng_a);
    const auto b = grow_tree(data, testutil::identity_bag(25), config, rng_b);
    CHECK(testutil::tree_equal(a, b));
}

TEST_CASE("single-terminal tree routes everything to the root CHF") {
    SurvivalDataset data;
    data.feature_names = {"x"};
    data.records = {{1.0, 1, {0.0}}, {2.0, 1, {0.0}}};
    Rng rng(3);
    TreeConfig config;
    const auto tree = grow_tree(data, testutil::identity_bag(2), config, rng);
    REQUIRE(tree.is_terminal());
    CHECK(tree_chf(tree, std::vector<double>{123.0}).values() == tree.chf.values());
}

TEST_CASE("routing sends threshold equality to the left child") {
    auto left = TreeNode::terminal(StepFunction({1.0}, {0.5}), 1);
    auto right = TreeNode::terminal(StepFunction({1.0}, {2.0}), 1);
    const auto tree = TreeNode::internal(0, 1.5, std::move(left), std::move(right));
    CHECK(tree_chf(tree, std::vector<double>{1.5})(1.0) == 0.5);   // exactly at threshold
    CHECK(tree_chf(tree, std::vector<double>{1.50001})(1.0) == 2.0);
}

TEST_CASE("hand-built two-leaf tree returns each leaf's own CHF") {
    const StepFunction f({1.0}, {0.25});
    const StepFunction g({2.0}, {0.75});
    const auto tree = TreeNode::internal(1, 0.0, TreeNode::terminal(f, 3), TreeNode::terminal(g, 4));
    CHECK(tree_chf(tree, std::vector<double>{9.0, -1.0}).knots() == f.knots());
    CHECK(tree_chf(tree, std::vector<double>{9.0, 1.0}).knots() == g.knots());
}

TEST_CASE("tree_chf rejects vectors that are too short") {
    const auto tree = TreeNode::internal(2, 0.0, TreeNode::terminal(StepFunction(), 1),
                                         TreeNode::terminal(StepFunction(), 1));
    CHECK_THROWS(tree_chf(tree, std::vector<double>{1.0, 2.0}));
}

TEST_CASE("grow_tree preconditions") {
    Rng data_rng(57);
    auto data = testutil::random_dataset(data_rng, 5, 2);
    Rng rng(4);
    TreeConfig config;
    CHECK_THROWS(grow_tree(data, std::vector<std::size_t>{}, config, rng));
    for (auto& rec : data.records) rec.event = 0;
    CHECK_THROWS(grow_tree(data, testutil::identity_bag(5), config, rng));
}

TEST_CASE("bag members land in terminals with at least one member") {
    Rng data_rng(58);
    const auto data = testutil::random_dataset(data_rng, 40, 3);
    Rng rng(5);
    std::vector<std::size_t> bag;
    for (int i = 0; i < 40; ++i) bag.push_back(rng.bounded(40));
    if (![&] {
            for (auto i : bag)
                if (data.records[i].event) return true;
            return false;
        }())
        bag[0] = 0;
    TreeConfig config;
    config.min_node_events = 1;
    config.min_node_size = 1;
    const auto tree = grow_tree(data, bag, config, rng);
    for (std::size_t idx : bag) {
        const auto& chf = tree_chf(tree, data.records[idx].covariates);
        (void)chf;
        const TreeNode* node = &tree;
        while (!node->is_terminal())
            node = data.records[idx].covariates[node->feature_index] <= node->threshold
                       ? node->left.get()
                       : node->right.get();
        CHECK(node->member_count >= 1);
    }
}

namespace {

struct BruteSplit {
    double score = 0.0;
    int feature = std::numeric_limits<int>::max();
    double threshold = std::numeric_limits<double>::infinity();
    bool found = false;
};

// exhaustive search over midpoints with the public scoring functions,
// replicating the lowest-feature / smallest-threshold tie break
BruteSplit brute_force_best_split_of(const SurvivalDataset& data,
                                     const std::vector<std::size_t>& members, SplitRule rule) {
    BruteSplit best;
    NodeSample parent;
    for (std::size_t idx : members) {
        parent.times.push_back(data.records[idx].time);
        parent.events.push_back(data.records[idx].event);
    }
    for (std::size_t f = 0; f < data.dim(); ++f) {
        std::vector<double> values;
        for (std::size_t idx : members) values.push_back(data.records[idx].covariates[f]);
        std::vector<double> sorted = values;
        std::sort(sorted.begin(), sorted.end());
        sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
        for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
            double thr = std::midpoint(sorted[k], sorted[k + 1]);
            if (thr >= sorted[k + 1]) thr = sorted[k];
            NodeSample left, right;
            for (std::size_t i = 0; i < members.size(); ++i) {
                auto& side = values[i] <= thr ? left : right;
                side.times.push_back(parent.times[i]);
                side.events.push_back(parent.events[i]);
            }
            if (left.size() == 0 || right.size() == 0) continue;
            double score = 0.0;
            if (rule == SplitRule::logrank) {
                if (left.event_count() == 0 || right.event_count() == 0) continue;
                score = logrank_statistic(left, right);
            } else {
                score = deviance_reduction(parent, left, right);
            }
            if (!(score > 0.0)) continue;
            const bool better =
                !best.found || score > best.score ||
                (score == best.score &&
                 (static_cast<int>(f) < best.feature ||
                  (static_cast<int>(f) == best.feature && thr < best.threshold)));
            if (better) best = {score, static_cast<int>(f), thr, true};
        }
    }
    return best;
}

BruteSplit brute_force_best_split(const SurvivalDataset& data, SplitRule rule) {
    return brute_force_best_split_of(data, testutil::identity_bag(data.size()), rule);
}

// reference grower assembled from the public pieces only
TreeNode naive_grow(const SurvivalDataset& data, const std::vector<std::size_t>& members,
                    const TreeConfig& config, int depth) {
    NodeSample sample;
    for (std::size_t idx : members) {
        sample.times.push_back(data.records[idx].time);
        sample.events.push_back(data.records[idx].event);
    }
    const bool stop = sample.event_count() < static_cast<std::size_t>(config.min_node_events) ||
                      members.size() < static_cast<std::size_t>(config.min_node_size) ||
                      (config.max_depth > 0 && depth >= config.max_depth);
    if (!stop) {
        const auto best = brute_force_best_split_of(data, members, config.split_rule);
        if (best.found) {
            std::vector<std::size_t> left, right;
            for (std::size_t idx : members) {
                auto& side =
                    data.records[idx].covariates[static_cast<std::size_t>(best.feature)] <=
                            best.threshold
                        ? left
                        : right;
                side.push_back(idx);
            }
            return TreeNode::internal(best.feature, best.threshold,
                                      naive_grow(data, left, config, depth + 1),
                                      naive_grow(data, right, config, depth + 1));
        }
    }
    return TreeNode::terminal(nelson_aalen(sample), static_cast<int>(members.size()));
}

}  // namespace

TEST_CASE("the grower's log-rank split agrees with brute-force search at the root") {
    Rng data_rng(60);
    for (int rep = 0; rep < 40; ++rep) {
        const auto data = testutil::random_dataset(data_rng, 12 + data_rng.bounded(10), 3);
        const auto brute = brute_force_best_split(data, SplitRule::logrank);

        TreeConfig config;
        config.mtry = 3;  // all features, so the rng cannot hide candidates
        config.min_node_events = 1;
        config.min_node_size = 1;
        config.max_depth = 1;  // stop right below the root
        Rng rng(rep);
        const auto tree = grow_tree(data, testutil::identity_bag(data.size()), config, rng);
        if (!brute.found) {
            CHECK(tree.is_terminal());
            continue;
        }
        REQUIRE(!tree.is_terminal());
        CHECK(tree.feature_index == brute.feature);
        CHECK(tree.threshold == brute.threshold);
    }
}

TEST_CASE("the grower's deviance split agrees with brute-force search at the root") {
    Rng data_rng(61);
    for (int rep = 0; rep < 40; ++rep) {
        const auto data = testutil::random_dataset(data_rng, 12 + data_rng.bounded(10), 3);
        const auto brute = brute_force_best_split(data, SplitRule::deviance);

        TreeConfig config;
        config.split_rule = SplitRule::deviance;
        config.mtry = 3;
        config.min_node_events = 1;
        config.min_node_size = 1;
        config.max_depth = 1;
        Rng rng(rep);
        const auto tree = grow_tree(data, testutil::identity_bag(data.size()), config, rng);
        if (!brute.found) {
            CHECK(tree.is_terminal());
            continue;
        }
        REQUIRE(!tree.is_terminal());
        // closed-form and literal deviance differ by roundoff, so allow the
        // grower any split whose brute-force score ties the optimum
        NodeSample left, right, parent;
        for (const auto& rec : data.records) {
            parent.times.push_back(rec.time);
            parent.events.push_back(rec.event);
            auto& side =
                rec.covariates[static_cast<std::size_t>(tree.feature_index)] <= tree.threshold
                    ? left
                    : right;
            side.times.push_back(rec.time);
            side.events.push_back(rec.event);
        }
        const double chosen = deviance_reduction(parent, left, right);
        CHECK(chosen >= brute.score - 1e-9 * std::max(1.0, brute.score));
    }
}

TEST_CASE("whole log-rank trees match the naive reference grower") {
    Rng data_rng(63);
    Rng bag_rng(64);
    for (int rep = 0; rep < 25; ++rep) {
        auto data = testutil::random_dataset(data_rng, 18 + data_rng.bounded(14), 3);
        // coarse covariates force value ties and shared thresholds
        for (auto& rec : data.records)
            for (auto& v : rec.covariates) v = std::round(v * 2.0) / 2.0;

        // a bootstrap-style bag with multiplicities
        std::vector<std::size_t> bag;
        for (std::size_t i = 0; i < data.size(); ++i) bag.push_back(bag_rng.bounded(data.size()));
        if (![&] {
                for (auto i : bag)
                    if (data.records[i].event) return true;
                return false;
            }())
            bag[0] = [&] {
                for (std::size_t i = 0; i < data.size(); ++i)
                    if (data.records[i].event) return i;
                return std::size_t{0};
            }();

        TreeConfig config;
        config.mtry = 3;  // full feature set, so the reference needs no rng
        config.min_node_events = 2;
        config.min_node_size = 3;
        Rng rng(rep);
        const auto fast = grow_tree(data, bag, config, rng);
        const auto reference = naive_grow(data, bag, config, 0);
        CHECK(testutil::tree_equal(fast, reference));
    }
}

TEST_CASE("max depth limits growth") {
    Rng data_rng(62);
    const auto data = testutil::random_dataset(data_rng, 60, 3);
    TreeConfig config;
    config.min_node_events = 1;
    config.min_node_size = 1;
    config.max_depth = 2;
    Rng rng(9);
    const auto tree = grow_tree(data, testutil::identity_bag(60), config, rng);
    // no node deeper than 2
    const auto check_depth = [](const TreeNode& node, int depth, auto&& self) -> void {
        if (node.is_terminal()) {
            CHECK(depth <= 2);
            return;
        }
        self(*node.left, depth + 1, self);
        self(*node.right, depth + 1, self);
    };
    check_depth(tree, 0, check_depth);
}
