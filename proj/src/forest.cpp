#include "kirsf/forest.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace kirsf {

namespace {

constexpr const char* kFormatName = "kirsf-forest";
constexpr int kFormatVersion = 1;

using nlohmann::json;

json tree_to_json(const TreeNode& node) {
    if (node.is_terminal()) {
        return json{{"n", node.member_count},
                    {"t", node.chf.knots()},
                    {"v", node.chf.values()}};
    }
    return json{{"f", node.feature_index},
                {"x", node.threshold},
                {"l", tree_to_json(*node.left)},
                {"r", tree_to_json(*node.right)}};
}

TreeNode tree_from_json(const json& j) {
    if (j.contains("f")) {
        return TreeNode::internal(j.at("f").get<int>(), j.at("x").get<double>(),
                                  tree_from_json(j.at("l")), tree_from_json(j.at("r")));
    }
    StepFunction chf(j.at("t").get<std::vector<double>>(), j.at("v").get<std::vector<double>>());
    return TreeNode::terminal(std::move(chf), j.at("n").get<int>());
}

// accumulate `chf` evaluated at every grid point into `acc`; the chf knots
// are a subset of the grid, so a single merge pass suffices
void accumulate_on_grid(const StepFunction& chf, std::span<const double> grid,
                        std::vector<double>& acc) {
    const auto& knots = chf.knots();
    const auto& values = chf.values();
    std::size_t k = 0;
    double current = 0.0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (k < knots.size() && knots[k] <= grid[g]) current = values[k++];
        acc[g] += current;
    }
}

void run_partitioned(std::size_t count, unsigned n_threads, const auto& body) {
    unsigned hw = n_threads > 0 ? n_threads : std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    hw = std::min<unsigned>(hw, static_cast<unsigned>(count ? count : 1));
    if (hw <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(hw);
    std::exception_ptr error;
    std::mutex error_mutex;
    for (unsigned t = 0; t < hw; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < count; i += hw) body(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

SurvivalForest SurvivalForest::fit(const SurvivalDataset& data, const ForestConfig& config,
                                   unsigned n_threads) {
    const std::size_t n = data.size();
    if (n < 2) throw std::invalid_argument("SurvivalForest::fit: need at least 2 records");
    if (data.event_count() == 0)
        throw std::invalid_argument("SurvivalForest::fit: dataset contains no event");
    if (config.n_trees < 1) throw std::invalid_argument("SurvivalForest::fit: n_trees must be >= 1");

    SurvivalForest forest;
    forest.feature_dim_ = data.dim();
    forest.training_times_.reserve(n);
    forest.training_covariates_.reserve(n);
    for (const auto& rec : data.records) {
        forest.training_times_.push_back(rec.time);
        forest.training_covariates_.push_back(rec.covariates);
        if (rec.event == 1) forest.event_time_grid_.push_back(rec.time);
    }
    std::sort(forest.event_time_grid_.begin(), forest.event_time_grid_.end());
    forest.event_time_grid_.erase(
        std::unique(forest.event_time_grid_.begin(), forest.event_time_grid_.end()),
        forest.event_time_grid_.end());

    const auto n_trees = static_cast<std::size_t>(config.n_trees);
    forest.trees_.resize(n_trees);
    forest.inbag_.assign(n_trees, std::vector<std::uint32_t>(n, 0));

    run_partitioned(n_trees, n_threads, [&](std::size_t b) {
        Rng rng(derive_seed(config.seed, b));
        std::vector<std::size_t> bag(n);
        auto& counts = forest.inbag_[b];
        for (std::size_t i = 0; i < n; ++i) {
            const auto idx = static_cast<std::size_t>(rng.bounded(n));
            bag[i] = idx;
            counts[idx] += 1;
        }
        // a bag without events cannot grow a tree; redraw deterministically
        int guard = 0;
        while (true) {
            bool has_event = false;
            for (std::size_t idx : bag) has_event = has_event || data.records[idx].event == 1;
            if (has_event) break;
            if (++guard > 100)
                throw std::runtime_error("bootstrap produced 100 event-free bags in a row");
            std::fill(counts.begin(), counts.end(), 0);
            for (std::size_t i = 0; i < n; ++i) {
                const auto idx = static_cast<std::size_t>(rng.bounded(n));
                bag[i] = idx;
                counts[idx] += 1;
            }
        }
        forest.trees_[b] = grow_tree(data, bag, config.tree, rng);
    });
    return forest;
}

StepFunction SurvivalForest::ensemble_chf(std::span<const double> x) const {
    if (trees_.empty()) throw std::runtime_error("ensemble_chf: empty forest");
    if (x.size() != feature_dim_)
        throw std::runtime_error("ensemble_chf: expected dimension " +
                                 std::to_string(feature_dim_) + ", got " +
                                 std::to_string(x.size()));
    std::vector<double> acc(event_time_grid_.size(), 0.0);
    for (const auto& tree : trees_) accumulate_on_grid(tree_chf(tree, x), event_time_grid_, acc);
    const auto b = static_cast<double>(trees_.size());
    for (double& v : acc) v /= b;
    return StepFunction(event_time_grid_, std::move(acc));
}

bool SurvivalForest::has_oob(std::size_t train_index) const {
    for (const auto& counts : inbag_)
        if (counts[train_index] == 0) return true;
    return false;
}

StepFunction SurvivalForest::oob_ensemble_chf(std::size_t train_index) const {
    if (inbag_.empty() || train_index >= inbag_.front().size())
        throw std::invalid_argument("oob_ensemble_chf: record index out of range");
    const auto& x = training_covariates_[train_index];
    std::vector<double> acc(event_time_grid_.size(), 0.0);
    double used = 0.0;
    for (std::size_t b = 0; b < trees_.size(); ++b) {
        if (inbag_[b][train_index] != 0) continue;
        accumulate_on_grid(tree_chf(trees_[b], x), event_time_grid_, acc);
        used += 1.0;
    }
    if (used == 0.0)
        throw std::runtime_error("no OOB trees for record " + std::to_string(train_index));
    for (double& v : acc) v /= used;
    return StepFunction(event_time_grid_, std::move(acc));
}

double SurvivalForest::predicted_outcome(const StepFunction& chf, std::span<const double> grid) {
    if (grid.empty()) throw std::invalid_argument("predicted_outcome: empty grid");
    double total = 0.0;
    for (double t : grid) total += chf(t);
    return total;
}

double SurvivalForest::ensemble_mortality(std::span<const double> x) const {
    const StepFunction chf = ensemble_chf(x);
    double total = 0.0;
    for (double t : training_times_) total += chf(t);
    return total;
}

std::string SurvivalForest::save() const {
    json j;
    j["format"] = kFormatName;
    j["version"] = kFormatVersion;
    j["feature_dim"] = feature_dim_;
    j["event_time_grid"] = event_time_grid_;
    j["training_times"] = training_times_;
    j["training_covariates"] = training_covariates_;
    j["inbag"] = inbag_;
    json trees = json::array();
    for (const auto& tree : trees_) trees.push_back(tree_to_json(tree));
    j["trees"] = std::move(trees);
    return j.dump();
}

SurvivalForest SurvivalForest::load(const std::string& bytes) {
    json j;
    try {
        j = json::parse(bytes);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("corrupt forest payload: ") + e.what());
    }
    if (!j.is_object() || j.value("format", std::string()) != kFormatName)
        throw std::runtime_error("corrupt forest payload: missing format tag");
    const int version = j.value("version", -1);
    if (version != kFormatVersion)
        throw std::runtime_error("unsupported forest format version " + std::to_string(version) +
                                 " (this build reads version " + std::to_string(kFormatVersion) +
                                 ")");
    try {
        SurvivalForest forest;
        forest.feature_dim_ = j.at("feature_dim").get<std::size_t>();
        forest.event_time_grid_ = j.at("event_time_grid").get<std::vector<double>>();
        forest.training_times_ = j.at("training_times").get<std::vector<double>>();
        forest.training_covariates_ = j.at("training_covariates").get<Matrix>();
        forest.inbag_ = j.at("inbag").get<std::vector<std::vector<std::uint32_t>>>();
        for (const auto& tj : j.at("trees")) forest.trees_.push_back(tree_from_json(tj));
        if (forest.trees_.empty() || forest.inbag_.size() != forest.trees_.size())
            throw std::runtime_error("tree/inbag count mismatch");
        return forest;
    } catch (const json::exception& e) {
        throw std::runtime_error(std::string("corrupt forest payload: ") + e.what());
    }
}

}  // namespace kirsf
