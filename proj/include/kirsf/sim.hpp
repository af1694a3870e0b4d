#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kirsf/dataset.hpp"
#include "kirsf/rng.hpp"

namespace kirsf {

struct SimConfig {
    std::size_t n = 1000;
    std::size_t d = 20;
    double lambda1 = 0.1;  // hazard rate of class 1 (the wide N(0, 4I) class)
    double lambda2 = 0.5;  // hazard rate of class 2 (the shifted N(a 1, I) class)
    double censor_low = 5.0;
    double censor_high = 10.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// Breiman's ringnorm: equal mixture of class 1 ~ N(0, 4I) and
// class 2 ~ N(a 1, I) with a = 2/sqrt(d). Labels are 1 or 2.
std::pair<Matrix, std::vector<int>> ringnorm(std::size_t n, std::size_t d, Rng& rng);

// True time U ~ Exp(lambda_class), censor time V ~ Uniform[low, high],
// T = min(U, V), delta = 1 iff U <= V.
std::pair<std::vector<double>, std::vector<int>>
simulate_survival(const std::vector<int>& labels, const SimConfig& config, Rng& rng);

struct SimulatedData {
    SurvivalDataset data;
    std::vector<int> labels;  // hidden truth, never a covariate
    SimConfig config;
    static constexpr const char* kGenerator = "mt19937_64+box-muller";
};

SimulatedData make_ringnorm_survival(const SimConfig& config);

}  // namespace kirsf
