#include "kirsf/sim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace kirsf {

void SimConfig::validate() const {
    if (n < 1 || d < 1) throw std::invalid_argument("SimConfig: n and d must be >= 1");
    if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
        throw std::invalid_argument("SimConfig: rates must be positive");
    if (!(censor_low < censor_high))
        throw std::invalid_argument("SimConfig: censor_low must be below censor_high");
    if (censor_low < 0.0) throw std::invalid_argument("SimConfig: censoring window must be >= 0");
}

std::pair<Matrix, std::vector<int>> ringnorm(std::size_t n, std::size_t d, Rng& rng) {
    if (n < 1 || d < 1) throw std::invalid_argument("ringnorm: n and d must be >= 1");
    const double a = 2.0 / std::sqrt(static_cast<double>(d));
    Matrix x(n, std::vector<double>(d));
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        const int cls = rng.uniform01() < 0.5 ? 1 : 2;
        labels[i] = cls;
        if (cls == 1) {
            for (std::size_t j = 0; j < d; ++j) x[i][j] = 2.0 * rng.normal();  // N(0, 4)
        } else {
            for (std::size_t j = 0; j < d; ++j) x[i][j] = rng.normal() + a;  // N(a, 1)
        }
    }
    return {std::move(x), std::move(labels)};
}

std::pair<std::vector<double>, std::vector<int>>
simulate_survival(const std::vector<int>& labels, const SimConfig& config, Rng& rng) {
    config.validate();
    std::vector<double> times(labels.size());
    std::vector<int> events(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 1 && labels[i] != 2)
            throw std::invalid_argument("simulate_survival: labels must be 1 or 2");
        const double rate = labels[i] == 1 ? config.lambda1 : config.lambda2;
        const double u = -std::log(1.0 - rng.uniform01()) / rate;  // Exp(rate) by inversion
        const double v = config.censor_low + rng.uniform01() * (config.censor_high - config.censor_low);
        times[i] = std::min(u, v);
        events[i] = u <= v ? 1 : 0;
    }
    return {std::move(times), std::move(events)};
}

SimulatedData make_ringnorm_survival(const SimConfig& config) {
    config.validate();
    Rng rng(config.seed);
    auto [covariates, labels] = ringnorm(config.n, config.d, rng);
    auto [times, events] = simulate_survival(labels, config, rng);

    SimulatedData out;
    out.config = config;
    out.labels = std::move(labels);
    out.data.feature_names.reserve(config.d);
    for (std::size_t j = 0; j < config.d; ++j)
        out.data.feature_names.push_back("X" + std::to_string(j + 1));
    out.data.records.resize(config.n);
    for (std::size_t i = 0; i < config.n; ++i) {
        out.data.records[i].time = times[i];
        out.data.records[i].event = events[i];
        out.data.records[i].covariates = std::move(covariates[i]);
    }
    return out;
}

}  // namespace kirsf
