#include "kirsf/step_function.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kirsf {

StepFunction::StepFunction(std::vector<double> knots, std::vector<double> values)
    : knots_(std::move(knots)), values_(std::move(values)) {
    if (knots_.size() != values_.size())
        throw std::invalid_argument("StepFunction: knots and values differ in length");
    for (std::size_t i = 0; i < knots_.size(); ++i) {
        if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i]))
            throw std::invalid_argument("StepFunction: non-finite knot or value");
        if (i > 0 && knots_[i] <= knots_[i - 1])
            throw std::invalid_argument("StepFunction: knots not strictly increasing");
        if (i > 0 && values_[i] < values_[i - 1])
            throw std::invalid_argument("StepFunction: values decreasing");
    }
}

double StepFunction::operator()(double t) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
    if (it == knots_.begin()) return 0.0;
    return values_[static_cast<std::size_t>(it - knots_.begin()) - 1];
}

std::vector<double> StepFunction::evaluate(std::span<const double> grid) const {
    std::vector<double> out;
    out.reserve(grid.size());
    for (double t : grid) out.push_back((*this)(t));
    return out;
}

}  // namespace kirsf
