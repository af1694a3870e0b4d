#pragma once

#include <span>
#include <vector>

namespace kirsf {

// Right-continuous non-decreasing step function, used for cumulative hazard
// estimates. Zero before the first knot, constant at values[i] on
// [knots[i], knots[i+1]).
class StepFunction {
public:
    StepFunction() = default;  // the zero function
    StepFunction(std::vector<double> knots, std::vector<double> values);

    double operator()(double t) const;
    std::vector<double> evaluate(std::span<const double> grid) const;

    const std::vector<double>& knots() const { return knots_; }
    const std::vector<double>& values() const { return values_; }
    bool is_zero() const { return knots_.empty(); }

    bool operator==(const StepFunction&) const = default;

private:
    std::vector<double> knots_;   // strictly increasing
    std::vector<double> values_;  // non-decreasing, same length
};

}  // namespace kirsf
