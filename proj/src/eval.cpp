#include "kirsf/eval.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace kirsf {

ConcordanceResult c_index(std::span<const double> times, std::span<const int> events,
                          std::span<const double> predicted) {
    const std::size_t n = times.size();
    if (events.size() != n || predicted.size() != n)
        throw std::invalid_argument("c_index: input lengths differ");
    if (n < 2) throw std::invalid_argument("c_index: need at least 2 cases");
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(times[i]) || !std::isfinite(predicted[i]))
            throw std::invalid_argument("c_index: non-finite input");
        if (events[i] != 0 && events[i] != 1)
            throw std::invalid_argument("c_index: event outside {0,1}");
    }

    std::int64_t halves = 0;  // pair scores in units of 1/2, exact
    std::int64_t permissible = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (times[i] == times[j]) {
                if (events[i] == 0 && events[j] == 0) continue;
                ++permissible;
                if (events[i] == 1 && events[j] == 1) {
                    halves += predicted[i] == predicted[j] ? 2 : 1;
                } else {
                    const double death_pred = events[i] == 1 ? predicted[i] : predicted[j];
                    const double other_pred = events[i] == 1 ? predicted[j] : predicted[i];
                    halves += death_pred > other_pred ? 2 : 1;
                }
            } else {
                const std::size_t shorter = times[i] < times[j] ? i : j;
                const std::size_t longer = shorter == i ? j : i;
                if (events[shorter] == 0) continue;
                ++permissible;
                if (predicted[shorter] > predicted[longer])
                    halves += 2;
                else if (predicted[shorter] == predicted[longer])
                    halves += 1;
            }
        }
    }
    if (permissible == 0) throw std::runtime_error("undefined C-index: no permissible pairs");

    ConcordanceResult result;
    result.concordance_halves = halves;
    result.concordance = static_cast<double>(halves) / 2.0;
    result.permissible = permissible;
    result.c_index = static_cast<double>(halves) / (2.0 * static_cast<double>(permissible));
    result.prediction_error = 1.0 - result.c_index;
    return result;
}

double prediction_error(const ConcordanceResult& result) { return 1.0 - result.c_index; }

namespace {

// Lentz's continued fraction for the incomplete beta function.
double beta_continued_fraction(double a, double b, double x) {
    constexpr double eps = 1e-14;
    constexpr double fpmin = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= 500; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta: a, b must be > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    if (x < (a + 1.0) / (a + b + 2.0))
        return std::exp(ln_front) * beta_continued_fraction(a, b, x) / a;
    return 1.0 - std::exp(ln_front) * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, int df) {
    if (df < 1) throw std::invalid_argument("student_t_two_sided_p: df must be >= 1");
    if (std::isinf(t)) return 0.0;
    const double nu = df;
    const double x = nu / (nu + t * t);
    return regularized_incomplete_beta(nu / 2.0, 0.5, x);
}

TTestResult pooled_t_test(std::span<const double> a, std::span<const double> b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::invalid_argument("pooled_t_test: both samples need at least 2 values");
    const auto n1 = static_cast<double>(a.size());
    const auto n2 = static_cast<double>(b.size());
    double mean1 = 0.0, mean2 = 0.0;
    for (double v : a) mean1 += v;
    for (double v : b) mean2 += v;
    mean1 /= n1;
    mean2 /= n2;
    double ss1 = 0.0, ss2 = 0.0;
    for (double v : a) ss1 += (v - mean1) * (v - mean1);
    for (double v : b) ss2 += (v - mean2) * (v - mean2);

    TTestResult result;
    result.df = static_cast<int>(a.size() + b.size()) - 2;
    const double pooled_var = (ss1 + ss2) / static_cast<double>(result.df);
    if (pooled_var == 0.0) {
        if (mean1 == mean2) {
            result.t = 0.0;
            result.p_value = 1.0;
        } else {
            result.t = mean1 > mean2 ? std::numeric_limits<double>::infinity()
                                     : -std::numeric_limits<double>::infinity();
            result.p_value = 0.0;
            result.infinite_t = true;
        }
        return result;
    }
    const double se = std::sqrt(pooled_var * (1.0 / n1 + 1.0 / n2));
    result.t = (mean1 - mean2) / se;
    result.p_value = student_t_two_sided_p(result.t, result.df);
    return result;
}

}  // namespace kirsf
