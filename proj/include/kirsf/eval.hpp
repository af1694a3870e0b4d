#pragma once

#include <cstdint>
#include <span>

namespace kirsf {

// Harrell's C computed over all permissible pairs. Concordance is kept in
// exact half-units so pair order can never change the result.
struct ConcordanceResult {
    double concordance = 0.0;        // sum of pair scores
    std::int64_t permissible = 0;    // number of permissible pairs
    std::int64_t concordance_halves = 0;  // concordance * 2, exact
    double c_index = 0.0;
    double prediction_error = 0.0;   // 1 - c_index
};

// Pair scoring: pairs whose shorter time is censored are omitted, as are
// tied-time pairs with no death. For T_i != T_j the shorter time scores 1
// with the strictly worse (larger) prediction, 0.5 on a prediction tie,
// otherwise 0. For tied times: both deaths score 1 on a prediction tie and
// 0.5 otherwise; one death scores 1 when the death has the strictly worse
// prediction and 0.5 otherwise. Throws when no pair is permissible.
ConcordanceResult c_index(std::span<const double> times, std::span<const int> events,
                          std::span<const double> predicted);

double prediction_error(const ConcordanceResult& result);

struct TTestResult {
    double t = 0.0;
    int df = 0;
    double p_value = 1.0;     // two-sided
    bool infinite_t = false;  // zero pooled variance with unequal means
};

// Pooled-variance two-sample t-test, df = n1 + n2 - 2. The two-sided p-value
// comes from the regularized incomplete beta continued fraction below.
TTestResult pooled_t_test(std::span<const double> a, std::span<const double> b);

// I_x(a, b) via the Lentz continued fraction, accurate to ~1e-12.
double regularized_incomplete_beta(double a, double b, double x);

// P(|T_df| >= |t|)
double student_t_two_sided_p(double t, int df);

}  // namespace kirsf
