#pragma once

// Small statistics toolkit for the acceptance checks: two-sample KS test,
// (weighted) least-squares lines, and monotone-trend tests.

#include <cstddef>
#include <span>
#include <vector>

namespace hsk {

struct KsResult {
    double statistic = 0.0; ///< sup |F_a - F_b|
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test, asymptotic p-value with the usual
/// effective-size correction.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0; ///< standard error of the slope
};

/// Least squares y = a + b x; weights are inverse variances when given.
LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights = {});

/// One-sided test of a decreasing sequence (values[i] with errors[i]):
/// every consecutive step decreases and the weighted regression slope
/// against the index is negative at the given confidence.
struct TrendResult {
    bool consecutive_decrease = false;
    double slope = 0.0;
    double slope_z = 0.0; ///< slope / se
    bool significant = false;
    bool passed() const { return consecutive_decrease && significant; }
};
TrendResult decreasing_trend(std::span<const double> values, std::span<const double> errors,
                             double confidence = 0.95);

/// Fraction of consecutive window means satisfying next <= previous + 2 SE.
/// The series is cut into windows of `window` points; a window's SE is at
/// least point_error (noise of a single point, correlated in time).
double nonincreasing_window_fraction(std::span<const double> series, std::size_t window,
                                     double point_error = 0.0);

/// Standard normal quantile.
double normal_quantile(double p);

} // namespace hsk
