#include "hsk/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

#include "hsk/errors.hpp"

namespace hsk {

double kolmogorov_survival(double lambda)
{
    if (lambda <= 0.0)
        return 1.0;
    if (lambda < 0.2)
        return 1.0; // series converges slowly there; the survival is 1 to double precision
    double sum = 0.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
        if (term < 1e-18)
            break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty())
        throw ValidationError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v)
            ++i;
        while (j < b.size() && b[j] == v)
            ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

LineFit fit_line(std::span<const double> x, std::span<const double> y,
                 std::span<const double> weights)
{
    const std::size_t n = x.size();
    if (n < 2 || y.size() != n || (!weights.empty() && weights.size() != n))
        throw ValidationError("fit_line: need at least two matching points");
    double sw = 0, sx = 0, sy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        sw += w;
        sx += w * x[i];
        sy += w * y[i];
    }
    const double mx = sx / sw, my = sy / sw;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        sxx += w * (x[i] - mx) * (x[i] - mx);
        sxy += w * (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0.0)
        throw ValidationError("fit_line: degenerate abscissae");
    LineFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (weights.empty()) {
        double rss = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = n > 2 ? std::sqrt(rss / static_cast<double>(n - 2) / sxx) : 0.0;
    } else {
        fit.slope_se = std::sqrt(1.0 / sxx);
    }
    return fit;
}

double normal_quantile(double p)
{
    boost::math::normal_distribution<double> nd;
    return boost::math::quantile(nd, p);
}

TrendResult decreasing_trend(std::span<const double> values, std::span<const double> errors,
                             double confidence)
{
    const std::size_t n = values.size();
    if (n < 2 || errors.size() != n)
        throw ValidationError("decreasing_trend: need at least two values with errors");
    TrendResult r;
    r.consecutive_decrease = true;
    for (std::size_t i = 1; i < n; ++i)
        if (!(values[i] < values[i - 1]))
            r.consecutive_decrease = false;
    std::vector<double> idx(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        idx[i] = static_cast<double>(i);
        const double e = std::max(errors[i], 1e-300);
        w[i] = 1.0 / (e * e);
    }
    const auto fit = fit_line(idx, values, w);
    r.slope = fit.slope;
    r.slope_z = fit.slope_se > 0 ? fit.slope / fit.slope_se : -INFINITY;
    r.significant = r.slope_z < -normal_quantile(confidence);
    return r;
}

double nonincreasing_window_fraction(std::span<const double> series, std::size_t window,
                                     double point_error)
{
    if (window < 2 || series.size() < 2 * window)
        throw ValidationError("window test: need at least two windows of two points");
    const std::size_t m = series.size() / window;
    std::vector<double> mean(m), se(m);
    for (std::size_t k = 0; k < m; ++k) {
        double s = 0, s2 = 0;
        for (std::size_t i = 0; i < window; ++i) {
            const double v = series[k * window + i];
            s += v;
            s2 += v * v;
        }
        const double w = static_cast<double>(window);
        mean[k] = s / w;
        const double var = std::max(0.0, (s2 - s * s / w) / (w - 1));
        se[k] = std::max(std::sqrt(var / w), point_error);
    }
    std::size_t ok = 0;
    for (std::size_t k = 1; k < m; ++k)
        if (mean[k] <= mean[k - 1] + 2.0 * std::hypot(se[k], se[k - 1]))
            ++ok;
    return static_cast<double>(ok) / static_cast<double>(m - 1);
}

} // namespace hsk
