#include "pdmpsim/stats.hpp"

#include <algorithm>
#include <cmath>

namespace pdmpsim {

double mean_of(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

SampleSummary summarize(const std::vector<double>& x) {
    SampleSummary s;
    s.n = x.size();
    if (s.n == 0) return s;
    s.mean = mean_of(x);
    if (s.n < 2) return s;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        double d = v - s.mean, d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    const double n = static_cast<double>(s.n);
    m2 /= n;
    m3 /= n;
    m4 /= n;
    s.variance = m2 * n / (n - 1.0);
    s.stderr_mean = std::sqrt(s.variance / n);
    double v4 = m4 - m2 * m2 * (n - 3.0) / (n - 1.0);
    s.stderr_variance = std::sqrt(std::max(v4, 0.0) / n);
    if (m2 > 0.0) {
        s.skewness = m3 / std::pow(m2, 1.5);
        s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
        s.skew_z = s.skewness / std::sqrt(6.0 / n);
        s.kurtosis_z = s.excess_kurtosis / std::sqrt(24.0 / n);
    }
    return s;
}

double covariance_of(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double mx = mean_of(x), my = mean_of(y), s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += (x[i] - mx) * (y[i] - my);
    return s / static_cast<double>(n - 1);
}

double covariance_stderr(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    if (n < 2) return 0.0;
    double mx = mean_of(x), my = mean_of(y);
    std::vector<double> prod(n);
    for (std::size_t i = 0; i < n; ++i) prod[i] = (x[i] - mx) * (y[i] - my);
    return summarize(prod).stderr_mean;
}

double kolmogorov_sf(double lambda) {
    if (lambda <= 0.0) return 1.0;
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * term;
        if (term < 1e-16) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    KsResult r;
    r.statistic = d;
    double ne = na * nb / (na + nb);
    double sq = std::sqrt(ne);
    r.p_value = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d);
    return r;
}

}  // namespace pdmpsim
