#pragma once

#include <cstddef>
#include <vector>

namespace pdmpsim {

struct SampleSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double variance = 0.0;  // unbiased
    double stderr_mean = 0.0;
    double stderr_variance = 0.0;  // delta-method, from the fourth central moment
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
    double skew_z = 0.0;
    double kurtosis_z = 0.0;
};

// Sequential left-to-right sums, so results depend only on sample order.
SampleSummary summarize(const std::vector<double>& x);
double mean_of(const std::vector<double>& x);
double covariance_of(const std::vector<double>& x, const std::vector<double>& y);
// Standard error of the sample covariance of (x, y).
double covariance_stderr(const std::vector<double>& x, const std::vector<double>& y);

// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
double kolmogorov_sf(double lambda);

}  // namespace pdmpsim
