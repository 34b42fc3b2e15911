#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wdiff/types.hpp"

namespace wdiff::stats {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  ///< standard error of the mean (unbiased variance)
  std::size_t n = 0;
};

MeanSe mean_se(std::span<const double> values);

/// Two-sided standard normal quantile for a confidence level, e.g. 0.99 -> 2.5758.
double normal_critical(double confidence);

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::size_t successes, std::size_t n, double confidence);

/// Linear-interpolated empirical quantile (type 7). `values` need not be sorted.
double quantile(std::vector<double> values, double q);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);
KsResult ks_one_sample(std::vector<double> sample, const std::function<double(double)>& cdf);

}  // namespace wdiff::stats
