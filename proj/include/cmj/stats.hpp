#pragma once

// Goodness-of-fit tests against the standard normal and streaming moments.

#include <cstddef>
#include <vector>

namespace cmj {

double normal_cdf(double x);

/// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} e^{-2 k^2 lambda^2}.
double kolmogorov_tail(double lambda);

/// Limiting Anderson-Darling distribution function (Marsaglia and Marsaglia's ADinf).
double anderson_darling_cdf(double a2);

struct KsResult {
  double statistic = 0.0;  // sup |F_n - Phi|
  double p_value = 1.0;
};

/// One-sample KS test against N(0,1); the p-value uses the
/// Stephens-corrected argument (sqrt(n) + 0.12 + 0.11/sqrt(n)) D.
KsResult ks_normal(std::vector<double> x);

struct AdResult {
  double statistic = 0.0;  // A^2
  double p_value = 1.0;
};

/// Anderson-Darling test against the fully specified N(0,1).
AdResult anderson_darling_normal(std::vector<double> x);

/// Welford accumulator; merge() combines partial results exactly up to rounding.
class RunningMoments {
 public:
  void add(double x);
  void merge(const RunningMoments& o);
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  /// Unbiased sample variance (0 for fewer than two samples).
  double variance() const noexcept;
  /// Standard error of the mean.
  double standard_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace cmj
