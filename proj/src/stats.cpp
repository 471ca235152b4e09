#include "cmj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cmj/error.hpp"

namespace cmj {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double kolmogorov_tail(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.0) {
    // Theta-function form, fast for small arguments:
    // 1 - Q = sqrt(2 pi)/lambda sum_k e^{-(2k-1)^2 pi^2 / (8 lambda^2)}.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 20; ++k) {
      const double j = 2.0 * k - 1.0;
      s += std::exp(-j * j * c);
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

double anderson_darling_cdf(double z) {
  if (z <= 0.0) return 0.0;
  if (z < 2.0) {
    return std::exp(-1.2337141 / z) / std::sqrt(z) *
           (2.00012 + (0.247105 - (0.0649821 - (0.0347962 - (0.011672 - 0.00168691 * z) * z) * z) * z) * z);
  }
  return std::exp(
      -std::exp(1.0776 - (2.30695 - (0.43424 - (0.082433 - (0.008056 - 0.0003146 * z) * z) * z) * z) * z));
}

KsResult ks_normal(std::vector<double> x) {
  if (x.empty()) throw DomainError("ks_normal: empty sample");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = normal_cdf(x[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_tail((sn + 0.12 + 0.11 / sn) * d)};
}

AdResult anderson_darling_normal(std::vector<double> x) {
  if (x.empty()) throw DomainError("anderson_darling_normal: empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    // log Phi(x_i) + log(1 - Phi(x_{n+1-i})), using erfc for both tails.
    const double lo = std::log(normal_cdf(x[i]));
    const double hi = std::log(normal_cdf(-x[n - 1 - i]));
    s += (2.0 * static_cast<double>(i) + 1.0) * (lo + hi);
  }
  const double a2 = -static_cast<double>(n) - s / static_cast<double>(n);
  return {a2, 1.0 - anderson_darling_cdf(a2)};
}

void RunningMoments::add(double x) {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (x - mean_);
}

void RunningMoments::merge(const RunningMoments& o) {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double na = static_cast<double>(n_), nb = static_cast<double>(o.n_);
  const double delta = o.mean_ - mean_;
  const double n = na + nb;
  mean_ += delta * nb / n;
  m2_ += o.m2_ + delta * delta * na * nb / n;
  n_ += o.n_;
}

double RunningMoments::variance() const noexcept {
  return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

double RunningMoments::standard_error() const noexcept {
  return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

}  // namespace cmj
