#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace kikuchi {

struct WilsonInterval {
  double low = 0;
  double high = 1;
};

inline WilsonInterval wilson_interval(int successes, int trials, double z = 1.959963984540054) {
  if (trials <= 0) return {0.0, 1.0};
  const double n = trials;
  const double phat = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = phat + z2 / (2 * n);
  const double half = z * std::sqrt(phat * (1 - phat) / n + z2 / (4 * n * n));
  return {(center - half) / denom, (center + half) / denom};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median: empty");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sample_sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / std::max<std::size_t>(1, v.size() - 1));
}

inline double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (v.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const double frac = pos - lo;
  return v[lo] * (1 - frac) + v[hi] * frac;
}

// Two-sample Kolmogorov-Smirnov: statistic plus the alpha-level threshold
// c(alpha) sqrt((m+n)/(mn)); reject when statistic exceeds the threshold.
struct KsResult {
  double statistic = 0;
  double threshold = 0;
  bool reject = false;
};

inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b, double alpha = 0.01) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = a.size(), nb = b.size();
  double d = 0;
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] <= b[j])
      ++i;
    else
      ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double calpha = std::sqrt(-0.5 * std::log(alpha / 2.0));
  KsResult r;
  r.statistic = d;
  r.threshold = calpha * std::sqrt((na + nb) / (na * nb));
  r.reject = r.statistic > r.threshold;
  return r;
}

} // namespace kikuchi
