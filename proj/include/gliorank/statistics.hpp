#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "gliorank/error.hpp"

namespace gliorank {

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean_rank;
    i = j + 1;
  }
  return ranks;
}

/// Pearson correlation; empty when either input has zero variance.
inline std::optional<double> pearson_r(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), errc::invalid_argument, "correlation inputs differ in length");
  require(a.size() >= 2, errc::invalid_argument, "correlation needs at least two values");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// Spearman's rho as the Pearson correlation of average ranks; empty when undefined.
inline std::optional<double> spearman_rho(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), errc::invalid_argument, "correlation inputs differ in length");
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson_r(ra, rb);
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

/// Two-sided one-sample Student t-test of mean(values) against mu0.
inline TTestResult one_sample_t_test(std::span<const double> values, double mu0) {
  require(values.size() >= 2, errc::invalid_argument, "t-test needs at least two values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  require(ss > 0.0, errc::zero_variance, "zero sample variance");
  const double sd = std::sqrt(ss / (n - 1.0));
  TTestResult r;
  r.df = values.size() - 1;
  r.t = (mean - mu0) / (sd / std::sqrt(n));
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  return r;
}

}  // namespace gliorank
