#ifndef QSCAT_MATH_STATS_HPP
#define QSCAT_MATH_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "qscat/math/rng.hpp"

namespace qscat {

// Pairwise summation; the fixed reduction tree keeps results independent of
// how replicas were scheduled across workers.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_and_se(std::span<const double> v) {
  MeanSe r;
  r.n = v.size();
  if (r.n == 0) return r;
  r.mean = pairwise_sum(v) / static_cast<double>(r.n);
  if (r.n < 2) return r;
  std::vector<double> sq(r.n);
  for (std::size_t i = 0; i < r.n; ++i) sq[i] = (v[i] - r.mean) * (v[i] - r.mean);
  const double var = pairwise_sum(sq) / static_cast<double>(r.n - 1);
  r.se = std::sqrt(var / static_cast<double>(r.n));
  return r;
}

// chi-square(1): the law of the squared standard normal.
struct Chi2Law {
  static double cdf(double x) {
    return x <= 0.0 ? 0.0 : std::erf(std::sqrt(0.5 * x));
  }
  // int_0^x F(s) ds, closed form
  static double cdf_integral(double x) {
    if (x <= 0.0) return 0.0;
    return (x - 1.0) * std::erf(std::sqrt(0.5 * x)) +
           std::sqrt(2.0 * x / M_PI) * std::exp(-0.5 * x);
  }
  // E[X ; X <= x]
  static double partial_mean(double x) {
    if (x <= 0.0) return 0.0;
    return std::erf(std::sqrt(0.5 * x)) -
           std::sqrt(2.0 * x / M_PI) * std::exp(-0.5 * x);
  }
  static double mean() { return 1.0; }
  static double quantile(double p) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) throw std::invalid_argument("chi2 quantile: p must be < 1");
    double lo = 0.0, hi = 1.0;
    while (cdf(hi) < p) hi *= 2.0;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < p ? lo : hi) = mid;
      if (hi - lo < 1e-14 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
  }
};

template <class Cdf>
double ks_distance(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw std::invalid_argument("ks_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double F = cdf(samples[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

// Wasserstein-1 distance between the empirical law of `samples` and a
// reference law given by its CDF and the closed form of int F. Exact
// integral of |F_n - F| over segments, splitting at internal crossings.
template <class Law>
double w1_distance(std::vector<double> samples, const Law& law) {
  if (samples.empty()) throw std::invalid_argument("w1_distance: empty sample");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double total = 0.0;

  auto segment = [&](double a, double b, double q) {
    // int_a^b |q - F(x)| dx with F nondecreasing
    if (b <= a) return 0.0;
    const double Fa = law.cdf(a), Fb = law.cdf(b);
    auto piece = [&](double x0, double x1, bool f_above) {
      const double intF = law.cdf_integral(x1) - law.cdf_integral(x0);
      const double rect = q * (x1 - x0);
      return f_above ? intF - rect : rect - intF;
    };
    if (Fa >= q) return piece(a, b, true);
    if (Fb <= q) return piece(a, b, false);
    // find crossing F(x*) = q by bisection
    double lo = a, hi = b;
    for (int i = 0; i < 80; ++i) {
      const double mid = 0.5 * (lo + hi);
      (law.cdf(mid) < q ? lo : hi) = mid;
    }
    const double xc = 0.5 * (lo + hi);
    return piece(a, xc, false) + piece(xc, b, true);
  };

  // left tail: F_n = 0 below the smallest sample (reference support starts at 0)
  const double lo0 = std::min(0.0, samples.front());
  total += law.cdf_integral(samples.front()) - law.cdf_integral(lo0);
  for (std::size_t i = 0; i + 1 < samples.size(); ++i)
    total += segment(samples[i], samples[i + 1], static_cast<double>(i + 1) / n);
  // right tail: int_{max}^inf (1 - F) = E[X] - E[X; X<=max] - max*(1-F(max))
  const double xm = samples.back();
  total += law.mean() - law.partial_mean(xm) - xm * (1.0 - law.cdf(xm));
  return total;
}

// Bootstrap standard error of an arbitrary sample statistic.
template <class Stat>
double bootstrap_se(std::span<const double> samples, Stat&& stat, int resamples,
                    RngStream rng) {
  if (resamples < 2) throw std::invalid_argument("bootstrap_se: need >= 2 resamples");
  const std::size_t n = samples.size();
  std::vector<double> re(n), vals(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < n; ++i) re[i] = samples[rng.index(n)];
    vals[b] = stat(std::span<const double>(re));
  }
  const auto ms = mean_and_se(vals);
  return ms.se * std::sqrt(static_cast<double>(resamples));  // sample sd
}

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
};

inline OlsFit ols_fit(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2 || y.size() != n) throw std::invalid_argument("ols_fit: need >= 2 points");
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  OlsFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  return f;
}

// Sample covariance matrix of column pairs; data is row-major replicas x d.
inline std::vector<double> covariance_matrix(std::span<const double> data,
                                             std::size_t rows, std::size_t cols) {
  if (rows < 2) throw std::invalid_argument("covariance_matrix: need >= 2 rows");
  std::vector<double> mean(cols, 0.0), cov(cols * cols, 0.0), buf(rows);
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) buf[r] = data[r * cols + c];
    mean[c] = pairwise_sum(buf) / static_cast<double>(rows);
  }
  for (std::size_t a = 0; a < cols; ++a)
    for (std::size_t b = a; b < cols; ++b) {
      for (std::size_t r = 0; r < rows; ++r)
        buf[r] = (data[r * cols + a] - mean[a]) * (data[r * cols + b] - mean[b]);
      const double v = pairwise_sum(buf) / static_cast<double>(rows - 1);
      cov[a * cols + b] = cov[b * cols + a] = v;
    }
  return cov;
}

}  // namespace qscat

#endif  // QSCAT_MATH_STATS_HPP
