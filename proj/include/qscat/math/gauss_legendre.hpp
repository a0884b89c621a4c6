#ifndef QSCAT_MATH_GAUSS_LEGENDRE_HPP
#define QSCAT_MATH_GAUSS_LEGENDRE_HPP

#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>
#include <vector>

namespace qscat {

struct GaussRule {
  std::vector<double> x;  // nodes on (-1,1)
  std::vector<double> w;
};

// Nodes by Newton iteration on P_n; cached per order.
inline const GaussRule& gauss_legendre(int n) {
  static std::map<int, GaussRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;
  if (n < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");

  GaussRule r;
  r.x.resize(n);
  r.w.resize(n);
  const int m = (n + 1) / 2;
  for (int i = 0; i < m; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      const double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    r.x[i] = -x;
    r.x[n - 1 - i] = x;
    r.w[i] = 2.0 / ((1.0 - x * x) * pp * pp);
    r.w[n - 1 - i] = r.w[i];
  }
  return cache.emplace(n, std::move(r)).first->second;
}

template <class F>
auto integrate_gl(F&& f, double a, double b, int n) {
  const auto& r = gauss_legendre(n);
  const double c = 0.5 * (b - a), d = 0.5 * (b + a);
  using R = decltype(f(0.0));
  R acc{};
  for (int i = 0; i < n; ++i) acc += r.w[i] * f(c * r.x[i] + d);
  return acc * c;
}

// Gauss-Legendre per panel over a breakpoint list.
template <class F>
auto integrate_panels(F&& f, const std::vector<double>& breaks, int n_per_panel) {
  using R = decltype(f(0.0));
  R acc{};
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i)
    acc += integrate_gl(f, breaks[i], breaks[i + 1], n_per_panel);
  return acc;
}

inline std::vector<double> linspace_breaks(double a, double b, int panels) {
  std::vector<double> v(panels + 1);
  for (int i = 0; i <= panels; ++i) v[i] = a + (b - a) * i / panels;
  return v;
}

}  // namespace qscat

#endif  // QSCAT_MATH_GAUSS_LEGENDRE_HPP
