#ifndef QSCAT_MATH_QUADRATURE_HPP
#define QSCAT_MATH_QUADRATURE_HPP

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <stdexcept>
#include <vector>

#include "qscat/math/gauss_legendre.hpp"

namespace qscat {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  bool converged = false;
  std::size_t evals = 0;
};

class QuadratureError : public std::runtime_error {
 public:
  QuadratureError(const std::string& what, double achieved)
      : std::runtime_error(what), achieved_tolerance(achieved) {}
  double achieved_tolerance;
};

// Globally adaptive bisection; per-interval error from a GL(12)/GL(24) pair.
template <class F>
QuadResult adaptive_integrate(F&& f, double a, double b, double rel_tol = 1e-9,
                              double abs_tol = 0.0, int max_intervals = 4000) {
  struct Seg {
    double a, b, value, error;
    bool operator<(const Seg& o) const { return error < o.error; }
  };
  std::size_t evals = 0;
  auto estimate = [&](double lo, double hi) {
    const double coarse = integrate_gl(f, lo, hi, 12);
    const double fine = integrate_gl(f, lo, hi, 24);
    evals += 36;
    return Seg{lo, hi, fine, std::abs(fine - coarse)};
  };
  std::priority_queue<Seg> heap;
  heap.push(estimate(a, b));
  double total = heap.top().value, err = heap.top().error;
  int used = 1;
  while (used < max_intervals) {
    const double tol = std::max(abs_tol, rel_tol * std::abs(total));
    if (err <= tol) break;
    Seg worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    Seg l = estimate(worst.a, mid), r = estimate(mid, worst.b);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++used;
  }
  QuadResult out;
  out.value = total;
  out.error = err;
  out.evals = evals;
  out.converged = err <= std::max(abs_tol, rel_tol * std::abs(total));
  return out;
}

// int_a^b h(lambda) * lambda^{beta-1} dlambda for 0 <= a < b, via u = lambda^beta,
// which removes the endpoint singularity exactly for power-law integrands.
template <class F>
double integrate_power_weight(F&& h, double a, double b, double beta, int n = 32) {
  const double ua = std::pow(a, beta), ub = std::pow(b, beta);
  auto g = [&](double u) { return h(std::pow(u, 1.0 / beta)); };
  return integrate_gl(g, ua, ub, n) / beta;
}

// Panels on the whole line through lambda = scale * atanh(t), t in (-1,1).
struct TanhMapRule {
  int nodes = 96;       // total nodes across all panels (per inner dimension)
  double scale = 2.0;   // map scale; nodes reach |lambda| ~ scale * 5
  int panels = 6;

  std::vector<double> lambda;  // mapped nodes
  std::vector<double> weight;  // mapped weights (include d lambda/dt)

  void build() {
    lambda.clear();
    weight.clear();
    const int per = std::max(2, nodes / panels);
    const double tmax = 0.9999;  // |lambda| <= scale * atanh(0.9999) ~ 4.95*scale
    const auto breaks = linspace_breaks(-tmax, tmax, panels);
    const auto& r = gauss_legendre(per);
    for (int p = 0; p < panels; ++p) {
      const double c = 0.5 * (breaks[p + 1] - breaks[p]);
      const double d = 0.5 * (breaks[p + 1] + breaks[p]);
      for (int i = 0; i < per; ++i) {
        const double t = c * r.x[i] + d;
        lambda.push_back(scale * std::atanh(t));
        weight.push_back(c * r.w[i] * scale / (1.0 - t * t));
      }
    }
  }
};

inline const TanhMapRule& tanh_map_rule(int nodes, double scale, int panels) {
  static std::map<std::tuple<int, double, int>, TanhMapRule> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_tuple(nodes, scale, panels);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  TanhMapRule r;
  r.nodes = nodes;
  r.scale = scale;
  r.panels = panels;
  r.build();
  return cache.emplace(key, std::move(r)).first->second;
}

// Adaptive cubature on a box, dimensions 1..3. Per-box error from a
// GL(4)^d / GL(7)^d pair; boxes split along their widest axis.
template <class F>
QuadResult adaptive_cubature(F&& f, std::vector<double> lo, std::vector<double> hi,
                             double rel_tol = 1e-3, int max_boxes = 20000) {
  const int dim = static_cast<int>(lo.size());
  if (dim < 1 || dim > 3) throw std::invalid_argument("adaptive_cubature: dim must be 1..3");
  struct Box {
    std::array<double, 3> lo, hi;
    double value, error;
    bool operator<(const Box& o) const { return error < o.error; }
  };
  std::size_t evals = 0;
  auto tensor = [&](const Box& b, int n) {
    const auto& r = gauss_legendre(n);
    double acc = 0.0;
    std::array<double, 3> x{};
    const int total = (dim == 1) ? n : (dim == 2 ? n * n : n * n * n);
    for (int idx = 0; idx < total; ++idx) {
      int rem = idx;
      double w = 1.0;
      for (int d = 0; d < dim; ++d) {
        const int i = rem % n;
        rem /= n;
        const double c = 0.5 * (b.hi[d] - b.lo[d]);
        x[d] = c * r.x[i] + 0.5 * (b.hi[d] + b.lo[d]);
        w *= c * r.w[i];
      }
      acc += w * f(x.data());
    }
    evals += total;
    return acc;
  };
  auto estimate = [&](Box b) {
    const double coarse = tensor(b, 4);
    b.value = tensor(b, 7);
    b.error = std::abs(b.value - coarse);
    return b;
  };

  Box root{};
  for (int d = 0; d < dim; ++d) {
    root.lo[d] = lo[d];
    root.hi[d] = hi[d];
  }
  std::priority_queue<Box> heap;
  heap.push(estimate(root));
  double total = heap.top().value, err = heap.top().error;
  int used = 1;
  while (used < max_boxes && err > rel_tol * std::max(std::abs(total), 1e-300)) {
    Box worst = heap.top();
    heap.pop();
    int axis = 0;
    double wmax = 0.0;
    for (int d = 0; d < dim; ++d) {
      const double w = worst.hi[d] - worst.lo[d];
      if (w > wmax) {
        wmax = w;
        axis = d;
      }
    }
    Box l = worst, r = worst;
    const double mid = 0.5 * (worst.lo[axis] + worst.hi[axis]);
    l.hi[axis] = mid;
    r.lo[axis] = mid;
    l = estimate(l);
    r = estimate(r);
    total += l.value + r.value - worst.value;
    err += l.error + r.error - worst.error;
    heap.push(l);
    heap.push(r);
    ++used;
  }
  QuadResult out;
  out.value = total;
  out.error = err;
  out.evals = evals;
  out.converged = err <= rel_tol * std::max(std::abs(total), 1e-300);
  return out;
}

}  // namespace qscat

#endif  // QSCAT_MATH_QUADRATURE_HPP
