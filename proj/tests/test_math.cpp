#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "qscat/math/fft.hpp"
#include "qscat/math/gauss_legendre.hpp"
#include "qscat/math/qmc.hpp"
#include "qscat/math/quadrature.hpp"
#include "qscat/math/rng.hpp"
#include "qscat/math/stats.hpp"
#include "qscat/parallel.hpp"

using namespace qscat;
using Catch::Approx;

TEST_CASE("Gauss-Legendre integrates polynomials to machine precision", "[math]") {
  // degree 2n-1 exactness
  auto f = [](double x) { return 5 * x * x * x * x - x * x + 3 * x + 2; };
  const double exact = 2.0 * (5.0 / 5.0 - 1.0 / 3.0 + 2.0);
  CHECK(integrate_gl(f, -1.0, 1.0, 3) == Approx(exact).epsilon(1e-14));
  CHECK(integrate_gl([](double x) { return std::exp(-x * x); }, -8.0, 8.0, 64) ==
        Approx(std::sqrt(M_PI)).epsilon(1e-13));
}

TEST_CASE("adaptive quadrature handles peaked integrands", "[math]") {
  auto f = [](double x) { return std::exp(-200.0 * (x - 0.3) * (x - 0.3)); };
  const double exact = std::sqrt(M_PI / 200.0);
  auto r = adaptive_integrate(f, -4.0, 4.0, 1e-10);
  CHECK(r.converged);
  CHECK(r.value == Approx(exact).epsilon(1e-9));
}

TEST_CASE("power-law substitution removes the endpoint singularity", "[math]") {
  // int_0^1 x^{beta-1} dx = 1/beta, exact for constant h
  CHECK(integrate_power_weight([](double) { return 1.0; }, 0.0, 1.0, 0.3) ==
        Approx(1.0 / 0.3).epsilon(1e-13));
  // int_0^2 cos(x) x^{-1/2} dx
  auto ref = adaptive_integrate(
      [](double u) { return 2.0 * std::cos(u * u); }, 0.0, std::sqrt(2.0), 1e-12);
  CHECK(integrate_power_weight([](double x) { return std::cos(x); }, 0.0, 2.0, 0.5, 48) ==
        Approx(ref.value).epsilon(1e-10));
}

TEST_CASE("tanh-mapped panels integrate over the whole line", "[math]") {
  const auto& rule = tanh_map_rule(96, 2.0, 6);
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.lambda.size(); ++i)
    acc += rule.weight[i] * std::exp(-rule.lambda[i] * rule.lambda[i]);
  CHECK(acc == Approx(std::sqrt(M_PI)).epsilon(1e-8));
}

TEST_CASE("adaptive cubature matches separable products", "[math]") {
  auto f = [](const double* x) {
    return std::exp(-x[0] * x[0] - 2.0 * x[1] * x[1] - 0.5 * x[2] * x[2]);
  };
  const double exact = std::sqrt(M_PI) * std::sqrt(M_PI / 2.0) * std::sqrt(2.0 * M_PI);
  auto r = adaptive_cubature(f, {-6, -6, -6}, {6, 6, 6}, 1e-5);
  CHECK(r.converged);
  CHECK(r.value == Approx(exact).epsilon(1e-4));
}

TEST_CASE("Sobol points beat plain averaging on a smooth box integral", "[math]") {
  auto f = [](const double* x) {
    return std::sin(x[0]) * std::cos(0.5 * x[1]) + x[2] * x[2] * x[3];
  };
  std::vector<double> lo{0, 0, 0, 0}, hi{1, 1, 1, 1};
  auto q = qmc_integrate_box(f, lo, hi, 1 << 16, 42);
  const double exact =
      (1.0 - std::cos(1.0)) * 2.0 * std::sin(0.5) + (1.0 / 3.0) * 0.5;
  CHECK(q.value == Approx(exact).margin(5e-5));
  CHECK(q.error < 5e-5);
}

TEST_CASE("rng streams are deterministic and scheduling-independent", "[math]") {
  RngStream a = make_stream(123, "stage", 7);
  RngStream b = make_stream(123, "stage", 7);
  for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
  RngStream c = make_stream(123, "stage", 8);
  CHECK(make_stream(123, "stage", 7).next_u64() != c.next_u64());

  // normals have roughly unit variance
  RngStream g(99);
  double s = 0, s2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double x = g.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.02);
  CHECK(s2 / n == Approx(1.0).margin(0.03));
}

TEST_CASE("pairwise summation is independent of worker count", "[math]") {
  std::vector<double> slots(1000);
  for (std::size_t threads : {1u, 3u, 7u}) {
    std::fill(slots.begin(), slots.end(), 0.0);
    parallel_for(slots.size(), threads, [&](std::size_t i) {
      slots[i] = std::sin(0.1 * static_cast<double>(i));
    });
    static double reference = 0.0;
    const double total = pairwise_sum(slots);
    if (threads == 1u)
      reference = total;
    else
      REQUIRE(total == reference);  // bitwise
  }
}

TEST_CASE("chi-square(1) law: cdf, integral, quantile agree", "[math]") {
  CHECK(Chi2Law::cdf(1.0) == Approx(std::erf(std::sqrt(0.5))).epsilon(1e-15));
  // d/dx cdf_integral = cdf (finite difference)
  const double x = 1.7, h = 1e-6;
  CHECK((Chi2Law::cdf_integral(x + h) - Chi2Law::cdf_integral(x - h)) / (2 * h) ==
        Approx(Chi2Law::cdf(x)).epsilon(1e-7));
  CHECK(Chi2Law::cdf(Chi2Law::quantile(0.3)) == Approx(0.3).epsilon(1e-10));
  // partial mean tends to the full mean 1
  CHECK(Chi2Law::partial_mean(200.0) == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("KS and W1 distances behave on known inputs", "[math]") {
  // exact quantile grid: distances nearly zero
  std::vector<double> s;
  const int n = 4000;
  for (int i = 0; i < n; ++i)
    s.push_back(Chi2Law::quantile((i + 0.5) / n));
  CHECK(ks_distance(s, Chi2Law::cdf) < 1.0 / n + 1e-9);
  CHECK(w1_distance(s, Chi2Law()) < 2e-3);

  // shifting samples by c moves W1 by exactly c
  std::vector<double> sh = s;
  for (double& v : sh) v += 0.25;
  CHECK(w1_distance(sh, Chi2Law()) == Approx(0.25).margin(3e-3));
}

TEST_CASE("bootstrap standard error of the mean matches the analytic one", "[math]") {
  RngStream g(1234);
  std::vector<double> s(5000);
  for (double& v : s) v = g.normal();
  const auto ms = mean_and_se(s);
  auto stat = [](std::span<const double> v) { return mean_and_se(v).mean; };
  const double se = bootstrap_se(s, stat, 600, make_stream(9, "boot", 0));
  CHECK(se == Approx(ms.se).epsilon(0.12));
}

TEST_CASE("ols fit recovers exact lines", "[math]") {
  std::vector<double> x{4, 6, 8, 10}, y;
  for (double xi : x) y.push_back(3.0 - 0.5 * xi);
  const auto f = ols_fit(x, y);
  CHECK(f.slope == Approx(-0.5).epsilon(1e-13));
  CHECK(f.intercept == Approx(3.0).epsilon(1e-12));
}

TEST_CASE("fft wrapper: forward/backward round trip and unitarity", "[math]") {
  const std::size_t n = 1024;
  FftBuffer a(n), b(n), c(n);
  RngStream g(5);
  for (std::size_t i = 0; i < n; ++i) a[i] = complexd(g.normal(), g.normal());
  Fft::forward(n, a.data(), b.data());
  Fft::backward(n, b.data(), c.data());
  for (std::size_t i = 0; i < n; i += 37)
    REQUIRE(std::abs(c[i] / static_cast<double>(n) - a[i]) < 1e-12);
}
