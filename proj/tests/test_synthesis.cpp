#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "qscat/parallel.hpp"
#include "qscat/synthesis.hpp"

using namespace qscat;
using Catch::Approx;

namespace {
const SpectralDensity kDensity = make_density("gauss-lrd:beta=0.5");

std::vector<SampledPath> small_ensemble(std::size_t count, const GridSpec& grid,
                                        std::uint64_t master) {
  SpectrumModel model(kDensity, grid);
  std::vector<SampledPath> out(count);
  parallel_for(count, 0, [&](std::size_t i) {
    out[i] = model.synthesize(derive_seed(master, "test-ens", i));
  });
  return out;
}
}  // namespace

TEST_CASE("synthesize: determinism and basic integrity", "[synthesis]") {
  GridSpec grid{1u << 12, 0.125};
  const SampledPath a = synthesize(kDensity, grid, 42);
  const SampledPath b = synthesize(kDensity, grid, 42);
  REQUIRE(a.values.size() == grid.n);
  CHECK(a.values == b.values);  // bit-identical
  const SampledPath c = synthesize(kDensity, grid, 43);
  CHECK(a.values != c.values);
  for (double v : a.values) REQUIRE(std::isfinite(v));

  GridSpec bad{(1u << 12) + 1, 0.125};
  CHECK_THROWS_AS(synthesize(kDensity, bad, 1), std::invalid_argument);
}

TEST_CASE("synthesize: spectral mass conservation", "[synthesis]") {
  GridSpec grid{1u << 14, 0.125};
  SpectrumModel model(kDensity, grid);
  const double quad = integrate_density(kDensity, -grid.nyquist(), grid.nyquist());
  CHECK(model.total_mass() == Approx(quad).epsilon(1e-3));
}

TEST_CASE("synthesize: grid too coarse for the density is rejected", "[synthesis]") {
  GridSpec coarse{1u << 10, 8.0};  // Nyquist ~ 0.39 rad/s
  try {
    SpectrumModel model(kDensity, coarse);
    FAIL("expected coverage error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("Nyquist") != std::string::npos);
  }
}

TEST_CASE("synthesize: ensemble mean and variance match the density", "[synthesis]") {
  GridSpec grid{1u << 12, 0.125};
  const auto ensemble = small_ensemble(400, grid, 777);

  // mean at a fixed time across replicas
  std::vector<double> at_t(ensemble.size());
  const std::size_t idx = grid.n / 2;
  for (std::size_t i = 0; i < ensemble.size(); ++i) at_t[i] = ensemble[i].values[idx];
  const auto ms = mean_and_se(at_t);
  CHECK(std::abs(ms.mean) <= 3.0 * ms.se);

  // lag-0 autocovariance vs quadrature R(0)
  const double r0 = target_autocov(kDensity, std::vector<double>{0.0})[0];
  const std::size_t steps[] = {0};
  const auto est = empirical_autocov_at(ensemble, steps);
  CHECK(std::abs(est.value[0] - r0) <= 3.0 * est.se[0]);
  CHECK(est.se[0] < 0.02 * r0);
}

TEST_CASE("target_autocov: closed forms and two-quadrature agreement", "[synthesis]") {
  // R(0) = integral of the density = Gamma(1/4) for the default catalog entry
  const auto r = target_autocov(kDensity, std::vector<double>{0.0, 1.0, -1.0, 2.0});
  CHECK(r[0] == Approx(3.6256099082219083).epsilon(1e-8));
  CHECK(r[1] == Approx(r[2]).epsilon(1e-12));  // even in the lag
  CHECK(r[0] >= std::abs(r[1]));
  CHECK(r[0] >= std::abs(r[3]));

  // product-integration oracle on a 2^22-cell grid: the smooth factor at the
  // cell midpoint times the exact power-law weight of the cell
  const double L = 32.0;
  const std::size_t n = 1u << 22;
  const double dl = 2.0 * L / static_cast<double>(n);
  const double beta = kDensity.beta;
  auto power_mass = [&](double a, double b) {  // int_a^b |l|^{beta-1} dl, 0 <= a < b
    return (std::pow(b, beta) - std::pow(a, beta)) / beta;
  };
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = -L + static_cast<double>(i) * dl;
    const double b = a + dl;
    const double mid = 0.5 * (a + b);
    const double wgt = (a >= 0.0)   ? power_mass(a, b)
                       : (b <= 0.0) ? power_mass(-b, -a)
                                    : power_mass(0.0, -a) + power_mass(0.0, b);
    acc += std::cos(mid) * kDensity.cx(mid) * wgt;
  }
  CHECK(r[1] == Approx(acc).epsilon(1e-4));

  CHECK_THROWS_AS(target_autocov(kDensity, std::vector<double>{std::nan("")}),
                  std::invalid_argument);
}

TEST_CASE("empirical_autocov: degenerate and definitional cases", "[synthesis]") {
  GridSpec grid{1u << 8, 0.25};
  SampledPath zero;
  zero.values.assign(grid.n, 0.0);
  zero.dt = grid.dt;
  std::vector<SampledPath> zeros(8, zero);
  const auto est = empirical_autocov(zeros, 4);
  for (double v : est.value) CHECK(v == 0.0);

  // grids must match
  SampledPath other = zero;
  other.values.resize(grid.n / 2);
  std::vector<SampledPath> mixed{zero, other};
  CHECK_THROWS_AS(empirical_autocov(mixed, 2), std::invalid_argument);

  // lag 0 equals the (uncentred) ensemble sample variance over the guard band
  GridSpec g2{1u << 12, 0.125};
  const auto ens = small_ensemble(300, g2, 31);
  {
    const std::size_t guard = g2.n / 8;
    std::vector<double> per_path(ens.size());
    for (std::size_t p = 0; p < ens.size(); ++p) {
      double acc = 0.0;
      for (std::size_t i = guard; i < g2.n - guard; ++i)
        acc += ens[p].values[i] * ens[p].values[i];
      per_path[p] = acc / static_cast<double>(g2.n - 2 * guard);
    }
    const std::size_t zero_step[] = {0};
    const auto lag0 = empirical_autocov_at(ens, zero_step);
    CHECK(lag0.value[0] == Approx(mean_and_se(per_path).mean).epsilon(1e-12));
  }
  const std::size_t steps[] = {0, 8, 16};  // lags 0, 1, 2 seconds
  const auto ac = empirical_autocov_at(ens, steps);
  const auto target = target_autocov(kDensity, std::vector<double>{0.0, 1.0, 2.0});
  for (int i = 0; i < 3; ++i) {
    INFO("lag index " << i << ": " << ac.value[i] << " vs " << target[i] << " +- "
                      << ac.se[i]);
    CHECK(std::abs(ac.value[i] - target[i]) <= 3.0 * ac.se[i]);
  }
}

TEST_CASE("path files: binary round trip is exact, csv parses back", "[synthesis]") {
  namespace fs = std::filesystem;
  GridSpec grid{1u << 8, 0.5};
  SampledPath p = synthesize(kDensity, grid, 99);
  const auto dir = fs::temp_directory_path() / "qscat_test_io";
  fs::create_directories(dir);

  const std::string bin = (dir / "path.qsp").string();
  write_path_binary(p, bin);
  const SampledPath q = read_path_binary(bin);
  CHECK(q.values == p.values);
  CHECK(q.dt == p.dt);
  CHECK(q.seed == p.seed);
  CHECK(q.meta.density == p.meta.density);

  const std::string csv = (dir / "path.csv").string();
  write_path_csv(p, csv);
  std::ifstream is(csv);
  std::string header;
  std::getline(is, header);
  CHECK(header == "t,value");
  double t = -1, v = 0;
  char comma = 0;
  is >> t >> comma >> v;
  CHECK(t == Approx(p.t0));
  CHECK(v == Approx(p.values[0]));
  fs::remove_all(dir);
}
