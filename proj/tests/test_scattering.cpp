#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "qscat/parallel.hpp"
#include "qscat/scattering.hpp"
#include "qscat/synthesis.hpp"

using namespace qscat;
using Catch::Approx;

namespace {
const SpectralDensity kDensity = make_density("gauss-lrd:beta=0.5");
const WaveletSpec kWavelet = make_wavelet("mexican-hat");

SampledPath make_path(std::vector<double> v, double dt) {
  SampledPath p;
  p.values = std::move(v);
  p.dt = dt;
  return p;
}

double rel_max_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double scale = 1e-300, diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    scale = std::max(scale, std::abs(a[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}
}  // namespace

TEST_CASE("wavelet_transform: mean-zero filter kills constants", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  SampledPath c = make_path(std::vector<double>(grid.n, 3.7), grid.dt);
  const SampledPath y = wavelet_transform(c, kWavelet, 1);
  for (double v : y.values) REQUIRE(std::abs(v) <= 1e-10 * 3.7);
}

TEST_CASE("wavelet_transform: linearity to machine precision", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  const SampledPath x = synthesize(kDensity, grid, 5);
  const SampledPath y = synthesize(kDensity, grid, 6);
  SampledPath z = x;
  for (std::size_t i = 0; i < grid.n; ++i) z.values[i] = 2.0 * x.values[i] - 0.5 * y.values[i];
  const auto tx = wavelet_transform(x, kWavelet, 2);
  const auto ty = wavelet_transform(y, kWavelet, 2);
  const auto tz = wavelet_transform(z, kWavelet, 2);
  std::vector<double> lin(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) lin[i] = 2.0 * tx.values[i] - 0.5 * ty.values[i];
  CHECK(rel_max_diff(tz.values, lin) < 1e-12);
}

TEST_CASE("wavelet_transform: pure tone picks up |psi_hat(2^j l0)|", "[scattering]") {
  GridSpec grid{1u << 12, 0.125};
  const double l0 = 64.0 * grid.dlambda();  // exactly on the frequency grid
  std::vector<double> v(grid.n);
  for (std::size_t i = 0; i < grid.n; ++i) v[i] = std::cos(l0 * grid.dt * static_cast<double>(i));
  const SampledPath tone = make_path(std::move(v), grid.dt);
  for (int j : {0, 1, 3}) {
    const double gain = kWavelet.scaled(j, l0);
    const SampledPath y = wavelet_transform(tone, kWavelet, j);
    double err = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i)
      err = std::max(err, std::abs(y.values[i] -
                                   gain * std::cos(l0 * grid.dt * static_cast<double>(i))));
    CHECK(err < 1e-10 * std::max(std::abs(gain), 1e-3));
  }
}

TEST_CASE("wavelet_transform: filtering is exactly diagonal in frequency", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  const SampledPath x = synthesize(kDensity, grid, 11);
  const SampledPath y = wavelet_transform(x, kWavelet, 2);
  const std::size_t n = grid.n;
  FftBuffer bx(n), fx(n), by(n), fy(n);
  for (std::size_t i = 0; i < n; ++i) {
    bx[i] = complexd(x.values[i], 0.0);
    by[i] = complexd(y.values[i], 0.0);
  }
  Fft::forward(n, bx.data(), fx.data());
  Fft::forward(n, by.data(), fy.data());
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = static_cast<double>(SpectrumModel::signed_index(k, n)) * grid.dlambda();
    num += std::norm(fy[k] - fx[k] * kWavelet.scaled(2, lam));
    den += std::norm(fx[k]);
  }
  CHECK(std::sqrt(num / den) < 1e-12);
}

TEST_CASE("wavelet_transform: aliasing scale is rejected by name", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  const SampledPath x = synthesize(kDensity, grid, 12);
  try {
    wavelet_transform(x, kWavelet, -6);
    FAIL("expected aliasing error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("j=-6") != std::string::npos);
  }
}

TEST_CASE("stqn_layer: zero in, zero out, nonnegative everywhere", "[scattering]") {
  GridSpec grid{1u << 9, 0.25};
  SampledPath zero = make_path(std::vector<double>(grid.n, 0.0), grid.dt);
  const SampledPath u0 = stqn_layer(zero, kWavelet, 1);
  for (double v : u0.values) REQUIRE(v == 0.0);
  const SampledPath x = synthesize(kDensity, grid, 17);
  const SampledPath u = stqn_layer(x, kWavelet, 1);
  for (double v : u.values) REQUIRE(v >= 0.0);
}

TEST_CASE("cascade structure: depth-1 reductions and U = |T|^2", "[scattering]") {
  GridSpec grid{1u << 11, 0.125};
  const SampledPath x = synthesize(kDensity, grid, 23);

  const ScaleVector s1{{0}};
  CHECK(rel_max_diff(stqn_cascade(x, kWavelet, s1).values,
                     stqn_layer(x, kWavelet, 0).values) == 0.0);
  CHECK(rel_max_diff(t_transform(x, kWavelet, s1).values,
                     wavelet_transform(x, kWavelet, 0).values) == 0.0);

  for (const ScaleVector scales : {ScaleVector{{0}}, ScaleVector{{0, 2}}, ScaleVector{{0, 1, 3}}}) {
    const SampledPath u = stqn_cascade(x, kWavelet, scales);
    const SampledPath t = t_transform(x, kWavelet, scales);
    double rel = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < grid.n; ++i) {
      scale = std::max(scale, std::abs(u.values[i]));
      rel = std::max(rel, std::abs(u.values[i] - t.values[i] * t.values[i]));
    }
    CHECK(rel / scale < 1e-10);
  }
}

TEST_CASE("cascade is shift-equivariant on the periodic grid", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  const SampledPath x = synthesize(kDensity, grid, 29);
  const std::size_t k = 137;
  SampledPath xs = x;
  std::rotate_copy(x.values.begin(), x.values.begin() + k, x.values.end(),
                   xs.values.begin());
  const ScaleVector scales{{0, 2}};
  const SampledPath a = stqn_cascade(xs, kWavelet, scales);
  SampledPath b = stqn_cascade(x, kWavelet, scales);
  std::vector<double> bs(grid.n);
  std::rotate_copy(b.values.begin(), b.values.begin() + k, b.values.end(), bs.begin());
  CHECK(rel_max_diff(a.values, bs) < 1e-9);
}

TEST_CASE("first-layer mean matches the filtered-density L1 norm", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  SpectrumModel model(kDensity, grid);
  const std::size_t replicas = 800;
  std::vector<double> u_at_t(replicas);
  const std::size_t idx = grid.n / 2;
  parallel_for(replicas, 0, [&](std::size_t r) {
    const SampledPath x = model.synthesize(derive_seed(4242, "layer1", r));
    u_at_t[r] = stqn_layer(x, kWavelet, 0).values[idx];
  });
  const auto ms = mean_and_se(u_at_t);
  const double l1 = filtered_l1(kDensity, kWavelet, 0);
  INFO("mc " << ms.mean << " +- " << ms.se << " vs quadrature " << l1);
  CHECK(std::abs(ms.mean - l1) <= 3.0 * ms.se);
}

TEST_CASE("transform before squaring has mean zero", "[scattering]") {
  GridSpec grid{1u << 10, 0.125};
  SpectrumModel model(kDensity, grid);
  const std::size_t replicas = 600;
  std::vector<double> t_at(replicas);
  const std::size_t idx = grid.n / 3;
  const ScaleVector scales{{0, 2}};
  parallel_for(replicas, 0, [&](std::size_t r) {
    const SampledPath x = model.synthesize(derive_seed(555, "tmean", r));
    t_at[r] = t_transform(x, kWavelet, scales).values[idx];
  });
  const auto ms = mean_and_se(t_at);
  CHECK(std::abs(ms.mean) <= 3.0 * ms.se);
}

TEST_CASE("stationarity probe: window means agree within 3 SE", "[scattering]") {
  GridSpec grid{1u << 11, 0.125};
  SpectrumModel model(kDensity, grid);
  const std::size_t replicas = 200, windows = 4;
  const std::size_t g = grid.n / 8;
  const std::size_t wlen = (grid.n - 2 * g) / windows;
  std::vector<std::vector<double>> wmean(windows, std::vector<double>(replicas));
  parallel_for(replicas, 0, [&](std::size_t r) {
    const SampledPath x = model.synthesize(derive_seed(808, "stat", r));
    const SampledPath u = stqn_layer(x, kWavelet, 1);
    for (std::size_t wi = 0; wi < windows; ++wi) {
      double acc = 0.0;
      for (std::size_t i = 0; i < wlen; ++i) acc += u.values[g + wi * wlen + i];
      wmean[wi][r] = acc / static_cast<double>(wlen);
    }
  });
  const auto m0 = mean_and_se(wmean[0]);
  for (std::size_t wi = 1; wi < windows; ++wi) {
    const auto mi = mean_and_se(wmean[wi]);
    const double z = std::abs(mi.mean - m0.mean) /
                     std::sqrt(mi.se * mi.se + m0.se * m0.se);
    CHECK(z <= 3.0);
  }
}

TEST_CASE("rescaled_samples: shape, duplicates, span errors", "[scattering]") {
  GridSpec grid{1u << 12, 0.125};  // span 512 s
  SpectrumModel model(kDensity, grid);
  std::vector<SampledPath> ens(6);
  for (std::size_t i = 0; i < ens.size(); ++i)
    ens[i] = model.synthesize(derive_seed(1001, "rs", i));

  const ScaleVector scales{{0, 4}};
  const std::vector<double> times{5.0, 8.0, 5.0};
  const auto rs = rescaled_samples(ens, kWavelet, scales, times);
  REQUIRE(rs.replicas == ens.size());
  REQUIRE(rs.ntimes == 3);
  for (double v : rs.values) CHECK(v >= 0.0);
  for (std::size_t r = 0; r < rs.replicas; ++r)
    CHECK(rs.at(r, 0) == rs.at(r, 2));  // duplicated time -> identical columns
  for (double off : rs.grid_offsets) CHECK(off <= 0.5 * grid.dt);

  // 2^10 * 5 = 5120 s falls outside the guard-banded span
  try {
    rescaled_samples(ens, kWavelet, ScaleVector{{0, 10}}, times);
    FAIL("expected span error");
  } catch (const SpanError& e) {
    CHECK(e.max_feasible_jm < 10);
    CHECK(std::string(e.what()).find("maximum feasible") != std::string::npos);
  }
}
