#ifndef QSCAT_SYNTHESIS_HPP
#define QSCAT_SYNTHESIS_HPP

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "qscat/math/fft.hpp"
#include "qscat/math/rng.hpp"
#include "qscat/math/stats.hpp"
#include "qscat/models.hpp"

namespace qscat {

struct GridSpec {
  std::size_t n = 1u << 18;  // power of two
  double dt = 1.0 / 64.0;

  double span() const { return static_cast<double>(n) * dt; }
  double dlambda() const { return 2.0 * M_PI / span(); }
  double nyquist() const { return M_PI / dt; }
  void validate() const {
    if (!is_power_of_two(n) || n < 2)
      throw std::invalid_argument("GridSpec: n must be a power of two >= 2");
    if (!(dt > 0.0)) throw std::invalid_argument("GridSpec: dt must be > 0");
  }
};

struct PathMeta {
  std::string density;
  std::string note;
};

struct SampledPath {
  std::vector<double> values;
  double dt = 1.0;
  double t0 = 0.0;
  std::uint64_t seed = 0;
  PathMeta meta;

  std::size_t size() const { return values.size(); }
  double time_at(std::size_t i) const { return t0 + static_cast<double>(i) * dt; }
};

// Frequency-grid synthesis model for one (density, grid) pair. Per-cell
// spectral masses are integrated once (exact power-law handling at the
// singular cell) and reused across replicas.
class SpectrumModel {
 public:
  SpectrumModel(const SpectralDensity& sd, const GridSpec& grid,
                double coverage_tol = 1e-3)
      : sd_(sd), grid_(grid) {
    grid_.validate();
    const std::size_t n = grid_.n;
    const double dl = grid_.dlambda();
    mass_.assign(n, 0.0);
    // signed index layout: k = 0..n/2 positive side, frequencies lambda = k~ * dl
    for (std::size_t k = 0; k < n; ++k) {
      const long long ks = signed_index(k, n);
      const double la = std::abs(static_cast<double>(ks)) * dl;
      if (ks == 0) {
        mass_[k] = integrate_density(sd_, -0.5 * dl, 0.5 * dl);
      } else {
        mass_[k] = integrate_density(sd_, la - 0.5 * dl, la + 0.5 * dl);
      }
    }
    total_mass_ = 0.0;
    for (double m : mass_) total_mass_ += m;

    // coverage: spectral mass beyond the Nyquist frequency must be negligible
    const double nyq = grid_.nyquist();
    const double full = integrate_density(sd_, 0.0, 8.0 * nyq);
    const double inside = integrate_density(sd_, 0.0, nyq);
    const double tail = (full - inside) / full;
    if (!(tail <= coverage_tol)) {
      std::ostringstream os;
      os << "grid too coarse for density '" << sd_.label << "': fraction "
         << tail << " of spectral mass lies beyond the Nyquist frequency "
         << nyq << " rad/s";
      throw std::invalid_argument(os.str());
    }
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& masses() const { return mass_; }
  double total_mass() const { return total_mass_; }

  // Hermitian-symmetric spectral coefficients: X(t_i) = sum_k c_k e^{i lambda_k t_i}.
  void synthesize_spectrum(std::uint64_t seed, complexd* c) const {
    const std::size_t n = grid_.n;
    RngStream rng(seed);
    c[0] = complexd(std::sqrt(mass_[0]) * rng.normal(), 0.0);
    for (std::size_t k = 1; k < n / 2; ++k) {
      double g1, g2;
      rng.normal_pair(g1, g2);
      const double amp = std::sqrt(0.5 * mass_[k]);
      c[k] = complexd(amp * g1, amp * g2);
      c[n - k] = std::conj(c[k]);
    }
    c[n / 2] = complexd(std::sqrt(mass_[n / 2]) * rng.normal(), 0.0);
  }

  SampledPath synthesize(std::uint64_t seed) const {
    const std::size_t n = grid_.n;
    FftBuffer c(n), x(n);
    synthesize_spectrum(seed, c.data());
    Fft::backward(n, c.data(), x.data());
    SampledPath p;
    p.values.resize(n);
    double imag_sq = 0.0, real_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p.values[i] = x[i].real();
      imag_sq += x[i].imag() * x[i].imag();
      real_sq += x[i].real() * x[i].real();
    }
    if (real_sq > 0.0 && imag_sq > 1e-20 * real_sq)
      throw std::runtime_error("synthesize: non-negligible imaginary residue");
    p.dt = grid_.dt;
    p.t0 = 0.0;
    p.seed = seed;
    p.meta.density = sd_.label;
    return p;
  }

  static long long signed_index(std::size_t k, std::size_t n) {
    return k < n / 2 ? static_cast<long long>(k)
                     : static_cast<long long>(k) - static_cast<long long>(n);
  }

 private:
  SpectralDensity sd_;
  GridSpec grid_;
  std::vector<double> mass_;
  double total_mass_ = 0.0;
};

inline SampledPath synthesize(const SpectralDensity& sd, const GridSpec& grid,
                              std::uint64_t seed) {
  return SpectrumModel(sd, grid).synthesize(seed);
}

// R_X(t) = int e^{i lambda t} f_X(lambda) dlambda by adaptive quadrature with
// the |lambda|^{beta-1} singularity removed by a power-law substitution.
inline std::vector<double> target_autocov(const SpectralDensity& sd,
                                          std::span<const double> lags,
                                          double rel_tol = 1e-8) {
  std::vector<double> out;
  out.reserve(lags.size());
  for (double t : lags) {
    if (!std::isfinite(t)) throw std::invalid_argument("target_autocov: non-finite lag");
    // 2 * int_0^inf cos(lambda t) f(lambda) dlambda
    auto smooth = [&](double u) {
      const double l = std::pow(u, 1.0 / sd.beta);
      return std::cos(l * t) * sd.cx(l);
    };
    QuadResult head = adaptive_integrate(smooth, 0.0, 1.0, rel_tol);
    double acc = head.value / sd.beta;  // int_0^1 via u = lambda^beta
    double err = head.error / sd.beta;
    auto direct = [&](double l) {
      return std::cos(l * t) * sd.cx(l) * std::pow(l, sd.beta - 1.0);
    };
    double lo = 1.0;
    for (int k = 0; k < 60; ++k) {
      const double hi = 2.0 * lo;
      QuadResult seg = adaptive_integrate(direct, lo, hi, rel_tol);
      acc += seg.value;
      err += seg.error;
      lo = hi;
      if (std::abs(seg.value) < 0.25 * rel_tol * std::abs(acc) && k > 3) break;
    }
    if (!(err <= 64.0 * rel_tol * std::max(std::abs(acc), 1e-12)))
      throw QuadratureError("target_autocov: quadrature did not converge",
                            err / std::max(std::abs(acc), 1e-300));
    out.push_back(2.0 * acc);
  }
  return out;
}

struct AutocovEstimate {
  std::vector<std::size_t> lag_steps;
  std::vector<double> value;
  std::vector<double> se;
};

// Ensemble-and-time-averaged autocovariance at selected integer lags; the
// guard band trims wrap-around edges before statistics.
inline AutocovEstimate empirical_autocov_at(std::span<const SampledPath> ensemble,
                                            std::span<const std::size_t> lag_steps,
                                            double guard_frac = 0.125) {
  if (ensemble.empty()) throw std::invalid_argument("empirical_autocov: empty ensemble");
  const std::size_t n = ensemble[0].size();
  const double dt = ensemble[0].dt;
  for (const auto& p : ensemble)
    if (p.size() != n || p.dt != dt)
      throw std::invalid_argument("empirical_autocov: mismatched grids");
  const std::size_t g = static_cast<std::size_t>(guard_frac * static_cast<double>(n));

  AutocovEstimate est;
  est.lag_steps.assign(lag_steps.begin(), lag_steps.end());
  for (std::size_t lag : lag_steps) {
    if (lag >= n) throw std::invalid_argument("empirical_autocov: lag exceeds path length");
    std::vector<double> per_path(ensemble.size());
    for (std::size_t p = 0; p < ensemble.size(); ++p) {
      const auto& x = ensemble[p].values;
      const std::size_t hi = n - g - lag;
      std::vector<double> prod(hi > g ? hi - g : 0);
      for (std::size_t i = g; i < hi; ++i) prod[i - g] = x[i] * x[i + lag];
      per_path[p] = prod.empty() ? 0.0 : pairwise_sum(prod) / static_cast<double>(prod.size());
    }
    const auto ms = mean_and_se(per_path);
    est.value.push_back(ms.mean);
    est.se.push_back(ms.se);
  }
  return est;
}

inline AutocovEstimate empirical_autocov(std::span<const SampledPath> ensemble,
                                         std::size_t max_lag,
                                         double guard_frac = 0.125) {
  std::vector<std::size_t> steps(max_lag + 1);
  for (std::size_t i = 0; i <= max_lag; ++i) steps[i] = i;
  return empirical_autocov_at(ensemble, steps, guard_frac);
}

// ---------------------------------------------------------------------------
// Path files: small binary header + raw doubles, and CSV for inspection.

constexpr char kPathMagic[8] = {'Q', 'S', 'C', 'P', 'A', 'T', 'H', '1'};

inline void write_path_binary(const SampledPath& p, const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open '" + file + "' for writing");
  os.write(kPathMagic, 8);
  const std::uint32_t version = 1;
  const std::uint64_t n = p.values.size();
  const std::uint32_t label_len = static_cast<std::uint32_t>(p.meta.density.size());
  os.write(reinterpret_cast<const char*>(&version), sizeof version);
  os.write(reinterpret_cast<const char*>(&n), sizeof n);
  os.write(reinterpret_cast<const char*>(&p.dt), sizeof p.dt);
  os.write(reinterpret_cast<const char*>(&p.t0), sizeof p.t0);
  os.write(reinterpret_cast<const char*>(&p.seed), sizeof p.seed);
  os.write(reinterpret_cast<const char*>(&label_len), sizeof label_len);
  os.write(p.meta.density.data(), label_len);
  os.write(reinterpret_cast<const char*>(p.values.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
}

inline SampledPath read_path_binary(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + file + "'");
  char magic[8];
  is.read(magic, 8);
  if (std::memcmp(magic, kPathMagic, 8) != 0)
    throw std::runtime_error("'" + file + "': not a path file");
  std::uint32_t version = 0, label_len = 0;
  std::uint64_t n = 0;
  SampledPath p;
  is.read(reinterpret_cast<char*>(&version), sizeof version);
  if (version != 1) throw std::runtime_error("unsupported path file version");
  is.read(reinterpret_cast<char*>(&n), sizeof n);
  is.read(reinterpret_cast<char*>(&p.dt), sizeof p.dt);
  is.read(reinterpret_cast<char*>(&p.t0), sizeof p.t0);
  is.read(reinterpret_cast<char*>(&p.seed), sizeof p.seed);
  is.read(reinterpret_cast<char*>(&label_len), sizeof label_len);
  p.meta.density.resize(label_len);
  is.read(p.meta.density.data(), label_len);
  p.values.resize(n);
  is.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("'" + file + "': truncated path file");
  return p;
}

inline void write_path_csv(const SampledPath& p, const std::string& file) {
  std::ofstream os(file);
  if (!os) throw std::runtime_error("cannot open '" + file + "' for writing");
  os << "t,value\n";
  char buf[64];
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.time_at(i), p.values[i]);
    os << buf;
  }
}

}  // namespace qscat

#endif  // QSCAT_SYNTHESIS_HPP
