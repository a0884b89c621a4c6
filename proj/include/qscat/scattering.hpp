#ifndef QSCAT_SCATTERING_HPP
#define QSCAT_SCATTERING_HPP

#include <cmath>
#include <cstdio>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscat/math/fft.hpp"
#include "qscat/models.hpp"
#include "qscat/synthesis.hpp"

namespace qscat {

struct ScaleVector {
  std::vector<int> j;

  int depth() const { return static_cast<int>(j.size()); }
  int last() const { return j.back(); }
  bool nondecreasing() const {
    for (std::size_t i = 1; i < j.size(); ++i)
      if (j[i] < j[i - 1]) return false;
    return true;
  }
  // Decreasing scale order is legal but usually unintended; warn once per call.
  void validate() const {
    if (j.empty()) throw std::invalid_argument("ScaleVector: depth must be >= 1");
    if (!nondecreasing())
      std::fprintf(stderr,
                   "warning: scale vector is not nondecreasing; later layers "
                   "extract coarser features than earlier ones\n");
  }
};

class SpanError : public std::invalid_argument {
 public:
  SpanError(const std::string& what, int max_feasible_jm)
      : std::invalid_argument(what), max_feasible_jm(max_feasible_jm) {}
  int max_feasible_jm;
};

namespace detail {

// Aliasing check: the scaled filter must be negligible at the grid Nyquist
// frequency relative to its peak on the resolved band.
inline void check_alias(const WaveletSpec& w, int j, double dt, double sup_psi) {
  const double at_nyq = std::abs(w.scaled(j, M_PI / dt));
  if (at_nyq > 1e-9 * sup_psi) {
    std::ostringstream os;
    os << "scale j=" << j << " aliases: |psi_hat_j| at the Nyquist frequency "
       << M_PI / dt << " is " << at_nyq << " (peak " << sup_psi << ")";
    throw std::invalid_argument(os.str());
  }
}

// One pass of the frequency-domain pipeline over preallocated buffers.
// spec holds coefficients c_k with x_i = sum_k c_k e^{2 pi i k i / n}.
class CascadeBuffers {
 public:
  explicit CascadeBuffers(std::size_t n) : n_(n), spec_(n), time_(n) {}

  std::size_t size() const { return n_; }
  complexd* spec() { return spec_.data(); }
  complexd* time() { return time_.data(); }

  void load_path(const SampledPath& p) {
    for (std::size_t i = 0; i < n_; ++i) time_[i] = complexd(p.values[i], 0.0);
    Fft::forward(n_, time_.data(), spec_.data());
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) spec_[i] *= inv;
  }

  void apply_filter(const std::vector<double>& h) {
    for (std::size_t i = 0; i < n_; ++i) spec_[i] *= h[i];
  }

  void to_time() { Fft::backward(n_, spec_.data(), time_.data()); }

  // |x|^2 in time, then back to spectral coefficients.
  void square_time_to_spec() {
    for (std::size_t i = 0; i < n_; ++i) {
      const double v = time_[i].real();
      time_[i] = complexd(v * v, 0.0);
    }
    Fft::forward(n_, time_.data(), spec_.data());
    const double inv = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) spec_[i] *= inv;
  }

 private:
  std::size_t n_;
  FftBuffer spec_;
  FftBuffer time_;
};

inline std::vector<double> filter_values(const WaveletSpec& w, int j,
                                         const GridSpec& grid) {
  const std::size_t n = grid.n;
  const double dl = grid.dlambda();
  std::vector<double> h(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = static_cast<double>(SpectrumModel::signed_index(k, n)) * dl;
    h[k] = w.scaled(j, lam);
  }
  return h;
}

inline SampledPath real_part_path(const SampledPath& src, const complexd* time,
                                  const char* op) {
  SampledPath out;
  out.values.resize(src.size());
  double imag_sq = 0.0, real_sq = 0.0;
  for (std::size_t i = 0; i < src.size(); ++i) {
    out.values[i] = time[i].real();
    imag_sq += time[i].imag() * time[i].imag();
    real_sq += time[i].real() * time[i].real();
  }
  if (real_sq > 0.0 && imag_sq > 1e-20 * real_sq)
    throw std::runtime_error(std::string(op) + ": non-negligible imaginary residue");
  out.dt = src.dt;
  out.t0 = src.t0;
  out.seed = src.seed;
  out.meta = src.meta;
  return out;
}

}  // namespace detail

// X * psi_j as inverse FFT of FFT(X) times psi_hat_j on the grid frequencies.
inline SampledPath wavelet_transform(const SampledPath& path, const WaveletSpec& w,
                                     int j) {
  const std::size_t n = path.size();
  if (!is_power_of_two(n)) throw std::invalid_argument("wavelet_transform: n must be a power of two");
  GridSpec grid{n, path.dt};
  detail::check_alias(w, j, path.dt, psi_hat_sup(w));
  detail::CascadeBuffers buf(n);
  buf.load_path(path);
  buf.apply_filter(detail::filter_values(w, j, grid));
  buf.to_time();
  return detail::real_part_path(path, buf.time(), "wavelet_transform");
}

inline SampledPath stqn_layer(const SampledPath& path, const WaveletSpec& w, int j) {
  SampledPath out = wavelet_transform(path, w, j);
  for (double& v : out.values) v = v * v;
  return out;
}

// Depth-M cascade U[j_1..j_M] = |...| |X*psi_{j1}|^2 ... *psi_{jM}|^2.
inline SampledPath stqn_cascade(const SampledPath& path, const WaveletSpec& w,
                                const ScaleVector& scales) {
  scales.validate();
  SampledPath cur = path;
  for (int j : scales.j) cur = stqn_layer(cur, w, j);
  return cur;
}

// T[j_1..j_M] = U[j_1..j_{M-1}] * psi_{jM}; T[j_1] = X * psi_{j1}.
inline SampledPath t_transform(const SampledPath& path, const WaveletSpec& w,
                               const ScaleVector& scales) {
  scales.validate();
  SampledPath cur = path;
  for (int m = 0; m + 1 < scales.depth(); ++m) cur = stqn_layer(cur, w, scales.j[m]);
  return wavelet_transform(cur, w, scales.last());
}

struct RescaledSamples {
  std::size_t replicas = 0;
  std::size_t ntimes = 0;
  std::vector<double> values;        // row-major replicas x times
  std::vector<double> grid_offsets;  // |2^{jM} t - nearest grid time| per time

  double at(std::size_t r, std::size_t c) const { return values[r * ntimes + c]; }
};

namespace detail {

// Nearest-grid index of the rescaled sample time 2^{jM} t, with guard-band
// span enforcement.
inline std::size_t sample_index(double t, int jm, const SampledPath& p,
                                double guard_frac, double* offset) {
  const double target = std::ldexp(t, jm);
  const double pos = (target - p.t0) / p.dt;
  const long long idx = std::llround(pos);
  const double n = static_cast<double>(p.size());
  const long long g = static_cast<long long>(guard_frac * n);
  if (idx < g || idx > static_cast<long long>(n) - 1 - g) {
    const double usable_hi = p.t0 + (n - 1 - static_cast<double>(g)) * p.dt;
    const int max_jm = static_cast<int>(std::floor(std::log2(usable_hi / std::max(t, 1e-300))));
    std::ostringstream os;
    os << "sample time 2^" << jm << " * " << t << " = " << target
       << " falls outside the guard-banded span [" << p.t0 + g * p.dt << ", "
       << usable_hi << "]; maximum feasible j_M for this grid is " << max_jm;
    throw SpanError(os.str(), max_jm);
  }
  if (offset) *offset = std::abs(pos - static_cast<double>(idx)) * p.dt;
  return static_cast<std::size_t>(idx);
}

}  // namespace detail

// Samples of 2^{jM} U[j_1..j_M]X(2^{jM} t_i), one row per replica.
inline RescaledSamples rescaled_samples(std::span<const SampledPath> ensemble,
                                        const WaveletSpec& w, const ScaleVector& scales,
                                        std::span<const double> times,
                                        double guard_frac = 0.125) {
  scales.validate();
  if (ensemble.empty()) throw std::invalid_argument("rescaled_samples: empty ensemble");
  RescaledSamples out;
  out.replicas = ensemble.size();
  out.ntimes = times.size();
  out.values.resize(out.replicas * out.ntimes);
  out.grid_offsets.assign(times.size(), 0.0);
  const double scale = std::ldexp(1.0, scales.last());
  for (std::size_t r = 0; r < ensemble.size(); ++r) {
    const SampledPath u = stqn_cascade(ensemble[r], w, scales);
    for (std::size_t c = 0; c < times.size(); ++c) {
      const std::size_t idx =
          detail::sample_index(times[c], scales.last(), u, guard_frac,
                               r == 0 ? &out.grid_offsets[c] : nullptr);
      out.values[r * out.ntimes + c] = scale * u.values[idx];
    }
  }
  return out;
}

}  // namespace qscat

#endif  // QSCAT_SCATTERING_HPP
