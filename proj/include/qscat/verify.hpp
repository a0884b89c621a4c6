#ifndef QSCAT_VERIFY_HPP
#define QSCAT_VERIFY_HPP

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscat/limits.hpp"
#include "qscat/math/stats.hpp"
#include "qscat/parallel.hpp"
#include "qscat/scattering.hpp"
#include "qscat/synthesis.hpp"

namespace qscat {

// ---------------------------------------------------------------------------
// Experiment configuration

struct ExperimentConfig {
  std::string density = "gauss-lrd:beta=0.5";
  std::string wavelet = "mexican-hat";
  std::vector<int> scales_prefix{0};  // j_1 .. j_{M-1}
  std::vector<int> jm{8, 9, 10};      // final-scale values to sweep
  std::size_t replicas = 10000;
  std::vector<double> times{2.0, 2.5, 3.0};
  std::uint64_t seed = 20260809;
  std::size_t n = 1u << 18;
  double dt = 1.0 / 64.0;
  bool grid_auto = false;   // pick n per j_M from the resolution rule below
  double min_span = 0.0;    // optional floor on the auto-grid span, seconds
  double guard_frac = 0.125;
  std::size_t threads = 0;
  int bootstrap_resamples = 500;
  std::string out_dir;

  int depth() const { return static_cast<int>(scales_prefix.size()) + 1; }
};

// Auto grids keep the span at least span_scales * 2^{jM} seconds so the
// final-scale filter stays resolved on the frequency grid; grids never drop
// below 2^10 samples.
inline GridSpec grid_for(const ExperimentConfig& cfg, int jm) {
  if (!cfg.grid_auto) return GridSpec{cfg.n, cfg.dt};
  const double span_scales = 8.0;
  double tmax = 0.0;
  for (double t : cfg.times) tmax = std::max(tmax, t);
  const double need_span = std::max(
      {span_scales * std::ldexp(1.0, jm),
       std::ldexp(tmax, jm) / std::max(1e-9, 1.0 - cfg.guard_frac - 0.01),
       cfg.min_span});
  std::size_t n = 1u << 7;
  while (static_cast<double>(n) * cfg.dt < need_span) n <<= 1;
  return GridSpec{n, cfg.dt};
}

inline void validate_experiment(const ExperimentConfig& cfg) {
  if (cfg.replicas < 100)
    throw std::invalid_argument("experiment: replicas must be >= 100");
  if (cfg.times.empty()) throw std::invalid_argument("experiment: times must be nonempty");
  for (double t : cfg.times)
    if (!std::isfinite(t) || t <= 0.0)
      throw std::invalid_argument("experiment: sample times must be finite and positive");
  if (cfg.scales_prefix.empty())
    throw std::invalid_argument("experiment: scales_prefix must have at least one scale");
  if (cfg.jm.empty()) throw std::invalid_argument("experiment: need at least one j_M value");
  if (!(cfg.guard_frac >= 0.0 && cfg.guard_frac < 0.5))
    throw std::invalid_argument("experiment: guard_frac must be in [0, 0.5)");

  const SpectralDensity sd = make_density(cfg.density);
  const WaveletSpec w = make_wavelet(cfg.wavelet);
  ProbeSettings quick;
  quick.points = (1u << 14) + 1;
  quick.j1 = cfg.scales_prefix.front();
  const auto rep = check_assumptions(sd, w, quick);
  if (!rep.passed()) {
    std::ostringstream os;
    os << "experiment: standing assumptions fail for (" << cfg.density << ", "
       << cfg.wavelet << "):\n"
       << rep.describe();
    throw std::invalid_argument(os.str());
  }

  for (int jm : cfg.jm) {
    const GridSpec grid = grid_for(cfg, jm);
    grid.validate();
    const double g = cfg.guard_frac * grid.span();
    for (double t : cfg.times) {
      const double target = std::ldexp(t, jm);
      if (target < g || target > grid.span() - g) {
        std::ostringstream os;
        os << "experiment: sample time 2^" << jm << " * " << t << " = " << target
           << " outside the guard-banded span [" << g << ", " << grid.span() - g
           << "] of the grid (n=" << grid.n << ", dt=" << grid.dt << ")";
        throw std::invalid_argument(os.str());
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Streaming scattering ensemble: synthesize -> cascade -> sample, one replica
// at a time, parallel over replicas with per-replica seed streams.

struct JmEnsemble {
  int jm = 0;
  GridSpec grid;
  std::size_t replicas = 0;
  std::size_t ntimes = 0;
  std::vector<double> u;        // 2^{jM}   * U[j_1..j_M]X(2^{jM} t_c), row-major
  std::vector<double> t;        // 2^{jM/2} * T[j_1..j_M]X(2^{jM} t_c)
  std::vector<double> offsets;  // nearest-grid offsets per time

  std::vector<double> u_column(std::size_t c) const {
    std::vector<double> col(replicas);
    for (std::size_t r = 0; r < replicas; ++r) col[r] = u[r * ntimes + c];
    return col;
  }
};

inline JmEnsemble run_scattering_ensemble(const SpectralDensity& sd,
                                          const WaveletSpec& w,
                                          std::span<const int> scales_prefix, int jm,
                                          const GridSpec& grid,
                                          std::span<const double> times,
                                          std::size_t replicas, std::uint64_t seed,
                                          const std::string& stage,
                                          std::size_t threads, double guard_frac) {
  JmEnsemble out;
  out.jm = jm;
  out.grid = grid;
  out.replicas = replicas;
  out.ntimes = times.size();
  out.u.assign(replicas * times.size(), 0.0);
  out.t.assign(replicas * times.size(), 0.0);
  out.offsets.assign(times.size(), 0.0);

  const std::size_t n = grid.n;
  SpectrumModel model(sd, grid);

  std::vector<int> scales(scales_prefix.begin(), scales_prefix.end());
  scales.push_back(jm);
  std::vector<std::vector<double>> filters;
  for (int j : scales) {
    detail::check_alias(w, j, grid.dt, psi_hat_sup(w));
    filters.push_back(detail::filter_values(w, j, grid));
  }

  // sample indices with the guard-band span check
  std::vector<std::size_t> idx(times.size());
  const std::size_t g = static_cast<std::size_t>(guard_frac * static_cast<double>(n));
  for (std::size_t c = 0; c < times.size(); ++c) {
    const double pos = std::ldexp(times[c], jm) / grid.dt;
    const long long i = std::llround(pos);
    if (i < static_cast<long long>(g) || i > static_cast<long long>(n - 1 - g)) {
      const int max_jm = static_cast<int>(
          std::floor(std::log2((static_cast<double>(n - 1 - g) * grid.dt) / times[c])));
      std::ostringstream os;
      os << "ensemble: sample time 2^" << jm << " * " << times[c]
         << " outside the guard-banded span; maximum feasible j_M is " << max_jm;
      throw SpanError(os.str(), max_jm);
    }
    idx[c] = static_cast<std::size_t>(i);
    out.offsets[c] = std::abs(pos - static_cast<double>(i)) * grid.dt;
  }

  const double u_scale = std::ldexp(1.0, jm);
  const double t_scale = std::pow(2.0, 0.5 * static_cast<double>(jm));
  parallel_for(replicas, threads, [&](std::size_t r) {
    thread_local std::unique_ptr<detail::CascadeBuffers> buf;
    if (!buf || buf->size() != n) buf = std::make_unique<detail::CascadeBuffers>(n);
    model.synthesize_spectrum(derive_seed(seed, stage, r), buf->spec());
    for (std::size_t m = 0; m < filters.size(); ++m) {
      buf->apply_filter(filters[m]);
      buf->to_time();
      if (m + 1 < filters.size()) {
        buf->square_time_to_spec();
      } else {
        for (std::size_t c = 0; c < idx.size(); ++c) {
          const double tv = buf->time()[idx[c]].real();
          out.t[r * idx.size() + c] = t_scale * tv;
          out.u[r * idx.size() + c] = u_scale * tv * tv;
        }
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Distribution test against the squared-normal limit law

struct RateFit {
  double slope = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t excluded = 0;
  bool valid = false;
};

// Least-squares slope of log2(distance) against j_M; the confidence interval
// comes from refitting under Gaussian perturbations of the distances by their
// standard errors. Nonpositive distances are excluded with a count.
inline RateFit rate_fit(std::span<const double> jm, std::span<const double> dist,
                        std::span<const double> se = {}, int resamples = 500,
                        std::uint64_t seed = 1) {
  std::vector<double> x, y, s;
  RateFit out;
  for (std::size_t i = 0; i < jm.size(); ++i) {
    if (!(dist[i] > 0.0)) {
      ++out.excluded;
      continue;
    }
    x.push_back(jm[i]);
    y.push_back(std::log2(dist[i]));
    s.push_back(se.empty() ? 0.0 : se[i]);
  }
  if (x.size() < 3) return out;  // need >= 3 points
  out.slope = ols_fit(x, y).slope;
  out.valid = true;

  bool any_se = false;
  for (double v : s) any_se = any_se || v > 0.0;
  if (!any_se) {
    out.lo = out.hi = out.slope;
    return out;
  }
  RngStream rng = make_stream(seed, "rate-fit-boot", 0);
  std::vector<double> slopes;
  std::vector<double> yy(x.size());
  for (int b = 0; b < resamples; ++b) {
    bool ok = true;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = std::exp2(y[i]) + s[i] * rng.normal();
      if (!(d > 0.0)) {
        ok = false;
        break;
      }
      yy[i] = std::log2(d);
    }
    if (ok) slopes.push_back(ols_fit(x, yy).slope);
  }
  if (slopes.size() < 16) return out;
  std::sort(slopes.begin(), slopes.end());
  out.lo = slopes[static_cast<std::size_t>(0.025 * (slopes.size() - 1))];
  out.hi = slopes[static_cast<std::size_t>(0.975 * (slopes.size() - 1))];
  return out;
}

struct DistanceEntry {
  int jm = 0;
  double ks = 0.0, ks_se = 0.0;        // asymptotic normalization
  double w1 = 0.0, w1_se = 0.0;
  double ks_sigma = 0.0, ks_sigma_se = 0.0;  // finite-scale sigma^2 view
  double mean_u = 0.0, mean_u_se = 0.0;      // mean of 2^{jM} U
  double sigma2_scaled = 0.0;                // 2^{jM} sigma^2_{jM}
  double sigma2_scaled_err = 0.0;            // quadrature tolerance or SE
  double tv_bound = 0.0;                     // depth 2 only, else 0
  double tv_bound_err = 0.0;
};

struct DistanceReport {
  std::vector<DistanceEntry> per_jm;
  RateFit ks_slope;
  double kappa = 0.0;
  double psi_hat_l2 = 0.0;
  double limit_variance = 0.0;
};

namespace detail {

struct DistanceWithSe {
  double value, se;
};

template <class Stat>
DistanceWithSe stat_with_bootstrap(std::span<const double> samples, Stat&& stat,
                                   int resamples, RngStream rng) {
  DistanceWithSe out;
  out.value = stat(samples);
  out.se = bootstrap_se(samples, stat, resamples, rng);
  return out;
}

}  // namespace detail

// Samples 2^{jM} U / (kappa ||psi_hat||^2) against the chi-square(1) law.
// The finite-scale view normalizes by sigma^2_{jM} instead (quadrature at
// depth 2, the ensemble mean otherwise); both are reported.
inline DistanceReport run_distribution_test(const ExperimentConfig& cfg,
                                            std::vector<JmEnsemble>* keep = nullptr) {
  validate_experiment(cfg);
  const SpectralDensity sd = make_density(cfg.density);
  const WaveletSpec w = make_wavelet(cfg.wavelet);
  const int M = cfg.depth();

  const auto lc = kappa_and_limits(sd, w, cfg.scales_prefix, M);
  DistanceReport rep;
  rep.kappa = lc.kappa;
  rep.psi_hat_l2 = lc.psi_hat_l2;
  rep.limit_variance = lc.limit_variance;

  auto ks_stat = [](std::span<const double> v) {
    return ks_distance(std::vector<double>(v.begin(), v.end()), Chi2Law::cdf);
  };
  auto w1_stat = [](std::span<const double> v) {
    return w1_distance(std::vector<double>(v.begin(), v.end()), Chi2Law());
  };

  for (int jm : cfg.jm) {
    const GridSpec grid = grid_for(cfg, jm);
    const auto ens = run_scattering_ensemble(sd, w, cfg.scales_prefix, jm, grid,
                                             cfg.times, cfg.replicas, cfg.seed,
                                             "dist:j" + std::to_string(jm),
                                             cfg.threads, cfg.guard_frac);
    const std::vector<double> col = ens.u_column(0);

    DistanceEntry e;
    e.jm = jm;
    const auto mu = mean_and_se(col);
    e.mean_u = mu.mean;
    e.mean_u_se = mu.se;

    std::vector<double> norm(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) norm[i] = col[i] / lc.limit_variance;
    const auto ks = detail::stat_with_bootstrap(
        norm, ks_stat, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-ks", static_cast<std::uint64_t>(jm)));
    e.ks = ks.value;
    e.ks_se = ks.se;
    const auto w1 = detail::stat_with_bootstrap(
        norm, w1_stat, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-w1", static_cast<std::uint64_t>(jm)));
    e.w1 = w1.value;
    e.w1_se = w1.se;

    if (M == 2) {
      const std::vector<int> scales{cfg.scales_prefix[0], jm};
      const auto s2 = sigma_finite(sd, w, scales, SigmaMode::Quadrature);
      e.sigma2_scaled = std::ldexp(s2.value, jm);
      e.sigma2_scaled_err = std::ldexp(s2.error, jm);
      const auto tv = tv_bound_m2_with_error(sd, w, cfg.scales_prefix[0], jm);
      e.tv_bound = tv.value;
      e.tv_bound_err = tv.error;
    } else {
      e.sigma2_scaled = mu.mean;  // Monte Carlo estimate of 2^{jM} E U
      e.sigma2_scaled_err = mu.se;
    }
    std::vector<double> norm2(col.size());
    for (std::size_t i = 0; i < col.size(); ++i) norm2[i] = col[i] / e.sigma2_scaled;
    const auto ks2 = detail::stat_with_bootstrap(
        norm2, ks_stat, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-ks-sigma", static_cast<std::uint64_t>(jm)));
    e.ks_sigma = ks2.value;
    e.ks_sigma_se = ks2.se;

    rep.per_jm.push_back(e);
    if (keep) keep->push_back(ens);
  }

  std::vector<double> js, ks, se;
  for (const auto& e : rep.per_jm) {
    js.push_back(e.jm);
    ks.push_back(e.ks);
    se.push_back(e.ks_se);
  }
  rep.ks_slope = rate_fit(js, ks, se, cfg.bootstrap_resamples,
                          derive_seed(cfg.seed, "rate-fit"));
  return rep;
}

// ---------------------------------------------------------------------------
// Covariance tests

struct CovMatrixCheck {
  int jm = 0;
  std::size_t d = 0;
  std::vector<double> emp, se, analytic, z;  // d x d, row-major
  double max_abs_z() const {
    double m = 0.0;
    for (double v : z) m = std::max(m, std::abs(v));
    return m;
  }
};

namespace detail {

inline CovMatrixCheck covariance_check(std::span<const double> data, std::size_t rows,
                                       std::size_t cols,
                                       const std::vector<double>& analytic,
                                       int resamples, RngStream rng) {
  CovMatrixCheck c;
  c.d = cols;
  c.emp = covariance_matrix(data, rows, cols);
  c.analytic = analytic;
  // bootstrap over replicas for entrywise standard errors
  std::vector<double> resampled(rows * cols);
  std::vector<std::vector<double>> draws(resamples);
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t pick = rng.index(rows);
      for (std::size_t k = 0; k < cols; ++k)
        resampled[r * cols + k] = data[pick * cols + k];
    }
    draws[b] = covariance_matrix(resampled, rows, cols);
  }
  c.se.assign(cols * cols, 0.0);
  c.z.assign(cols * cols, 0.0);
  std::vector<double> buf(resamples);
  for (std::size_t e = 0; e < cols * cols; ++e) {
    for (int b = 0; b < resamples; ++b) buf[b] = draws[b][e];
    const auto ms = mean_and_se(buf);
    c.se[e] = ms.se * std::sqrt(static_cast<double>(resamples));  // sample sd
    c.z[e] = (c.emp[e] - analytic[e]) / std::max(c.se[e], 1e-300);
  }
  return c;
}

}  // namespace detail

struct CovReport {
  std::vector<CovMatrixCheck> u_check;  // rescaled squared output vs limit law
  std::vector<CovMatrixCheck> t_check;  // pre-squaring transform vs limit law
  double diag_limit = 0.0;              // 2 kappa^2 ||psi_hat||^4
};

inline CovReport run_covariance_test(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  if (cfg.times.size() < 2)
    throw std::invalid_argument("covariance test: need at least 2 sample times");
  const SpectralDensity sd = make_density(cfg.density);
  const WaveletSpec w = make_wavelet(cfg.wavelet);

  const auto lc = kappa_and_limits(sd, w, cfg.scales_prefix, cfg.depth());
  const std::size_t d = cfg.times.size();
  std::vector<double> cov_u(d * d), cov_t(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double delta = cfg.times[i] - cfg.times[j];
      cov_t[i * d + j] = limit_cov_G(lc, w, delta);
      cov_u[i * d + j] = limit_cov_Gsq(lc, w, delta);
    }

  CovReport rep;
  rep.diag_limit = 2.0 * lc.limit_variance * lc.limit_variance;
  for (int jm : cfg.jm) {
    const auto ens = run_scattering_ensemble(sd, w, cfg.scales_prefix, jm,
                                             grid_for(cfg, jm), cfg.times,
                                             cfg.replicas, cfg.seed,
                                             "cov:j" + std::to_string(jm),
                                             cfg.threads, cfg.guard_frac);
    auto cu = detail::covariance_check(
        ens.u, ens.replicas, d, cov_u, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-cov-u", static_cast<std::uint64_t>(jm)));
    auto ct = detail::covariance_check(
        ens.t, ens.replicas, d, cov_t, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-cov-t", static_cast<std::uint64_t>(jm)));
    cu.jm = ct.jm = jm;
    rep.u_check.push_back(std::move(cu));
    rep.t_check.push_back(std::move(ct));
  }
  return rep;
}

struct FiniteCovReport {
  std::vector<CovMatrixCheck> t_check;  // against the finite-scale quadrature
  std::vector<double> gap_to_limit;     // max-entry |C_{jM} - C_inf| per jM
  bool gaps_decreasing = false;
};

inline FiniteCovReport run_finite_cov_check(const ExperimentConfig& cfg) {
  validate_experiment(cfg);
  if (cfg.depth() != 2)
    throw std::invalid_argument(
        "finite covariance check: supported at depth M=2 only (quadrature-certifiable)");
  if (cfg.times.size() < 2)
    throw std::invalid_argument("finite covariance check: need at least 2 sample times");
  const SpectralDensity sd = make_density(cfg.density);
  const WaveletSpec w = make_wavelet(cfg.wavelet);
  const int j1 = cfg.scales_prefix[0];
  const std::size_t d = cfg.times.size();

  FiniteCovReport rep;
  for (int jm : cfg.jm) {
    std::vector<double> cj(d * d);
    double gap = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = cfg.times[i] - cfg.times[j];
        cj[i * d + j] = finite_cov_m2(sd, w, j1, jm, delta);
        gap = std::max(gap, std::abs(finite_cov_m2_gap(sd, w, j1, jm, delta)));
      }
    const auto ens = run_scattering_ensemble(sd, w, cfg.scales_prefix, jm,
                                             grid_for(cfg, jm), cfg.times,
                                             cfg.replicas, cfg.seed,
                                             "fcov:j" + std::to_string(jm),
                                             cfg.threads, cfg.guard_frac);
    auto ct = detail::covariance_check(
        ens.t, ens.replicas, d, cj, cfg.bootstrap_resamples,
        make_stream(cfg.seed, "boot-fcov", static_cast<std::uint64_t>(jm)));
    ct.jm = jm;
    rep.t_check.push_back(std::move(ct));
    rep.gap_to_limit.push_back(gap);
  }
  rep.gaps_decreasing = true;
  for (std::size_t i = 1; i < rep.gap_to_limit.size(); ++i)
    rep.gaps_decreasing =
        rep.gaps_decreasing && rep.gap_to_limit[i] < rep.gap_to_limit[i - 1];
  return rep;
}

}  // namespace qscat

#endif  // QSCAT_VERIFY_HPP
