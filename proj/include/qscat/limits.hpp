#ifndef QSCAT_LIMITS_HPP
#define QSCAT_LIMITS_HPP

#include <cmath>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscat/chaos.hpp"
#include "qscat/math/qmc.hpp"
#include "qscat/math/quadrature.hpp"
#include "qscat/models.hpp"

namespace qscat {

struct CConstant {
  int order = 0;  // M_r
  double value = 0.0;
  double error = 0.0;
};

struct LimitConstants {
  int depth = 2;
  std::vector<CConstant> c;  // indexed by r
  double kappa = 0.0;        // sum_r M_r! c^{(M_r)}
  double psi_hat_l2 = 0.0;
  double limit_variance = 0.0;  // kappa * ||psi_hat||^2
  std::string provenance;
};

struct IntegratorSettings {
  double rel_tol = 1e-3;
  int max_boxes = 40000;
  double domain = 4.0;          // box half-width for the constant integrals
  std::uint64_t qmc_points = 1u << 20;
  std::uint64_t qmc_seed = 0x51f0b3a9d2c4e817ULL;
  ContractionRule inner{};      // rule for inner contraction integrals
};

// c^{(M_r)} = int |G(u_1..u_{M_r-1}, -sum u)|^2 du over R^{M_r-1}.
// Quadrature-certified for dimension <= 3, quasi-Monte Carlo above.
inline CConstant c_constant(const NodePtr& g, int order,
                            const IntegratorSettings& st = {}) {
  if (!g || g->arity() != order)
    throw std::invalid_argument("c_constant: node arity must equal the order");
  if (order < 2) throw std::invalid_argument("c_constant: order must be >= 2");
  const int dim = order - 1;
  std::vector<double> args(order);
  auto f = [&](const double* u) {
    double s = 0.0;
    std::vector<double> a(order);
    for (int d = 0; d < dim; ++d) {
      a[d] = u[d];
      s += u[d];
    }
    a[order - 1] = -s;
    const complexd v = g->eval(a);
    return std::norm(v);
  };
  CConstant out;
  out.order = order;
  if (dim <= 3) {
    std::vector<double> lo(dim, -st.domain), hi(dim, st.domain);
    QuadResult q = adaptive_cubature(f, lo, hi, st.rel_tol, st.max_boxes);
    if (!q.converged)
      throw QuadratureError("c_constant: cubature did not reach the requested tolerance",
                            q.error / std::max(std::abs(q.value), 1e-300));
    out.value = q.value;
    out.error = q.error;
  } else {
    std::vector<double> lo(dim, -st.domain), hi(dim, st.domain);
    QmcResult q = qmc_integrate_box(f, lo, hi, st.qmc_points, st.qmc_seed);
    out.value = q.value;
    out.error = q.error;
  }
  return out;
}

// All limit constants for depth M with the scale prefix (j_1 .. j_{M-1}).
inline LimitConstants kappa_and_limits(const SpectralDensity& sd, const WaveletSpec& w,
                                       std::span<const int> j_prefix, int M,
                                       const IntegratorSettings& st = {}) {
  if (M < 2) throw std::invalid_argument("kappa_and_limits: M must be >= 2");
  if (static_cast<int>(j_prefix.size()) != M - 1)
    throw std::invalid_argument("kappa_and_limits: need j_1..j_{M-1}");
  const auto levels = build_chaos(sd, w, j_prefix, M - 1, st.inner);
  const ChaosLevel& top = levels.back();

  LimitConstants out;
  out.depth = M;
  const int rmax = (1 << (M - 2)) - 1;  // r = 0..2^{M-2}-1
  for (int r = 0; r <= rmax; ++r) {
    const int order = (1 << (M - 1)) - 2 * r;  // M_r
    const NodePtr& g = top.G[r];               // arity 2^{M-1}-2r
    CConstant c = c_constant(g, order, st);
    out.c.push_back(c);
    out.kappa += factorial(order) * c.value;
  }
  out.psi_hat_l2 = psi_hat_l2(w);
  out.limit_variance = out.kappa * out.psi_hat_l2;
  std::ostringstream os;
  os << "cubature rel_tol=" << st.rel_tol << " domain=" << st.domain
     << " inner_nodes=" << st.inner.nodes;
  out.provenance = os.str();
  return out;
}

struct ValueWithError {
  double value = 0.0;
  double error = 0.0;
};

namespace detail {

// Support half-width of the filtered density q = f_X |psi_hat_{j1}|^2.
inline double filtered_support(const SpectralDensity& sd, const WaveletSpec& w, int j1) {
  double hi = 1.0;
  const double ref = filtered_density(sd, w, j1, std::ldexp(1.0, -j1));
  for (int k = 0; k < 60; ++k) {
    if (filtered_density(sd, w, j1, hi) < 1e-30 * ref && k > 2) break;
    hi *= 1.5;
  }
  return hi;
}

// Support half-width of |psi_hat| itself.
inline double psi_support(const WaveletSpec& w) {
  const double peak = psi_hat_sup(w);
  double hi = 1.0;
  for (int k = 0; k < 200; ++k) {
    if (std::abs(w.psi_hat(hi)) < 1e-15 * peak) break;
    hi *= 1.25;
  }
  return hi;
}

// int q(u) q(s - u) du with panels split at the kinks u = 0 and u = s.
inline double filtered_self_correlation(const SpectralDensity& sd, const WaveletSpec& w,
                                        int j1, double s, double support, int n = 64) {
  auto q = [&](double u) { return filtered_density(sd, w, j1, u); };
  auto f = [&](double u) { return q(u) * q(s - u); };
  std::vector<double> breaks{-support, 0.0, s, support};
  if (s < 0.0) std::swap(breaks[1], breaks[2]);
  if (breaks[1] < breaks[0]) breaks[1] = breaks[0];
  if (breaks[2] > breaks[3]) breaks[2] = breaks[3];
  double acc = 0.0;
  for (int i = 0; i + 1 < 4; ++i)
    if (breaks[i + 1] > breaks[i]) acc += integrate_gl(f, breaks[i], breaks[i + 1], n);
  return acc;
}

}  // namespace detail

// Finite-scale covariance of the rescaled pre-squaring transform at depth 2:
//   C_{j2}(dt) = 2 int e^{i dt z} q(u) q(2^{-j2} z - u) |psi_hat(z)|^2 du dz,
// evaluated in the sum-coordinate form whose accuracy is uniform in j2.
// At dt = 0 it equals 2^{j2} sigma^2_{j2}.
inline double finite_cov_m2(const SpectralDensity& sd, const WaveletSpec& w, int j1,
                            int j2, double delta_t, int nz = 96, int nu = 64) {
  const double zs = detail::psi_support(w);
  const double us = detail::filtered_support(sd, w, j1);
  const double scale = std::ldexp(1.0, -j2);
  auto outer = [&](double z) {
    const double rho = detail::filtered_self_correlation(sd, w, j1, scale * z, us, nu);
    const double h = w.psi_hat(z);
    return std::cos(delta_t * z) * h * h * rho;
  };
  return 2.0 * integrate_panels(outer, linspace_breaks(-zs, zs, 4), nz / 2);
}

// Same integral with q(.)q(.) replaced by its value at the limit point; the
// difference form avoids cancellation when tracking C_{j2} -> C_inf.
inline double finite_cov_m2_gap(const SpectralDensity& sd, const WaveletSpec& w, int j1,
                                int j2, double delta_t, int nz = 96, int nu = 64) {
  const double zs = detail::psi_support(w);
  const double us = detail::filtered_support(sd, w, j1);
  const double scale = std::ldexp(1.0, -j2);
  const double rho0 = detail::filtered_self_correlation(sd, w, j1, 0.0, us, nu);
  auto outer = [&](double z) {
    const double rho = detail::filtered_self_correlation(sd, w, j1, scale * z, us, nu);
    const double h = w.psi_hat(z);
    return std::cos(delta_t * z) * h * h * (rho - rho0);
  };
  return 2.0 * integrate_panels(outer, linspace_breaks(-zs, zs, 4), nz / 2);
}

enum class SigmaMode { Quadrature };

// sigma^2_{jM} = E U[j_1..j_M]X at depth 2 by 2-D quadrature. (Monte Carlo
// estimates for any depth come from the verification harness.)
inline ValueWithError sigma_finite(const SpectralDensity& sd, const WaveletSpec& w,
                                   std::span<const int> scales, SigmaMode mode) {
  if (mode != SigmaMode::Quadrature)
    throw std::invalid_argument("sigma_finite: unsupported mode");
  if (scales.size() != 2)
    throw std::invalid_argument(
        "sigma_finite: quadrature mode supports depth M=2 only; use the Monte Carlo "
        "estimator for deeper cascades");
  const int j1 = scales[0], j2 = scales[1];
  const double coarse = finite_cov_m2(sd, w, j1, j2, 0.0, 64, 48);
  const double fine = finite_cov_m2(sd, w, j1, j2, 0.0, 96, 64);
  ValueWithError out;
  out.value = std::ldexp(fine, -j2);
  out.error = std::ldexp(std::abs(fine - coarse), -j2);
  return out;
}

// C_inf(dt) = kappa * int e^{i dt z} |psi_hat(z)|^2 dz. The imaginary part of
// the quadrature is checked rather than assumed away.
inline double limit_cov_G(const LimitConstants& consts, const WaveletSpec& w,
                          double delta_t) {
  const double zs = detail::psi_support(w);
  auto re = [&](double z) {
    const double h = w.psi_hat(z);
    return std::cos(delta_t * z) * h * h;
  };
  auto im = [&](double z) {
    const double h = w.psi_hat(z);
    return std::sin(delta_t * z) * h * h;
  };
  const double vre = integrate_panels(re, linspace_breaks(-zs, zs, 4), 48);
  const double vim = integrate_panels(im, linspace_breaks(-zs, zs, 4), 48);
  if (std::abs(vim) > 1e-10 * std::max(std::abs(vre), 1e-300))
    throw std::runtime_error("limit_cov_G: spectral integral has a non-negligible imaginary part");
  return consts.kappa * vre;
}

inline double limit_cov_Gsq(const LimitConstants& consts, const WaveletSpec& w,
                            double delta_t) {
  const double c = limit_cov_G(consts, w, delta_t);
  return 2.0 * c * c;
}

// Constructive constant C_M of the envelope bound
//   |G^{(.)}(lambda)| <= C_M prod_k sqrt(q(lambda_k)),
// built by the induction C_1 = 1,
//   C_m = ||psi_hat||_inf^2 C_{m-1}^2 max_l sum_{r,r'} (l-r-r')!
//         C(2^{m-1}-2r, l-r-r') C(2^{m-1}-2r', l-r-r') ||q||_1^{l-r-r'}.
inline double bound_constant(int M, const SpectralDensity& sd, const WaveletSpec& w,
                             int j1) {
  if (M < 1) throw std::invalid_argument("bound_constant: M must be >= 1");
  const double q1 = filtered_l1(sd, w, j1);
  const double psup = psi_hat_sup(w);
  double cm = 1.0;
  for (int m = 2; m <= M; ++m) {
    const int half = 1 << (m - 1);
    const int rmax = (1 << (m - 2)) - 1;
    double worst = 0.0;
    for (int l = 0; l <= half - 1; ++l) {
      double s = 0.0;
      for (int r = 0; r <= rmax; ++r)
        for (int rp = 0; rp <= rmax; ++rp) {
          const int p = l - r - rp;
          const int nr = half - 2 * r, nrp = half - 2 * rp;
          if (p < 0 || p > std::min(nr, nrp)) continue;
          s += factorial(p) * binomial(nr, p) * binomial(nrp, p) * std::pow(q1, p);
        }
      worst = std::max(worst, s);
    }
    cm = psup * psup * cm * cm * worst;
  }
  return cm;
}

// ||F (x)_1 F||^2 at depth 2 in rescaled coordinates: the integrand depends
// on j2 only through 2^{-j2} shifts, so accuracy is uniform in j2 and the
// 2^{3j2}-scaled value converges to a constant.
inline double contraction_norm_sq_m2_scaled(const SpectralDensity& sd,
                                            const WaveletSpec& w, int j1, int j2,
                                            int nw = 48, int nxyz = 40) {
  const double ws = detail::filtered_support(sd, w, j1);
  const double zs = detail::psi_support(w);
  const double sc = std::ldexp(1.0, -j2);
  auto q = [&](double u) { return filtered_density(sd, w, j1, u); };

  const auto& rw = gauss_legendre(nw / 2);
  const auto& rz = gauss_legendre(nxyz);
  std::vector<double> wn, ww;
  for (double half : {-1.0, 1.0})
    for (int i = 0; i < nw / 2; ++i) {
      wn.push_back(half * ws * 0.5 * (rw.x[i] + 1.0));
      ww.push_back(ws * 0.5 * rw.w[i]);
    }
  std::vector<double> zn(nxyz), zw(nxyz), psi_z(nxyz);
  for (int i = 0; i < nxyz; ++i) {
    zn[i] = zs * rz.x[i];
    zw[i] = zs * rz.w[i];
    psi_z[i] = w.psi_hat(zn[i]);
  }

  const std::size_t nu = wn.size();
  std::vector<double> q_u(nu), q_shift(static_cast<std::size_t>(nxyz) * nu);
  for (std::size_t iw = 0; iw < nu; ++iw) q_u[iw] = ww[iw] * q(wn[iw]);
  for (int i = 0; i < nxyz; ++i)
    for (std::size_t iw = 0; iw < nu; ++iw)
      q_shift[i * nu + iw] = q(sc * zn[i] - wn[iw]);

  std::vector<double> pre(nu), inner_z(nxyz);
  double total = 0.0;
  for (int ix = 0; ix < nxyz; ++ix) {
    const double x = zn[ix];
    const double* qx = &q_shift[ix * nu];
    for (int iy = 0; iy < nxyz; ++iy) {
      const double y = zn[iy];
      const double wxy = zw[ix] * psi_z[ix] * zw[iy] * psi_z[iy];
      if (wxy == 0.0) continue;
      for (std::size_t iw = 0; iw < nu; ++iw)
        pre[iw] = q_u[iw] * qx[iw] * q(sc * (x + y) - wn[iw]);
      for (int iz = 0; iz < nxyz; ++iz) {
        const double p4 = w.psi_hat(x + y - zn[iz]);
        if (p4 == 0.0) {
          inner_z[iz] = 0.0;
          continue;
        }
        const double* qz = &q_shift[iz * nu];
        double inner = 0.0;
        for (std::size_t iw = 0; iw < nu; ++iw) inner += pre[iw] * qz[iw];
        inner_z[iz] = zw[iz] * psi_z[iz] * p4 * inner;
      }
      double zsum = 0.0;
      for (int iz = 0; iz < nxyz; ++iz) zsum += inner_z[iz];
      total += wxy * zsum;
    }
  }
  return total;  // equals 2^{3 j2} ||F (x)_1 F||^2
}

// Bound on the total variation distance between U/sigma^2 at depth 2 and the
// squared standard normal: (2/sigma^2) * 4 ||F (x)_1 F||.
inline double tv_bound_m2(const SpectralDensity& sd, const WaveletSpec& w, int j1,
                          int j2) {
  const double scaled = contraction_norm_sq_m2_scaled(sd, w, j1, j2);
  const double norm = std::sqrt(std::ldexp(std::max(scaled, 0.0), -3 * j2));
  const double sigma2 = sigma_finite(sd, w, std::vector<int>{j1, j2},
                                     SigmaMode::Quadrature)
                            .value;
  return 8.0 * norm / sigma2;
}

// Same bound with a quadrature error estimate from an order comparison.
inline ValueWithError tv_bound_m2_with_error(const SpectralDensity& sd,
                                             const WaveletSpec& w, int j1, int j2) {
  ValueWithError out;
  out.value = tv_bound_m2(sd, w, j1, j2);
  const double coarse_norm = std::sqrt(
      std::ldexp(std::max(contraction_norm_sq_m2_scaled(sd, w, j1, j2, 32, 28), 0.0),
                 -3 * j2));
  const double coarse_sigma =
      std::ldexp(finite_cov_m2(sd, w, j1, j2, 0.0, 64, 48), -j2);
  out.error = std::abs(8.0 * coarse_norm / coarse_sigma - out.value);
  return out;
}

}  // namespace qscat

#endif  // QSCAT_LIMITS_HPP
