#ifndef QSCAT_MODELS_HPP
#define QSCAT_MODELS_HPP

#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qscat/math/fft.hpp"
#include "qscat/math/quadrature.hpp"

namespace qscat {

// Spectral density f(lambda) = cx(lambda) * |lambda|^(beta-1) of a stationary
// process with a long-range-dependent singularity at the origin.
struct SpectralDensity {
  double beta = 0.5;                     // in (0,1)
  double decay_eps = 1.0;                // tail margin: cx decays faster than |l|^(-beta-eps)
  std::string label;
  std::function<double(double)> cx;      // bounded continuous, >= 0

  double eval(double lambda) const {
    if (!std::isfinite(lambda))
      throw std::invalid_argument("SpectralDensity::eval: non-finite lambda");
    if (lambda == 0.0) return std::numeric_limits<double>::infinity();
    return cx(lambda) * std::pow(std::abs(lambda), beta - 1.0);
  }
};

// Real mother wavelet given in the frequency domain,
// psi_hat(lambda) = c_psi_hat(lambda) * |lambda|^alpha with c_psi_hat(0) > 0.
struct WaveletSpec {
  double alpha = 2.0;
  double c_psi_hat_at_0 = 1.0;
  std::string label;
  std::function<double(double)> psi_hat;  // catalog is real-valued and even

  // psi_hat at dyadic scale j: psi_hat_j(lambda) = psi_hat(2^j lambda)
  double scaled(int j, double lambda) const { return psi_hat(std::ldexp(lambda, j)); }
};

inline double eval_density(const SpectralDensity& sd, double lambda) {
  return sd.eval(lambda);
}

inline complexd eval_psi_hat_scaled(const WaveletSpec& w, int j, double lambda) {
  if (!std::isfinite(lambda))
    throw std::invalid_argument("eval_psi_hat_scaled: non-finite lambda");
  return complexd(w.scaled(j, lambda), 0.0);
}

// f_{X*psi_j}(lambda) = f_X(lambda) |psi_hat_j(lambda)|^2. Finite at 0 when
// 2 alpha + beta >= 1; zero there when the inequality is strict.
inline double filtered_density(const SpectralDensity& sd, const WaveletSpec& w,
                               int j, double lambda) {
  if (lambda == 0.0) {
    const double ex = 2.0 * w.alpha + sd.beta - 1.0;
    if (ex > 0.0) return 0.0;
    if (ex == 0.0)
      return sd.cx(0.0) * w.c_psi_hat_at_0 * w.c_psi_hat_at_0 *
             std::exp2(2.0 * w.alpha * j);
    return std::numeric_limits<double>::infinity();
  }
  const double h = w.scaled(j, lambda);
  return sd.eval(lambda) * h * h;
}

// ---------------------------------------------------------------------------
// Catalog

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

// parse "name:key=val,key=val" into (name, kv)
inline std::pair<std::string, std::vector<std::pair<std::string, double>>>
parse_catalog_id(const std::string& id) {
  const auto colon = id.find(':');
  std::string name = id.substr(0, colon);
  std::vector<std::pair<std::string, double>> kv;
  if (colon != std::string::npos) {
    for (const auto& item : split(id.substr(colon + 1), ',')) {
      const auto eq = item.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("catalog id: expected key=value in '" + id + "'");
      kv.emplace_back(item.substr(0, eq), std::stod(item.substr(eq + 1)));
    }
  }
  return {name, kv};
}

inline double kv_get(const std::vector<std::pair<std::string, double>>& kv,
                     const std::string& key, double fallback) {
  for (const auto& [k, v] : kv)
    if (k == key) return v;
  return fallback;
}

}  // namespace detail

// Densities: "gauss-lrd[:beta=b]" with C_X = exp(-lambda^2), and
// "rational-lrd[:beta=b,beta2=b2,c2=c]" with C_X = (lambda^2 + c2)^(-beta2).
inline SpectralDensity make_density(const std::string& id) {
  const auto [name, kv] = detail::parse_catalog_id(id);
  SpectralDensity sd;
  sd.beta = detail::kv_get(kv, "beta", 0.5);
  if (!(sd.beta > 0.0 && sd.beta < 1.0))
    throw std::invalid_argument("density '" + id + "': beta must be in (0,1)");
  if (name == "gauss-lrd") {
    sd.cx = [](double l) { return std::exp(-l * l); };
    sd.decay_eps = 1.0;
  } else if (name == "rational-lrd") {
    const double beta2 = detail::kv_get(kv, "beta2", 1.0);
    const double c2 = detail::kv_get(kv, "c2", 1.0);
    if (!(beta2 > 0.5)) throw std::invalid_argument("rational-lrd: beta2 must be > 1/2");
    if (!(c2 > 0.0)) throw std::invalid_argument("rational-lrd: c2 must be > 0");
    sd.cx = [beta2, c2](double l) { return std::pow(l * l + c2, -beta2); };
    sd.decay_eps = 0.5 * (2.0 * beta2 - sd.beta);
  } else {
    throw std::invalid_argument("unknown density id '" + id + "'");
  }
  sd.label = id;
  return sd;
}

// Wavelets: "mexican-hat" (alpha = 2, unit L2 norm in time) and
// "morlet-re[:lambda0=x]" (alpha = 1, band-pass at |lambda| = lambda0).
inline WaveletSpec make_wavelet(const std::string& id) {
  const auto [name, kv] = detail::parse_catalog_id(id);
  WaveletSpec w;
  if (name == "mexican-hat") {
    const double a = std::sqrt(8.0 / 3.0) * std::pow(M_PI, 0.25);
    w.alpha = 2.0;
    w.c_psi_hat_at_0 = a;
    w.psi_hat = [a](double l) { return a * l * l * std::exp(-0.5 * l * l); };
  } else if (name == "morlet-re") {
    const double l0 = detail::kv_get(kv, "lambda0", 5.0);
    w.alpha = 1.0;
    w.c_psi_hat_at_0 = std::exp(-0.5 * l0 * l0);
    w.psi_hat = [l0](double l) {
      const double u = std::abs(l) - l0;
      return std::abs(l) * std::exp(-0.5 * u * u);
    };
  } else {
    throw std::invalid_argument("unknown wavelet id '" + id + "'");
  }
  w.label = id;
  return w;
}

// ---------------------------------------------------------------------------
// Numerical probes

// int_a^b f_X, singularity-aware across 0.
inline double integrate_density(const SpectralDensity& sd, double a, double b,
                                int n = 64) {
  auto one_sided = [&](double lo, double hi, double sign) {
    auto h = [&](double l) { return sd.cx(sign * l); };
    // split [lo,hi] (0 <= lo < hi) at 1 to keep the power map well scaled
    double acc = 0.0;
    if (lo < 1.0 && hi > 1.0) {
      acc += integrate_power_weight(h, lo, 1.0, sd.beta, n);
      acc += integrate_power_weight(h, 1.0, hi, sd.beta, n);
    } else if (lo < hi) {
      acc += integrate_power_weight(h, lo, hi, sd.beta, n);
    }
    return acc;
  };
  if (a >= 0.0) return one_sided(a, b, 1.0);
  if (b <= 0.0) return one_sided(-b, -a, -1.0);
  return one_sided(0.0, -a, -1.0) + one_sided(0.0, b, 1.0);
}

inline double psi_hat_l2(const WaveletSpec& w, double lambda_max = 64.0) {
  auto f = [&](double l) {
    const double h = w.psi_hat(l);
    return h * h;
  };
  return adaptive_integrate(f, -lambda_max, lambda_max, 1e-10).value;
}

inline double psi_hat_sup_uncached(const WaveletSpec& w, double lambda_max = 64.0,
                                   int coarse = 4096) {
  double best = 0.0, arg = 0.0;
  for (int i = 0; i <= coarse; ++i) {
    const double l = -lambda_max + 2.0 * lambda_max * i / coarse;
    const double v = std::abs(w.psi_hat(l));
    if (v > best) {
      best = v;
      arg = l;
    }
  }
  // local refinement by ternary search
  double lo = arg - 2.0 * lambda_max / coarse, hi = arg + 2.0 * lambda_max / coarse;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (std::abs(w.psi_hat(m1)) < std::abs(w.psi_hat(m2)))
      lo = m1;
    else
      hi = m2;
  }
  return std::max(best, std::abs(w.psi_hat(0.5 * (lo + hi))));
}

// Cached by catalog label (catalog labels identify the wavelet uniquely).
inline double psi_hat_sup(const WaveletSpec& w) {
  static std::map<std::string, double> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(w.label);
  if (it != cache.end()) return it->second;
  const double v = psi_hat_sup_uncached(w);
  cache.emplace(w.label, v);
  return v;
}

// ||f_{X*psi_j}||_1 by singularity-aware quadrature.
inline double filtered_l1(const SpectralDensity& sd, const WaveletSpec& w, int j,
                          double lambda_max = 256.0) {
  auto h = [&](double l) {
    const double p = w.scaled(j, l);
    return sd.cx(l) * p * p;
  };
  double acc = 0.0;
  for (double lo : {0.0, 1.0, 4.0, 16.0, 64.0}) {
    const double hi = (lo == 0.0) ? 1.0 : (lo == 64.0 ? lambda_max : lo * 4.0);
    if (lo >= lambda_max) break;
    acc += integrate_power_weight(h, lo, std::min(hi, lambda_max), sd.beta, 48);
  }
  return 2.0 * acc;
}

inline double filtered_sup(const SpectralDensity& sd, const WaveletSpec& w, int j,
                           double lambda_max = 64.0, int points = 1 << 16) {
  double best = 0.0;
  for (int i = 1; i <= points; ++i) {
    const double l = lambda_max * i / points;
    best = std::max(best, filtered_density(sd, w, j, l));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Assumption checks

struct ProbeSettings {
  double lambda_max = 1024.0;  // probe window [-Lambda, Lambda]
  std::size_t points = (1u << 20) + 1;
  int j1 = 0;  // scale used for the filtered-density probes
};

struct CheckItem {
  std::string name;
  bool passed = false;
  double witness_lambda = 0.0;  // offending lambda when failed
  double value = 0.0;
  std::string detail;
};

struct AssumptionReport {
  std::vector<CheckItem> items;
  double filtered_l1 = 0.0;
  double filtered_sup = 0.0;

  bool passed() const {
    for (const auto& it : items)
      if (!it.passed) return false;
    return true;
  }
  const CheckItem* find(const std::string& name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
  std::string describe() const {
    std::ostringstream os;
    for (const auto& it : items) {
      os << (it.passed ? "[ok]   " : "[FAIL] ") << it.name;
      if (!it.passed) os << " (witness lambda = " << it.witness_lambda << ")";
      if (!it.detail.empty()) os << ": " << it.detail;
      os << "\n";
    }
    return os.str();
  }
};

inline AssumptionReport check_assumptions(const SpectralDensity& sd,
                                          const WaveletSpec& w,
                                          const ProbeSettings& ps = {}) {
  AssumptionReport rep;
  const std::size_t np = ps.points | 1;  // odd: includes 0 and the endpoints
  auto grid_lambda = [&](std::size_t i) {
    return -ps.lambda_max + 2.0 * ps.lambda_max * static_cast<double>(i) /
                                static_cast<double>(np - 1);
  };

  {
    CheckItem c{.name = "hypothesis 2*alpha+beta>=1"};
    c.value = 2.0 * w.alpha + sd.beta;
    c.passed = c.value >= 1.0;
    std::ostringstream os;
    os << "2*alpha+beta = " << c.value;
    c.detail = os.str();
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "wavelet mean-zero psi_hat(0)=0"};
    const double v = std::abs(w.psi_hat(0.0));
    c.value = v;
    c.passed = v <= 1e-12;
    c.witness_lambda = 0.0;
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "psi_hat hermitian symmetry", .passed = true};
    for (std::size_t i = 0; i < np; i += 64) {
      const double l = grid_lambda(i);
      const complexd a = eval_psi_hat_scaled(w, 0, l);
      const complexd b = std::conj(eval_psi_hat_scaled(w, 0, -l));
      if (std::abs(a - b) > 1e-10 * (1.0 + std::abs(a))) {
        c.passed = false;
        c.witness_lambda = l;
        break;
      }
    }
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "density evenness", .passed = true};
    for (std::size_t i = 1; i < np; i += 64) {
      const double l = grid_lambda(i);
      if (l == 0.0) continue;
      const double a = sd.eval(l), b = sd.eval(-l);
      if (std::abs(a - b) > 1e-10 * (1.0 + std::abs(a))) {
        c.passed = false;
        c.witness_lambda = l;
        break;
      }
    }
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "density nonnegative", .passed = true};
    for (std::size_t i = 0; i < np; i += 16) {
      const double l = grid_lambda(i);
      if (l == 0.0) continue;
      if (sd.eval(l) < 0.0) {
        c.passed = false;
        c.witness_lambda = l;
        break;
      }
    }
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "psi_hat ~ c_psi_hat(0) |lambda|^alpha near 0"};
    double worst = 0.0, wl = 0.0;
    for (int k = 4; k <= 20; ++k) {
      const double l = std::ldexp(1.0, -k);
      const double ratio = std::abs(w.psi_hat(l)) / std::pow(l, w.alpha);
      const double relerr = std::abs(ratio - w.c_psi_hat_at_0) / w.c_psi_hat_at_0;
      if (relerr > worst) {
        worst = relerr;
        wl = l;
      }
    }
    const double l = std::ldexp(1.0, -20);
    const double tail = std::abs(std::abs(w.psi_hat(l)) / std::pow(l, w.alpha) -
                                 w.c_psi_hat_at_0) / w.c_psi_hat_at_0;
    c.value = tail;
    c.passed = tail < 1e-3;
    c.witness_lambda = wl;
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "filtered density L1 finite"};
    rep.filtered_l1 = filtered_l1(sd, w, ps.j1);
    c.value = rep.filtered_l1;
    c.passed = std::isfinite(rep.filtered_l1) && rep.filtered_l1 > 0.0;
    rep.items.push_back(c);
  }
  {
    CheckItem c{.name = "filtered density sup finite"};
    rep.filtered_sup = filtered_sup(sd, w, ps.j1, 64.0, 1 << 16);
    c.value = rep.filtered_sup;
    c.passed = std::isfinite(rep.filtered_sup);
    rep.items.push_back(c);
  }
  return rep;
}

}  // namespace qscat

#endif  // QSCAT_MODELS_HPP
