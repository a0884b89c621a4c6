// Print the analytic limit constants and the dyadic decay of the
// total-variation bound for the default catalog pair at depth 2.

#include <cstdio>
#include <vector>

#include "qscat/limits.hpp"

using namespace qscat;

int main() {
  const SpectralDensity sd = make_density("gauss-lrd:beta=0.5");
  const WaveletSpec w = make_wavelet("mexican-hat");

  const auto lc = kappa_and_limits(sd, w, std::vector<int>{0}, 2);
  std::printf("c^(2)          = %.6f +- %.1e\n", lc.c[0].value, lc.c[0].error);
  std::printf("kappa          = %.6f\n", lc.kappa);
  std::printf("||psi_hat||^2  = %.6f\n", lc.psi_hat_l2);
  std::printf("limit variance = %.6f\n", lc.limit_variance);

  std::printf("\n%4s %12s %12s %16s\n", "j2", "2^j2 var", "tv bound", "bound * 2^{j2/2}");
  for (int j2 : {4, 6, 8, 10}) {
    const auto s = sigma_finite(sd, w, std::vector<int>{0, j2}, SigmaMode::Quadrature);
    const double b = tv_bound_m2(sd, w, 0, j2);
    std::printf("%4d %12.6f %12.6f %16.6f\n", j2, std::ldexp(s.value, j2), b,
                b * std::pow(2.0, 0.5 * j2));
  }
  return 0;
}
