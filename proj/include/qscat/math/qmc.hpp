#ifndef QSCAT_MATH_QMC_HPP
#define QSCAT_MATH_QMC_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qscat/math/rng.hpp"

namespace qscat {

// Sobol sequence (Joe-Kuo direction numbers, dimensions up to 10) with a
// random digital shift for scrambling. 32-bit fractions are plenty for the
// point counts used here.
class SobolSampler {
 public:
  SobolSampler(int dim, std::uint64_t scramble_seed) : dim_(dim) {
    if (dim < 1 || dim > kMaxDim)
      throw std::invalid_argument("SobolSampler: dimension out of range");
    v_.assign(dim, std::vector<std::uint32_t>(kBits));
    x_.assign(dim, 0);
    shift_.assign(dim, 0);

    // dim 0: van der Corput
    for (int k = 0; k < kBits; ++k) v_[0][k] = 1u << (31 - k);
    for (int d = 1; d < dim; ++d) {
      const int s = kDegree[d - 1];
      const std::uint32_t a = kPoly[d - 1];
      std::vector<std::uint32_t> m(kInit[d - 1], kInit[d - 1] + s);
      for (int k = 0; k < kBits; ++k) {
        if (k < s) {
          v_[d][k] = m[k] << (31 - k);
        } else {
          std::uint32_t mk = m[k - s] ^ (m[k - s] << s);
          for (int i = 1; i < s; ++i)
            if ((a >> (s - 1 - i)) & 1u) mk ^= m[k - i] << i;
          m.push_back(mk);
          v_[d][k] = mk << (31 - k);
        }
      }
    }
    RngStream rng(scramble_seed);
    for (int d = 0; d < dim; ++d)
      shift_[d] = static_cast<std::uint32_t>(rng.next_u64() >> 32);
  }

  // Fills the next point (Gray-code order), components in (0,1).
  void next(double* pt) {
    const std::uint64_t i = index_++;
    int c = 0;
    std::uint64_t value = i;
    while (value & 1) {
      value >>= 1;
      ++c;
    }
    for (int d = 0; d < dim_; ++d) {
      x_[d] ^= v_[d][c];
      pt[d] = ((x_[d] ^ shift_[d]) + 0.5) * 0x1.0p-32;
    }
  }

  int dim() const { return dim_; }

 private:
  static constexpr int kBits = 32;
  static constexpr int kMaxDim = 10;
  // degree, polynomial coefficient bits, initial direction numbers (Joe-Kuo)
  static constexpr int kDegree[kMaxDim - 1] = {1, 2, 3, 3, 4, 4, 5, 5, 5};
  static constexpr std::uint32_t kPoly[kMaxDim - 1] = {0, 1, 1, 2, 1, 4, 2, 4, 7};
  static constexpr std::uint32_t kInit[kMaxDim - 1][5] = {
      {1, 0, 0, 0, 0},  {1, 3, 0, 0, 0},  {1, 3, 1, 0, 0},
      {1, 1, 1, 0, 0},  {1, 1, 3, 3, 0},  {1, 3, 5, 13, 0},
      {1, 1, 5, 5, 17}, {1, 1, 5, 5, 5},  {1, 1, 7, 11, 19}};

  int dim_;
  std::uint64_t index_ = 0;
  std::vector<std::vector<std::uint32_t>> v_;
  std::vector<std::uint32_t> x_;
  std::vector<std::uint32_t> shift_;
};

struct QmcResult {
  double value = 0.0;
  double error = 0.0;  // standard error across independent scrambles
};

// Mean over `replicates` independently shifted Sobol streams; the spread
// between replicates supplies the error bar.
template <class F>
QmcResult qmc_integrate_box(F&& f, const std::vector<double>& lo,
                            const std::vector<double>& hi, std::uint64_t points,
                            std::uint64_t seed, int replicates = 8) {
  const int dim = static_cast<int>(lo.size());
  double vol = 1.0;
  for (int d = 0; d < dim; ++d) vol *= hi[d] - lo[d];
  std::vector<double> means(replicates, 0.0);
  std::vector<double> pt(dim), x(dim);
  const std::uint64_t per = points / replicates;
  for (int rep = 0; rep < replicates; ++rep) {
    SobolSampler sob(dim, derive_seed(seed, "qmc-shift", rep));
    double acc = 0.0;
    for (std::uint64_t i = 0; i < per; ++i) {
      sob.next(pt.data());
      for (int d = 0; d < dim; ++d) x[d] = lo[d] + (hi[d] - lo[d]) * pt[d];
      acc += f(x.data());
    }
    means[rep] = vol * acc / static_cast<double>(per);
  }
  QmcResult out;
  for (double m : means) out.value += m;
  out.value /= replicates;
  double ss = 0.0;
  for (double m : means) ss += (m - out.value) * (m - out.value);
  out.error = std::sqrt(ss / (replicates - 1.0) / replicates);
  return out;
}

}  // namespace qscat

#endif  // QSCAT_MATH_QMC_HPP
