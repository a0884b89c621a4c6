#ifndef QSCAT_MATH_FFT_HPP
#define QSCAT_MATH_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <mutex>
#include <stdexcept>

namespace qscat {

using complexd = std::complex<double>;

// RAII buffer allocated through FFTW so that every buffer shares the same
// alignment as the arrays the plans were created with.
class FftBuffer {
 public:
  explicit FftBuffer(std::size_t n) : n_(n) {
    data_ = static_cast<complexd*>(fftw_malloc(sizeof(complexd) * n));
    if (!data_) throw std::bad_alloc();
    for (std::size_t i = 0; i < n; ++i) data_[i] = complexd(0.0, 0.0);
  }
  ~FftBuffer() { fftw_free(data_); }
  FftBuffer(const FftBuffer&) = delete;
  FftBuffer& operator=(const FftBuffer&) = delete;
  FftBuffer(FftBuffer&& o) noexcept : data_(o.data_), n_(o.n_) { o.data_ = nullptr; }

  complexd* data() { return data_; }
  const complexd* data() const { return data_; }
  complexd& operator[](std::size_t i) { return data_[i]; }
  const complexd& operator[](std::size_t i) const { return data_[i]; }
  std::size_t size() const { return n_; }

 private:
  complexd* data_;
  std::size_t n_;
};

// Shared FFTW plans (FFTW_ESTIMATE: deterministic algorithm choice). Planning
// is serialized; execution on distinct buffers is thread-safe.
class Fft {
 public:
  // out[k] = sum_i in[i] e^{-2 pi i k i / n}  (unnormalized)
  static void forward(std::size_t n, complexd* in, complexd* out) {
    execute(n, FFTW_FORWARD, in, out);
  }
  // out[i] = sum_k in[k] e^{+2 pi i k i / n}  (unnormalized)
  static void backward(std::size_t n, complexd* in, complexd* out) {
    execute(n, FFTW_BACKWARD, in, out);
  }

 private:
  static void execute(std::size_t n, int sign, complexd* in, complexd* out) {
    fftw_plan plan = get_plan(n, sign);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in),
                     reinterpret_cast<fftw_complex*>(out));
  }

  static fftw_plan get_plan(std::size_t n, int sign) {
    static std::map<std::pair<std::size_t, int>, fftw_plan> plans;
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    auto key = std::make_pair(n, sign);
    auto it = plans.find(key);
    if (it != plans.end()) return it->second;
    FftBuffer a(n), b(n);
    fftw_plan p = fftw_plan_dft_1d(static_cast<int>(n),
                                   reinterpret_cast<fftw_complex*>(a.data()),
                                   reinterpret_cast<fftw_complex*>(b.data()),
                                   sign, FFTW_ESTIMATE);
    if (!p) throw std::runtime_error("fftw plan creation failed");
    plans.emplace(key, p);
    return p;
  }
};

inline bool is_power_of_two(std::size_t n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace qscat

#endif  // QSCAT_MATH_FFT_HPP
