#ifndef RBK_AUTOCORRELATION_HPP
#define RBK_AUTOCORRELATION_HPP

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <stdexcept>
#include <vector>

namespace rbk {

namespace detail {

struct FftwFree {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using fftw_buffer = std::unique_ptr<T[], FftwFree>;

template <typename T>
fftw_buffer<T> fftw_alloc(std::size_t count) {
  auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * count));
  if (!p) throw std::bad_alloc();
  return fftw_buffer<T>(p);
}

/// Process-wide cache of real-to-complex / complex-to-real plan pairs. The
/// FFTW planner is not thread-safe; execution with the new-array interface is.
class PlanCache {
public:
  struct Plans {
    fftw_plan forward;
    fftw_plan backward;
  };

  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  Plans get(std::size_t len) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto it = plans_.find(len);
    if (it != plans_.end()) return it->second;
    auto in = fftw_alloc<double>(len);
    auto out = fftw_alloc<fftw_complex>(len / 2 + 1);
    Plans p;
    p.forward = fftw_plan_dft_r2c_1d(int(len), in.get(), out.get(), FFTW_ESTIMATE);
    p.backward = fftw_plan_dft_c2r_1d(int(len), out.get(), in.get(), FFTW_ESTIMATE);
    if (!p.forward || !p.backward) throw std::runtime_error("FFTW planning failed");
    plans_.emplace(len, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [len, p] : plans_) {
      fftw_destroy_plan(p.forward);
      fftw_destroy_plan(p.backward);
    }
  }

private:
  PlanCache() = default;
  std::mutex mutex_;
  std::map<std::size_t, Plans> plans_;
};

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

} // namespace detail

/// Linear autocorrelation c[l] = sum_k x[k+l] x[k], l = 0..x.size()-1, via a
/// zero-padded FFT of length next_pow2(2 x.size()).
inline std::vector<double> autocorrelation(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<double> c(n, 0.0);
  if (n == 0) return c;
  const std::size_t len = detail::next_pow2(2 * n);
  auto plans = detail::PlanCache::instance().get(len);
  auto buf = detail::fftw_alloc<double>(len);
  auto spec = detail::fftw_alloc<fftw_complex>(len / 2 + 1);
  for (std::size_t k = 0; k < n; ++k) buf[k] = x[k];
  for (std::size_t k = n; k < len; ++k) buf[k] = 0.0;
  fftw_execute_dft_r2c(plans.forward, buf.get(), spec.get());
  for (std::size_t k = 0; k < len / 2 + 1; ++k) {
    const double re = spec[k][0];
    const double im = spec[k][1];
    spec[k][0] = re * re + im * im;
    spec[k][1] = 0.0;
  }
  fftw_execute_dft_c2r(plans.backward, spec.get(), buf.get());
  const double scale = 1.0 / double(len);
  for (std::size_t l = 0; l < n; ++l) c[l] = buf[l] * scale;
  return c;
}

} // namespace rbk

#endif // RBK_AUTOCORRELATION_HPP
