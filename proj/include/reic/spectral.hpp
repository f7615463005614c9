#pragma once

// Thin FFTW wrapper for the few transforms the pulse and optimal-control
// code needs. Planning is serialized because FFTW's planner is not
// reentrant; execution uses the new-array interface and is thread-safe.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <mutex>
#include <vector>

#include "reic/types.hpp"

namespace reic::spectral {

namespace detail {
inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

inline std::vector<Complex> transform(const std::vector<Complex>& in, int sign) {
  const int n = static_cast<int>(in.size());
  std::vector<Complex> out(in.size());
  if (n == 0) return out;
  std::vector<Complex> work(in);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(work.data()),
                            reinterpret_cast<fftw_complex*>(out.data()), sign,
                            FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}
}  // namespace detail

/// Unnormalized forward DFT, X_k = sum_n x_n exp(-2 pi i k n / N).
inline std::vector<Complex> fft(const std::vector<Complex>& x) {
  return detail::transform(x, FFTW_FORWARD);
}

/// Inverse DFT including the 1/N normalization.
inline std::vector<Complex> ifft(const std::vector<Complex>& x) {
  auto y = detail::transform(x, FFTW_BACKWARD);
  const double scale = y.empty() ? 1.0 : 1.0 / static_cast<double>(y.size());
  for (auto& v : y) v *= scale;
  return y;
}

/// Frequency of DFT bin k for n samples at `sample_rate` (numpy fftfreq order).
inline double bin_frequency(std::size_t k, std::size_t n, double sample_rate) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  const long long signed_k = (kk <= (nn - 1) / 2) ? kk : kk - nn;
  return static_cast<double>(signed_k) * sample_rate / static_cast<double>(n);
}

}  // namespace reic::spectral
