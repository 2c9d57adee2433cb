#pragma once

#include <complex>
#include <vector>

#include "bps/common.hpp"

namespace bps {

// In-place iterative radix-2 FFT. sign = -1: forward (unnormalized),
// sign = +1: inverse (unnormalized; caller divides by n).
inline void fft_pow2(std::vector<cdouble>& a, int sign) {
  const size_t n = a.size();
  if (n <= 1) return;
  if (!is_power_of_two(static_cast<int>(n))) throw SimError("fft: length must be a power of two");

  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * M_PI / static_cast<double>(len);
    const cdouble wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cdouble w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cdouble u = a[i + k];
        cdouble t = w * a[i + k + len / 2];
        a[i + k] = u + t;
        a[i + k + len / 2] = u - t;
        w *= wl;
      }
    }
  }
}

// Coefficient convention: f(x) = sum_k fhat(k) exp(i kappa_k x), i.e. forward
// transform carries the 1/n normalization.
inline void dft_forward(std::vector<cdouble>& a) {
  fft_pow2(a, -1);
  const double inv = 1.0 / static_cast<double>(a.size());
  for (auto& z : a) z *= inv;
}

inline void dft_inverse(std::vector<cdouble>& a) { fft_pow2(a, +1); }

// Signed integer mode number for bin t of an M-point transform.
inline int signed_mode(int t, int M) { return (t <= M / 2) ? t : t - M; }

}  // namespace bps
