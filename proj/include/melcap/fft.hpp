// Copyright 2026 The MelCap Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MELCAP_FFT_HPP_
#define MELCAP_FFT_HPP_

#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace melcap {

/// Discrete Fourier transform with the unnormalized-forward / (1/N)-inverse
/// convention:
///
///   forward:  X[k] = sum_n x[n] * exp(-j 2 pi k n / N)
///   inverse:  x[n] = (1/N) * sum_k X[k] * exp(+j 2 pi k n / N)
///
/// Power-of-two sizes use an iterative radix-2 Cooley-Tukey; other sizes fall
/// back to the direct O(N^2) sum, which is adequate at analysis-frame scale.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw std::invalid_argument("FftPlan: size must be positive");
    pow2_ = (n & (n - 1)) == 0;
    if (pow2_) {
      bitrev_.resize(n);
      std::size_t log2n = 0;
      while ((std::size_t{1} << log2n) < n) ++log2n;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t r = 0;
        for (std::size_t b = 0; b < log2n; ++b) {
          if (i & (std::size_t{1} << b)) r |= std::size_t{1} << (log2n - 1 - b);
        }
        bitrev_[i] = r;
      }
      // Forward twiddles for every butterfly stage, packed stage after stage.
      twiddle_.reserve(n);
      for (std::size_t len = 2; len <= n; len <<= 1) {
        for (std::size_t j = 0; j < len / 2; ++j) {
          double ang = -2.0 * kPi * static_cast<double>(j) / static_cast<double>(len);
          twiddle_.emplace_back(std::cos(ang), std::sin(ang));
        }
      }
    }
  }

  std::size_t size() const { return n_; }

  // In-place forward transform; out must have size n.
  void forward(std::complex<double>* data) const { transform(data, /*inverse=*/false); }

  // In-place inverse transform including the 1/N scale.
  void inverse(std::complex<double>* data) const {
    transform(data, /*inverse=*/true);
    const double s = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < n_; ++i) data[i] *= s;
  }

 private:
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  void transform(std::complex<double>* a, bool inverse) const {
    if (!pow2_) {
      naive(a, inverse);
      return;
    }
    for (std::size_t i = 0; i < n_; ++i) {
      std::size_t j = bitrev_[i];
      if (i < j) std::swap(a[i], a[j]);
    }
    std::size_t tw_base = 0;
    for (std::size_t len = 2; len <= n_; len <<= 1) {
      const std::size_t half = len / 2;
      for (std::size_t start = 0; start < n_; start += len) {
        for (std::size_t j = 0; j < half; ++j) {
          std::complex<double> w = twiddle_[tw_base + j];
          if (inverse) w = std::conj(w);
          std::complex<double> u = a[start + j];
          std::complex<double> v = a[start + j + half] * w;
          a[start + j] = u + v;
          a[start + j + half] = u - v;
        }
      }
      tw_base += half;
    }
  }

  void naive(std::complex<double>* a, bool inverse) const {
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> out(n_);
    for (std::size_t k = 0; k < n_; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t n = 0; n < n_; ++n) {
        double ang = sign * 2.0 * kPi * static_cast<double>(k) * static_cast<double>(n) /
                     static_cast<double>(n_);
        acc += a[n] * std::complex<double>(std::cos(ang), std::sin(ang));
      }
      out[k] = acc;
    }
    for (std::size_t i = 0; i < n_; ++i) a[i] = out[i];
  }

  std::size_t n_;
  bool pow2_ = false;
  std::vector<std::size_t> bitrev_;
  std::vector<std::complex<double>> twiddle_;
};

inline std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x) {
  FftPlan plan(x.size());
  plan.forward(x.data());
  return x;
}

inline std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> x) {
  FftPlan plan(x.size());
  plan.inverse(x.data());
  return x;
}

}  // namespace melcap

#endif  // MELCAP_FFT_HPP_
