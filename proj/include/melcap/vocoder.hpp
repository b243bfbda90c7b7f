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

#ifndef MELCAP_VOCODER_HPP_
#define MELCAP_VOCODER_HPP_

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "melcap/activations.hpp"
#include "melcap/frontend.hpp"
#include "melcap/rng.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// Mel pseudo-inverse
// ---------------------------------------------------------------------------

/// Ridge least-squares inverse of a mel filterbank: P = H^T (H H^T + l I)^-1,
/// mapping mel-domain vectors back to FFT-bin vectors.  `spectral_norm` is a
/// power-iteration estimate of ||P||_2 and feeds the synthesis Lipschitz
/// budget.
struct MelInverse {
  std::size_t n_bins = 0;  // F
  std::size_t n_mels = 0;  // M
  std::vector<double> matrix;  // F x M, row-major
  double ridge_lambda = 0.0;
  bool clamp_nonneg = true;
  double spectral_norm = 0.0;

  double at(std::size_t k, std::size_t m) const { return matrix[k * n_mels + m]; }
};

namespace detail {

// Cholesky solve of the SPD system A X = B, A: n x n, B: n x m (row-major,
// overwritten with X).  Throws when a pivot collapses, which for the ridge
// system means the filterbank Gram matrix is singular at this lambda.
inline void cholesky_solve_inplace(std::vector<double>& a, std::size_t n,
                                   std::vector<double>& b, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j <= i; ++j) {
      double sum = a[i * n + j];
      for (std::size_t k = 0; k < j; ++k) sum -= a[i * n + k] * a[j * n + k];
      if (i == j) {
        if (!(sum > 1e-300)) {
          throw std::invalid_argument(
              "make_mel_inverse: system is singular at this ridge_lambda; raise ridge_lambda");
        }
        a[i * n + i] = std::sqrt(sum);
      } else {
        a[i * n + j] = sum / a[j * n + j];
      }
    }
  }
  // Forward then backward substitution, column block at a time.
  for (std::size_t c = 0; c < m; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double sum = b[i * m + c];
      for (std::size_t k = 0; k < i; ++k) sum -= a[i * n + k] * b[k * m + c];
      b[i * m + c] = sum / a[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
      double sum = b[ii * m + c];
      for (std::size_t k = ii + 1; k < n; ++k) sum -= a[k * n + ii] * b[k * m + c];
      b[ii * m + c] = sum / a[ii * n + ii];
    }
  }
}

}  // namespace detail

/// Builds the ridge pseudo-inverse of `fb`.  `clamp_nonneg` zeroes negative
/// matrix entries; the default keeps them, because the least-squares inverse
/// needs its negative side lobes to reconstruct well (synthesis clamps the
/// per-frame magnitudes instead, which costs nothing in the Lipschitz
/// budget).
inline MelInverse make_mel_inverse(const MelFilterbank& fb, double ridge_lambda,
                                   bool clamp_nonneg = false) {
  if (fb.n_mels == 0 || fb.n_bins == 0)
    throw std::invalid_argument("make_mel_inverse: empty filterbank");
  if (ridge_lambda < 0.0)
    throw std::invalid_argument("make_mel_inverse: ridge_lambda must be >= 0");
  const std::size_t m = fb.n_mels, f = fb.n_bins;

  // A = H H^T + lambda I (M x M), rhs = H (M x F); solving A X = H gives
  // X = (H H^T + lambda I)^-1 H, and P = X^T.
  std::vector<double> gram(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      double acc = 0.0;
      const double* ri = fb.weights.data() + i * f;
      const double* rj = fb.weights.data() + j * f;
      for (std::size_t k = 0; k < f; ++k) acc += ri[k] * rj[k];
      gram[i * m + j] = acc;
      gram[j * m + i] = acc;
    }
    gram[i * m + i] += ridge_lambda;
  }
  std::vector<double> rhs = fb.weights;  // M x F
  detail::cholesky_solve_inplace(gram, m, rhs, f);

  MelInverse inv;
  inv.n_bins = f;
  inv.n_mels = m;
  inv.ridge_lambda = ridge_lambda;
  inv.clamp_nonneg = clamp_nonneg;
  inv.matrix.resize(f * m);
  for (std::size_t k = 0; k < f; ++k) {
    for (std::size_t mi = 0; mi < m; ++mi) {
      double v = rhs[mi * f + k];
      if (clamp_nonneg && v < 0.0) v = 0.0;
      inv.matrix[k * m + mi] = v;
    }
  }

  // ||P||_2 via power iteration on P^T P (M x M).
  std::vector<double> ptp(m * m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < f; ++k) acc += inv.matrix[k * m + i] * inv.matrix[k * m + j];
      ptp[i * m + j] = acc;
      ptp[j * m + i] = acc;
    }
  }
  Rng rng(0x9E3779B97F4A7C15ULL);
  std::vector<double> v(m), w(m);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  double sigma2 = 0.0;
  for (int it = 0; it < 1000; ++it) {
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += ptp[i * m + j] * v[j];
      w[i] = acc;
    }
    double nw = 0.0;
    for (double x : w) nw += x * x;
    nw = std::sqrt(nw);
    if (nw == 0.0) {
      sigma2 = 0.0;
      break;
    }
    for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nw;
    if (std::abs(nw - sigma2) <= 1e-13 * std::max(1.0, nw) && it > 4) {
      sigma2 = nw;
      break;
    }
    sigma2 = nw;
  }
  inv.spectral_norm = std::sqrt(sigma2);
  if (!std::isfinite(inv.spectral_norm))
    throw std::runtime_error("make_mel_inverse: spectral norm estimation failed");
  return inv;
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

enum class VocoderMode : std::uint8_t {
  linear_fixed_phase = 0,  // P * exp(logmel) with a seeded per-bin phase, one OLA pass
  griffin_lim = 1,         // same start, then iterative phase refinement
};

struct VocoderSpec {
  VocoderMode mode = VocoderMode::linear_fixed_phase;
  std::uint64_t seed = 1;
  std::size_t griffin_lim_iters = 32;
  std::vector<double> synthesis_window;
  std::size_t hop = 256;
  double v_max = 6.907755278982137;  // log(1e3), log-domain clamp

  void validate() const {
    if (synthesis_window.size() < 2)
      throw std::invalid_argument("VocoderSpec: synthesis window too short");
    if (hop == 0) throw std::invalid_argument("VocoderSpec: hop must be positive");
    if (!std::isfinite(v_max)) throw std::invalid_argument("VocoderSpec: v_max must be finite");
  }
};

struct SynthesisResult {
  Waveform waveform;
  std::size_t clamped_cells = 0;  // log-mel cells limited at v_max
  // Griffin-Lim spectral-consistency residuals || |STFT(x_i)| - target ||_F,
  // one per iteration; empty in linear_fixed_phase mode or with 0 iterations.
  std::vector<double> consistency_residuals;
};

/// Deterministic waveform synthesis.  Per frame the magnitude spectrum is
/// max(0, P * exp(min(logmel, v_max))); linear_fixed_phase attaches a seeded
/// per-bin phase and runs a single normalized overlap-add pass.  Every stage
/// of that composition is Lipschitz (exp clamped at v_max, P bounded by its
/// spectral norm, the zero-clamp pointwise, the OLA linear), which is what
/// the error-propagation checks certify.  griffin_lim refines the phase for
/// `griffin_lim_iters` rounds of magnitude projection; with 0 iterations it
/// coincides with the linear path.
inline SynthesisResult synthesize(const LogMelSpectrogram& logmel, const MelInverse& inv,
                                  const VocoderSpec& spec) {
  spec.validate();
  if (logmel.frames == 0) throw std::invalid_argument("synthesize: empty input");
  if (logmel.mels != inv.n_mels)
    throw std::invalid_argument("synthesize: logmel has " + std::to_string(logmel.mels) +
                                " mels but the inverse expects " + std::to_string(inv.n_mels));
  const std::size_t n_fft = spec.synthesis_window.size();
  const std::size_t bins = n_fft / 2 + 1;
  if (bins != inv.n_bins)
    throw std::invalid_argument("synthesize: window length implies " + std::to_string(bins) +
                                " bins but the inverse yields " + std::to_string(inv.n_bins));
  const std::size_t frames = logmel.frames;
  if (cola_normalizer_min(spec.synthesis_window, spec.hop, frames) < 1e-10) {
    throw std::invalid_argument("synthesize: vocoder window/hop pair violates COLA");
  }

  SynthesisResult result;

  // Clamped exponential -> per-frame magnitude spectra.
  std::vector<double> mag(frames * bins, 0.0);
  {
    std::vector<double> mel(inv.n_mels);
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t m = 0; m < inv.n_mels; ++m) {
        double v = logmel.at(t, m);
        if (v > spec.v_max) {
          v = spec.v_max;
          ++result.clamped_cells;
        }
        mel[m] = std::exp(v);
      }
      for (std::size_t k = 0; k < bins; ++k) {
        double acc = 0.0;
        const double* row = inv.matrix.data() + k * inv.n_mels;
        for (std::size_t m = 0; m < inv.n_mels; ++m) acc += row[m] * mel[m];
        // Magnitudes clamp at zero: a 1-Lipschitz step, so the synthesis
        // bound istft * ||P|| survives, and Griffin-Lim targets stay valid.
        mag[t * bins + k] = acc > 0.0 ? acc : 0.0;
      }
    }
  }

  // Fixed per-bin phase; identical across frames and across calls with the
  // same seed, which keeps magnitude -> waveform affine.
  std::vector<std::complex<double>> phase(bins);
  {
    Rng rng(spec.seed);
    constexpr double kTau = 6.283185307179586476925286766559;
    for (std::size_t k = 0; k < bins; ++k) {
      const double phi = rng.uniform(0.0, kTau);
      phase[k] = {std::cos(phi), std::sin(phi)};
    }
  }

  std::vector<std::complex<double>> spectrum(frames * bins);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t k = 0; k < bins; ++k)
      spectrum[t * bins + k] = mag[t * bins + k] * phase[k];

  std::vector<double> full = detail::ola_least_squares(spectrum.data(), frames, bins,
                                                       spec.synthesis_window, spec.hop);

  const std::size_t iters =
      spec.mode == VocoderMode::griffin_lim ? spec.griffin_lim_iters : 0;
  if (iters > 0) {
    // Hermitian weights make the one-sided residual equal the full-spectrum
    // Frobenius norm, the quantity the least-squares OLA step is monotone in.
    const std::size_t nyquist = n_fft % 2 == 0 ? bins - 1 : bins;
    std::vector<std::complex<double>> c(frames * bins);
    for (std::size_t it = 0; it < iters; ++it) {
      detail::forward_frames(full.data(), spec.synthesis_window, spec.hop, frames, c.data());
      double res2 = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) {
        const std::size_t k = i % bins;
        const double wk = (k == 0 || k == nyquist) ? 1.0 : 2.0;
        const double diff = std::abs(c[i]) - mag[i];
        res2 += wk * diff * diff;
      }
      result.consistency_residuals.push_back(std::sqrt(res2));
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double r = std::abs(c[i]);
        spectrum[i] = r > 0.0 ? c[i] * (mag[i] / r) : std::complex<double>(mag[i], 0.0);
      }
      full = detail::ola_least_squares(spectrum.data(), frames, bins, spec.synthesis_window,
                                       spec.hop);
    }
  }

  const std::size_t pad = n_fft / 2;
  const std::size_t out_len = frames > 1 ? (frames - 1) * spec.hop : n_fft / 2;
  result.waveform.sample_rate = logmel.config.sample_rate;
  result.waveform.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(pad),
                                 full.begin() + static_cast<std::ptrdiff_t>(pad + out_len));
  return result;
}

}  // namespace melcap

#endif  // MELCAP_VOCODER_HPP_
