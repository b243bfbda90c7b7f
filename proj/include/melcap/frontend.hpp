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

#ifndef MELCAP_FRONTEND_HPP_
#define MELCAP_FRONTEND_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "melcap/bytes.hpp"
#include "melcap/fft.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Mono time-domain signal.  Samples are dimensionless with nominal range
/// [-1, 1]; the sample rate is carried alongside so analysis code can reject
/// mismatched inputs instead of silently resampling.
struct Waveform {
  std::vector<double> samples;
  int sample_rate = 0;
};

enum class WindowKind : std::uint8_t { hann = 0, hamming = 1, rectangular = 2 };

inline const char* window_kind_name(WindowKind k) {
  switch (k) {
    case WindowKind::hann: return "hann";
    case WindowKind::hamming: return "hamming";
    case WindowKind::rectangular: return "rectangular";
  }
  return "?";
}

/// Parameters of the analysis front end.  Defaults give the 44.1 kHz
/// configuration used throughout: 1024-point FFT, hop 256, 96 mel bins over
/// the full band, natural-log floor 1e-5.
struct AnalysisConfig {
  std::size_t n_fft = 1024;
  std::size_t hop = 256;
  WindowKind window_kind = WindowKind::hann;
  std::size_t n_mels = 96;
  int sample_rate = 44100;
  double f_min = 0.0;
  double f_max = 22050.0;
  double log_floor = 1e-5;

  std::size_t bins() const { return n_fft / 2 + 1; }

  void validate() const {
    if (n_fft < 2) throw std::invalid_argument("AnalysisConfig: n_fft must be >= 2");
    if (hop == 0 || hop > n_fft)
      throw std::invalid_argument("AnalysisConfig: hop must satisfy 0 < hop <= n_fft");
    if (n_mels < 1) throw std::invalid_argument("AnalysisConfig: n_mels must be >= 1");
    if (sample_rate <= 0) throw std::invalid_argument("AnalysisConfig: sample_rate must be positive");
    if (!(f_min < f_max))
      throw std::invalid_argument("AnalysisConfig: f_min must be < f_max");
    if (f_max > sample_rate / 2.0 + 1e-9)
      throw std::invalid_argument("AnalysisConfig: f_max must be <= sample_rate/2");
    if (!(log_floor > 0.0))
      throw std::invalid_argument("AnalysisConfig: log_floor must be positive");
  }
};

/// Canonical 64-bit fingerprint of an analysis configuration; embedded in
/// codebook/token files to detect mismatched pairings.
inline std::uint64_t fingerprint(const AnalysisConfig& c) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(c.n_fft));
  w.u32(static_cast<std::uint32_t>(c.hop));
  w.u8(static_cast<std::uint8_t>(c.window_kind));
  w.u32(static_cast<std::uint32_t>(c.n_mels));
  w.u32(static_cast<std::uint32_t>(c.sample_rate));
  w.f64(c.f_min);
  w.f64(c.f_max);
  w.f64(c.log_floor);
  return fnv1a64(w.data().data(), w.data().size());
}

/// One-sided complex STFT, frames-major: values[t * bins + k].
struct ComplexSpectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;  // n_fft/2 + 1
  std::vector<std::complex<double>> values;
  AnalysisConfig config;

  std::complex<double>& at(std::size_t t, std::size_t k) { return values[t * bins + k]; }
  const std::complex<double>& at(std::size_t t, std::size_t k) const {
    return values[t * bins + k];
  }
};

enum class MelFormula : std::uint8_t { htk = 0 };

/// Triangular mel filterbank, rows-major: weights[m * n_bins + k].  Rows are
/// stored unnormalized (peak value 1 at the filter center).
struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  std::vector<double> weights;
  MelFormula mel_formula = MelFormula::htk;

  double at(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

/// Natural-log mel spectrogram, frames-major: values[t * mels + m].  Every
/// entry is >= log(config.log_floor).
struct LogMelSpectrogram {
  std::size_t frames = 0;
  std::size_t mels = 0;
  std::vector<double> values;
  AnalysisConfig config;

  double& at(std::size_t t, std::size_t m) { return values[t * mels + m]; }
  double at(std::size_t t, std::size_t m) const { return values[t * mels + m]; }
};

// ---------------------------------------------------------------------------
// Windows
// ---------------------------------------------------------------------------

/// Periodic analysis windows of length n_fft.  The periodic form (divide by N
/// rather than N-1) is what makes hann overlap-add exactly at hop = N/4 and
/// N/2.
inline std::vector<double> make_window(WindowKind kind, std::size_t n_fft) {
  if (n_fft < 2) throw std::invalid_argument("make_window: n_fft must be >= 2");
  std::vector<double> w(n_fft);
  constexpr double kTau = 6.283185307179586476925286766559;
  switch (kind) {
    case WindowKind::hann:
      for (std::size_t n = 0; n < n_fft; ++n)
        w[n] = 0.5 - 0.5 * std::cos(kTau * static_cast<double>(n) / static_cast<double>(n_fft));
      break;
    case WindowKind::hamming:
      for (std::size_t n = 0; n < n_fft; ++n)
        w[n] = 0.54 - 0.46 * std::cos(kTau * static_cast<double>(n) / static_cast<double>(n_fft));
      break;
    case WindowKind::rectangular:
      std::fill(w.begin(), w.end(), 1.0);
      break;
    default:
      throw std::invalid_argument("make_window: unsupported window kind");
  }
  return w;
}

// ---------------------------------------------------------------------------
// STFT / ISTFT
// ---------------------------------------------------------------------------

namespace detail {

// Reflect ("bounce") index into [0, n), librosa-style: no edge repetition.
inline std::size_t reflect_index(long long i, long long n) {
  if (n == 1) return 0;
  const long long period = 2 * (n - 1);
  long long m = i % period;
  if (m < 0) m += period;
  return static_cast<std::size_t>(m < n ? m : period - m);
}

// One-sided FFT of window-weighted frames taken directly from x (no padding):
// frame t covers x[t*hop .. t*hop + n_fft).  Caller guarantees the buffer is
// long enough for all T frames.
inline void forward_frames(const double* x, const std::vector<double>& window,
                           std::size_t hop, std::size_t frames,
                           std::complex<double>* out /* frames x bins */) {
  const std::size_t n_fft = window.size();
  const std::size_t bins = n_fft / 2 + 1;
  FftPlan plan(n_fft);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* frame = x + t * hop;
    for (std::size_t n = 0; n < n_fft; ++n) buf[n] = {window[n] * frame[n], 0.0};
    plan.forward(buf.data());
    for (std::size_t k = 0; k < bins; ++k) out[t * bins + k] = buf[k];
  }
}

// Least-squares overlap-add inverse of forward_frames: given spectra C, the
// minimizer over z of sum_t || FFT(w . z[tH..tH+N)) - C_t ||^2 is
//
//   z[n] = sum_t w[n-tH] * IFFT(C_t)[n-tH]  /  sum_t w^2[n-tH],
//
// the squared-window-normalized OLA.  Samples whose normalizer falls below
// `guard` do not influence the objective and are set to zero.  Returns the
// full-length signal ((T-1)*hop + n_fft samples); the normalizer is written
// to *normalizer_out when requested.
inline std::vector<double> ola_least_squares(const std::complex<double>* values,
                                             std::size_t frames, std::size_t bins,
                                             const std::vector<double>& window,
                                             std::size_t hop,
                                             std::vector<double>* normalizer_out = nullptr,
                                             double guard = 1e-10) {
  const std::size_t n_fft = window.size();
  if (bins != n_fft / 2 + 1)
    throw std::invalid_argument("istft: spectrogram bins inconsistent with window length");
  if (hop == 0) throw std::invalid_argument("istft: hop must be positive");
  const std::size_t full_len = (frames - 1) * hop + n_fft;
  std::vector<double> acc(full_len, 0.0);
  std::vector<double> norm(full_len, 0.0);
  FftPlan plan(n_fft);
  std::vector<std::complex<double>> buf(n_fft);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::complex<double>* row = values + t * bins;
    // Hermitian extension of the one-sided spectrum; real part keeps the map
    // linear even if the DC/Nyquist bins carry spurious imaginary parts.
    for (std::size_t k = 0; k < bins; ++k) buf[k] = row[k];
    for (std::size_t k = bins; k < n_fft; ++k) buf[k] = std::conj(row[n_fft - k]);
    plan.inverse(buf.data());
    const std::size_t base = t * hop;
    for (std::size_t n = 0; n < n_fft; ++n) {
      acc[base + n] += window[n] * buf[n].real();
      norm[base + n] += window[n] * window[n];
    }
  }
  for (std::size_t n = 0; n < full_len; ++n) {
    acc[n] = norm[n] < guard ? 0.0 : acc[n] / norm[n];
  }
  if (normalizer_out != nullptr) *normalizer_out = std::move(norm);
  return acc;
}

}  // namespace detail

/// Number of analysis frames for a centered STFT of `len` samples.
inline std::size_t stft_frame_count(std::size_t len, std::size_t hop) {
  return len / hop + 1;
}

/// Centered short-time Fourier transform.  The input is reflect-padded by
/// n_fft/2 on each side, then frame t covers padded samples
/// [t*hop, t*hop + n_fft) and stores the one-sided FFT of the windowed frame
/// (unnormalized forward transform).  T = floor(len/hop) + 1.
inline ComplexSpectrogram stft(const Waveform& wf, const AnalysisConfig& config) {
  config.validate();
  if (wf.samples.empty()) throw std::invalid_argument("stft: empty input");
  if (wf.sample_rate != config.sample_rate) {
    throw std::invalid_argument("stft: waveform sample rate " + std::to_string(wf.sample_rate) +
                                " does not match config " + std::to_string(config.sample_rate));
  }
  const std::size_t len = wf.samples.size();
  const std::size_t pad = config.n_fft / 2;
  std::vector<double> padded(len + 2 * pad);
  const auto n = static_cast<long long>(len);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    padded[i] = wf.samples[detail::reflect_index(static_cast<long long>(i) - static_cast<long long>(pad), n)];
  }

  ComplexSpectrogram out;
  out.config = config;
  out.frames = stft_frame_count(len, config.hop);
  out.bins = config.bins();
  out.values.resize(out.frames * out.bins);
  const std::vector<double> window = make_window(config.window_kind, config.n_fft);
  detail::forward_frames(padded.data(), window, config.hop, out.frames, out.values.data());
  return out;
}

/// Overlap-add inverse STFT with squared-window normalization.  The output is
/// the least-squares signal estimate for the centered analysis above, cropped
/// by n_fft/2 on each side; `original_len` selects the exact crop when the
/// source length is known (0 picks the canonical (T-1)*hop).  Throws when the
/// window/hop pair leaves the OLA normalizer below 1e-10 anywhere in the
/// retained region (a COLA violation).
inline Waveform istft(const ComplexSpectrogram& spec,
                      const std::vector<double>& synthesis_window, std::size_t hop,
                      std::size_t original_len = 0) {
  if (spec.frames == 0) throw std::invalid_argument("istft: empty spectrogram");
  const std::size_t n_fft = synthesis_window.size();
  std::vector<double> norm;
  std::vector<double> full = detail::ola_least_squares(spec.values.data(), spec.frames, spec.bins,
                                                       synthesis_window, hop, &norm);
  const std::size_t pad = n_fft / 2;
  std::size_t out_len = original_len;
  if (out_len == 0) out_len = spec.frames > 1 ? (spec.frames - 1) * hop : n_fft / 2;
  if (pad + out_len > full.size()) {
    throw std::invalid_argument("istft: requested length " + std::to_string(out_len) +
                                " exceeds synthesized span " + std::to_string(full.size() - pad));
  }
  for (std::size_t i = 0; i < out_len; ++i) {
    if (norm[pad + i] < 1e-10) {
      throw std::invalid_argument(
          std::string("istft: window/hop pair violates COLA (normalizer ") +
          std::to_string(norm[pad + i]) + " at interior sample " + std::to_string(i) + ")");
    }
  }
  Waveform out;
  out.sample_rate = spec.config.sample_rate;
  out.samples.assign(full.begin() + static_cast<std::ptrdiff_t>(pad),
                     full.begin() + static_cast<std::ptrdiff_t>(pad + out_len));
  return out;
}

/// Minimum of the squared-window OLA normalizer over the retained (cropped)
/// sample range.  This is the amplification floor of the normalized inverse
/// and enters the synthesis Lipschitz budget as 1/min.
inline double cola_normalizer_min(const std::vector<double>& window, std::size_t hop,
                                  std::size_t frames, std::size_t original_len = 0) {
  const std::size_t n_fft = window.size();
  const std::size_t full_len = (frames - 1) * hop + n_fft;
  std::vector<double> norm(full_len, 0.0);
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t n = 0; n < n_fft; ++n) norm[t * hop + n] += window[n] * window[n];
  const std::size_t pad = n_fft / 2;
  std::size_t out_len = original_len;
  if (out_len == 0) out_len = frames > 1 ? (frames - 1) * hop : n_fft / 2;
  out_len = std::min(out_len, full_len - pad);
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out_len; ++i) lo = std::min(lo, norm[pad + i]);
  return lo;
}

// ---------------------------------------------------------------------------
// Mel filterbank and log-mel features
// ---------------------------------------------------------------------------

/// HTK mel scale: mel(f) = 2595 * log10(1 + f/700).
inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Builds n_mels triangular filters with centers uniformly spaced on the HTK
/// mel scale between f_min and f_max, sampled at the FFT bin frequencies
/// k * sample_rate / n_fft.  Throws (naming the filter) when some filter is
/// narrower than the bin spacing and would end up empty.
inline MelFilterbank make_mel_filterbank(const AnalysisConfig& config) {
  config.validate();
  MelFilterbank fb;
  fb.n_mels = config.n_mels;
  fb.n_bins = config.bins();
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel(config.f_min);
  const double mel_hi = hz_to_mel(config.f_max);
  std::vector<double> edges(config.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(config.n_mels + 1));
  }

  const double bin_hz = static_cast<double>(config.sample_rate) / static_cast<double>(config.n_fft);
  for (std::size_t m = 0; m < config.n_mels; ++m) {
    const double lower = edges[m], center = edges[m + 1], upper = edges[m + 2];
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      double rise = center > lower ? (f - lower) / (center - lower) : 0.0;
      double fall = upper > center ? (upper - f) / (upper - center) : 0.0;
      double w = std::max(0.0, std::min(rise, fall));
      fb.weights[m * fb.n_bins + k] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw std::invalid_argument("make_mel_filterbank: filter " + std::to_string(m) +
                                  " is empty at this FFT resolution; reduce n_mels, raise n_fft, "
                                  "or widen [f_min, f_max]");
    }
  }
  return fb;
}

/// Log-mel features: value[t][m] = ln(max(log_floor, sum_k H_m[k] |X_t[k]|^2)).
inline LogMelSpectrogram log_mel(const ComplexSpectrogram& spec, const MelFilterbank& fb,
                                 double log_floor) {
  if (fb.n_bins != spec.bins) {
    throw std::invalid_argument("log_mel: filterbank has " + std::to_string(fb.n_bins) +
                                " bins but spectrogram has " + std::to_string(spec.bins));
  }
  if (!(log_floor > 0.0)) throw std::invalid_argument("log_mel: log_floor must be positive");
  LogMelSpectrogram out;
  out.frames = spec.frames;
  out.mels = fb.n_mels;
  out.config = spec.config;
  out.config.log_floor = log_floor;
  out.values.resize(out.frames * out.mels);
  std::vector<double> power(spec.bins);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t k = 0; k < spec.bins; ++k) power[k] = std::norm(spec.at(t, k));
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      const double* row = fb.weights.data() + m * fb.n_bins;
      for (std::size_t k = 0; k < spec.bins; ++k) acc += row[k] * power[k];
      out.at(t, m) = std::log(std::max(log_floor, acc));
    }
  }
  return out;
}

/// Convenience path: waveform -> log-mel with the config's filterbank.
inline LogMelSpectrogram log_mel_of(const Waveform& wf, const AnalysisConfig& config) {
  return log_mel(stft(wf, config), make_mel_filterbank(config), config.log_floor);
}

}  // namespace melcap

#endif  // MELCAP_FRONTEND_HPP_
