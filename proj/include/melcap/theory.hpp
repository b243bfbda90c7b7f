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

#ifndef MELCAP_THEORY_HPP_
#define MELCAP_THEORY_HPP_

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "melcap/bytes.hpp"
#include "melcap/frontend.hpp"
#include "melcap/losses.hpp"
#include "melcap/rng.hpp"
#include "melcap/vocoder.hpp"
#include "melcap/vq.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// ISTFT operator bound
// ---------------------------------------------------------------------------

/// Two readings of the overlap-add synthesis bound ||h||_inf * sqrt(N*T):
///
///  - `unitary_form` is that product verbatim, valid when the inverse
///    transform carries a 1/sqrt(N) (unitary) scale.
///  - `convention_adjusted` re-derives the constant for this library:
///    with the 1/N inverse the per-frame Parseval factor becomes 1/sqrt(N),
///    and measuring input norms over the one-sided T x F storage costs a
///    further sqrt(2) (interior bins appear twice in the full spectrum).
///    Net: ||h||_inf * sqrt(2*T).
///
/// Neither value includes the normalized inverse's 1/min(OLA normalizer)
/// amplification, which depends on the hop; compose_lipschitz_budget folds
/// that in.
struct IstftBound {
  double unitary_form = 0.0;
  double convention_adjusted = 0.0;
};

inline IstftBound istft_lipschitz_bound(const std::vector<double>& window, std::size_t n_fft,
                                        std::size_t frames) {
  if (window.empty() || window.size() != n_fft)
    throw std::invalid_argument("istft_lipschitz_bound: window length must equal n_fft");
  if (frames == 0) throw std::invalid_argument("istft_lipschitz_bound: frames must be >= 1");
  double h_inf = 0.0;
  for (double v : window) h_inf = std::max(h_inf, std::abs(v));
  IstftBound b;
  b.unitary_form = h_inf * std::sqrt(static_cast<double>(n_fft) * static_cast<double>(frames));
  b.convention_adjusted = h_inf * std::sqrt(2.0 * static_cast<double>(frames));
  return b;
}

/// Lipschitz budget of the certified synthesis path
/// mel -> P -> fixed phase -> normalized OLA, measured against the
/// log-domain quantization error:
///
///   istft_bound       bound of the normalized, cropped OLA inverse
///                     (= convention-adjusted constant / min normalizer)
///   mel_inverse_norm  ||P||_2
///   exp_bound         e^{v_max}, the clamped exponential's constant
///   composed          product of the three
struct LipschitzBudget {
  double istft_bound = 0.0;
  double mel_inverse_norm = 0.0;
  double exp_bound = 0.0;
  double composed = 0.0;
};

inline LipschitzBudget compose_lipschitz_budget(const std::vector<double>& window,
                                                std::size_t hop, std::size_t frames,
                                                const MelInverse& inv, double v_max) {
  const IstftBound ib = istft_lipschitz_bound(window, window.size(), frames);
  const double norm_min = cola_normalizer_min(window, hop, frames);
  if (!(norm_min > 0.0))
    throw std::invalid_argument("compose_lipschitz_budget: window/hop pair violates COLA");
  LipschitzBudget budget;
  budget.istft_bound = ib.convention_adjusted / norm_min;
  budget.mel_inverse_norm = inv.spectral_norm;
  budget.exp_bound = std::exp(v_max);
  budget.composed = budget.istft_bound * budget.mel_inverse_norm * budget.exp_bound;
  if (!std::isfinite(budget.composed))
    throw std::runtime_error("compose_lipschitz_budget: budget unavailable (norm estimation failed)");
  return budget;
}

// ---------------------------------------------------------------------------
// Empirical Lipschitz estimation
// ---------------------------------------------------------------------------

struct BoundReport {
  std::size_t trials = 0;
  double max_ratio = 0.0;
  double bound = 0.0;
  bool holds = false;
  std::string witness;  // fingerprint of the worst-case input pair
};

/// Samples `trials` input pairs and reports the largest ratio
/// ||map(u) - map(v)|| / ||u - v|| (pairs closer than 1e-12 are skipped).
/// Each trial derives its own generator from (seed, trial), so runs are
/// reproducible and trials could execute in any order.
inline BoundReport empirical_lipschitz(
    const std::function<std::vector<double>(const std::vector<double>&)>& map,
    const std::function<std::vector<double>(Rng&)>& input_sampler, std::size_t trials,
    std::uint64_t seed, double bound) {
  if (trials < 1) throw std::invalid_argument("empirical_lipschitz: trials must be >= 1");
  BoundReport report;
  report.trials = trials;
  report.bound = bound;
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng(splitmix64(seed ^ splitmix64(trial + 1)));
    const std::vector<double> u = input_sampler(rng);
    const std::vector<double> v = input_sampler(rng);
    if (u.size() != v.size())
      throw std::invalid_argument("empirical_lipschitz: sampler returned mismatched sizes");
    double din = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double d = u[i] - v[i];
      din += d * d;
    }
    din = std::sqrt(din);
    if (din < 1e-12) continue;
    std::vector<double> mu, mv;
    try {
      mu = map(u);
      mv = map(v);
    } catch (const std::exception& e) {
      throw std::runtime_error("empirical_lipschitz: map failed at trial " +
                               std::to_string(trial) + ": " + e.what());
    }
    if (mu.size() != mv.size())
      throw std::runtime_error("empirical_lipschitz: map returned mismatched sizes at trial " +
                               std::to_string(trial));
    double dout = 0.0;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      const double d = mu[i] - mv[i];
      dout += d * d;
    }
    dout = std::sqrt(dout);
    const double ratio = dout / din;
    if (ratio > report.max_ratio) {
      report.max_ratio = ratio;
      const std::uint64_t fu = fnv1a64(u.data(), u.size() * sizeof(double));
      const std::uint64_t fv = fnv1a64(v.data(), v.size() * sizeof(double), fu);
      report.witness = "trial " + std::to_string(trial) + " pair " + hex_u64(fv);
    }
  }
  report.holds = report.max_ratio <= report.bound;
  return report;
}

// ---------------------------------------------------------------------------
// Bounded-error verification
// ---------------------------------------------------------------------------

/// Per-clip arithmetic of the two-link error chain.  With s the clamped
/// exponential of the clip's log-mel and s_hat the same after the
/// quantization round trip:
///
///   link 1:  ||f(s_hat) - f(s)||_2  <=  istft_bound * ||P||_2 * ||s_hat - s||_F
///   link 2:  ||s_hat - s||_F        <=  e^{v_max} * delta  (log-domain
///            per-patch distances aggregated as sqrt(sum d^2))
///
/// Ratios are lhs / rhs, so both links hold iff every ratio is <= 1.
struct ClipCheck {
  std::string id;
  double waveform_diff = 0.0;   // ||f(s_hat) - f(s)||_2
  double mel_diff = 0.0;        // ||s_hat - s||_F (linear domain)
  double delta_agg = 0.0;       // sqrt(sum of squared per-patch distances)
  double link1_ratio = 0.0;
  double link2_ratio = 0.0;
};

struct BoundedErrorReport {
  BoundReport report;           // bound = 1.0, ratios normalized per link
  LipschitzBudget budget;
  std::vector<ClipCheck> clips;
};

/// Runs the quantization round trip through the Lipschitz-certified vocoder
/// path for every corpus clip and checks both links of the bounded-error
/// chain.  Requires linear_fixed_phase mode: the Griffin-Lim path's
/// projections are not affine and carry no certificate.
inline BoundedErrorReport verify_bounded_error(const std::vector<Waveform>& corpus,
                                          const Codebook& codebook, const MelInverse& inv,
                                          const VocoderSpec& spec,
                                          const AnalysisConfig& config) {
  if (spec.mode != VocoderMode::linear_fixed_phase) {
    throw std::invalid_argument(
        "verify_bounded_error: the certified path requires linear_fixed_phase mode");
  }
  if (corpus.empty()) throw std::invalid_argument("verify_bounded_error: empty corpus");

  BoundedErrorReport out;
  const MelFilterbank fb = make_mel_filterbank(config);

  for (std::size_t ci = 0; ci < corpus.size(); ++ci) {
    const LogMelSpectrogram lm = log_mel(stft(corpus[ci], config), fb, config.log_floor);
    // The frame count enters the ISTFT constant, so the budget is per clip;
    // the report keeps the largest one.
    const LipschitzBudget budget = compose_lipschitz_budget(spec.synthesis_window, spec.hop,
                                                            lm.frames, inv, spec.v_max);
    if (budget.composed > out.budget.composed) out.budget = budget;

    const PatchGrid grid = patchify(lm, codebook.patch_h, codebook.patch_w);
    const QuantizationReport qr = quantization_delta(codebook, grid.patches);
    double delta2 = 0.0;
    for (double d : qr.per_patch_nearest_dist) delta2 += d * d;

    const TokenGrid tokens = encode(lm, codebook);
    const LogMelSpectrogram decoded =
        decode(tokens, codebook, lm.config, lm.frames, lm.mels, /*allow_mismatch=*/false);

    double mel_diff2 = 0.0;
    for (std::size_t i = 0; i < lm.values.size(); ++i) {
      const double a = std::exp(std::min(lm.values[i], spec.v_max));
      const double b = std::exp(std::min(decoded.values[i], spec.v_max));
      mel_diff2 += (a - b) * (a - b);
    }

    const SynthesisResult ws = synthesize(lm, inv, spec);
    const SynthesisResult wh = synthesize(decoded, inv, spec);
    if (ws.waveform.samples.size() != wh.waveform.samples.size())
      throw std::logic_error("verify_bounded_error: synthesis length mismatch");
    double wav_diff2 = 0.0;
    for (std::size_t i = 0; i < ws.waveform.samples.size(); ++i) {
      const double d = ws.waveform.samples[i] - wh.waveform.samples[i];
      wav_diff2 += d * d;
    }

    ClipCheck check;
    check.id = "clip " + std::to_string(ci) + " fnv " +
               hex_u64(fnv1a64(corpus[ci].samples.data(),
                               corpus[ci].samples.size() * sizeof(double)));
    check.waveform_diff = std::sqrt(wav_diff2);
    check.mel_diff = std::sqrt(mel_diff2);
    check.delta_agg = std::sqrt(delta2);
    const double rhs1 = budget.istft_bound * budget.mel_inverse_norm * check.mel_diff;
    const double rhs2 = budget.exp_bound * check.delta_agg;
    check.link1_ratio = rhs1 > 0.0 ? check.waveform_diff / rhs1
                                   : (check.waveform_diff > 0.0 ? HUGE_VAL : 0.0);
    check.link2_ratio =
        rhs2 > 0.0 ? check.mel_diff / rhs2 : (check.mel_diff > 0.0 ? HUGE_VAL : 0.0);
    out.clips.push_back(std::move(check));
  }

  out.report.trials = corpus.size();
  out.report.bound = 1.0;
  for (const ClipCheck& c : out.clips) {
    const double r = std::max(c.link1_ratio, c.link2_ratio);
    if (r > out.report.max_ratio) {
      out.report.max_ratio = r;
      out.report.witness = c.id;
    }
  }
  out.report.holds = out.report.max_ratio <= out.report.bound;
  return out;
}

// ---------------------------------------------------------------------------
// Loss equivalence
// ---------------------------------------------------------------------------

/// | feature_matching(x, x_hat) - perceptual(|STFT x|, |STFT x_hat|) | with
/// matched normalization (layer sum, unit alphas).  With a shared stack the
/// two sides are the same computation and the residual is ~0 by construction.
inline double loss_equivalence_check(const Waveform& x, const Waveform& x_hat,
                                     const FeatureStack& stack, const AnalysisConfig& cfg) {
  const double fm = feature_matching_loss(x, x_hat, {stack}, {cfg});
  FeatureStack unit = stack;
  for (double& a : unit.alphas) a = 1.0;
  const double pl = perceptual_loss(magnitude(stft(x, cfg)), magnitude(stft(x_hat, cfg)), unit,
                                    LossReduction::layer_sum);
  return std::abs(fm - pl);
}

/// Same comparison with different extractors on the two sides; the residual
/// is generally nonzero and is reported rather than asserted.
inline double loss_equivalence_check(const Waveform& x, const Waveform& x_hat,
                                     const FeatureStack& fm_stack,
                                     const FeatureStack& perceptual_stack,
                                     const AnalysisConfig& cfg) {
  const double fm = feature_matching_loss(x, x_hat, {fm_stack}, {cfg});
  FeatureStack unit = perceptual_stack;
  for (double& a : unit.alphas) a = 1.0;
  const double pl = perceptual_loss(magnitude(stft(x, cfg)), magnitude(stft(x_hat, cfg)), unit,
                                    LossReduction::layer_sum);
  return std::abs(fm - pl);
}

}  // namespace melcap

#endif  // MELCAP_THEORY_HPP_
