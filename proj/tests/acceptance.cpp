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

// Acceptance suite: every release gate in one binary, one pass/fail line per
// criterion, nonzero exit if anything fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "melcap/melcap.hpp"

using namespace melcap;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

int g_failures = 0;

void run_criterion(int number, const std::string& name, double budget_seconds,
                   const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_seconds > 0.0 && elapsed > budget_seconds) {
    outcome.pass = false;
    outcome.detail += (outcome.detail.empty() ? "" : "; ") + std::string("over budget ") +
                      std::to_string(budget_seconds) + " s";
  }
  std::printf("[%s] %2d. %s (%.2f s)%s%s\n", outcome.pass ? "PASS" : "FAIL", number, name.c_str(),
              elapsed, outcome.detail.empty() ? "" : " — ", outcome.detail.c_str());
  std::fflush(stdout);
  if (!outcome.pass) ++g_failures;
}

Waveform synth_clip(Rng& rng, const AnalysisConfig& cfg, std::size_t len) {
  Waveform wf;
  wf.sample_rate = cfg.sample_rate;
  wf.samples.assign(len, 0.0);
  const int partials = 3 + static_cast<int>(rng.index(4));
  for (int p = 0; p < partials; ++p) {
    const double f = rng.uniform(50.0, cfg.sample_rate / 2.3);
    const double a = rng.uniform(0.03, 0.2);
    const double ph = rng.uniform(0.0, 6.283185307179586);
    for (std::size_t n = 0; n < len; ++n)
      wf.samples[n] += a * std::sin(6.283185307179586 * f * n / cfg.sample_rate + ph);
  }
  for (double& s : wf.samples) s += 0.01 * rng.normal();
  return wf;
}

double l2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

// 1. Hann COLA round trip, hop in {256, 512}, 100 random 1 s signals.
Outcome cola_round_trip() {
  AnalysisConfig cfg;
  const auto window = make_window(WindowKind::hann, cfg.n_fft);
  double worst = 0.0;
  for (std::size_t hop : {std::size_t{256}, std::size_t{512}}) {
    AnalysisConfig hcfg = cfg;
    hcfg.hop = hop;
    Rng rng(4000 + hop);
    for (int trial = 0; trial < 100; ++trial) {
      Waveform wf;
      wf.sample_rate = cfg.sample_rate;
      wf.samples.resize(44100);
      for (double& s : wf.samples) s = rng.uniform(-0.8, 0.8);
      const Waveform back = istft(stft(wf, hcfg), window, hop, wf.samples.size());
      double err2 = 0.0, ref2 = 0.0;
      for (std::size_t i = 0; i < wf.samples.size(); ++i) {
        err2 += (back.samples[i] - wf.samples[i]) * (back.samples[i] - wf.samples[i]);
        ref2 += wf.samples[i] * wf.samples[i];
      }
      worst = std::max(worst, std::sqrt(err2 / ref2));
    }
  }
  std::ostringstream ss;
  ss << "worst rel err " << worst;
  return {worst <= 1e-6, ss.str()};
}

// 2. ISTFT Lipschitz: 1000 random spectrogram pairs vs the
//    convention-adjusted bound derived from ||h||inf*sqrt(NT).
Outcome istft_lipschitz() {
  AnalysisConfig cfg;
  const auto window = make_window(WindowKind::hann, cfg.n_fft);
  const std::size_t frames = 96, bins = cfg.bins();
  const IstftBound ib = istft_lipschitz_bound(window, cfg.n_fft, frames);
  const double raw_expected = 313.5346870695;
  if (std::abs(ib.unitary_form - raw_expected) > 1e-6)
    return {false, "unitary-form constant drifted"};
  const double bound = ib.convention_adjusted / cola_normalizer_min(window, cfg.hop, frames);
  auto sampler = [frames, bins](Rng& rng) {
    std::vector<double> flat(2 * frames * bins);
    for (double& v : flat) v = rng.normal();
    return flat;
  };
  auto map = [&cfg, &window, frames, bins](const std::vector<double>& flat) {
    ComplexSpectrogram spec;
    spec.frames = frames;
    spec.bins = bins;
    spec.config = cfg;
    spec.values.resize(frames * bins);
    for (std::size_t i = 0; i < spec.values.size(); ++i)
      spec.values[i] = {flat[2 * i], flat[2 * i + 1]};
    return istft(spec, window, cfg.hop).samples;
  };
  const BoundReport r = empirical_lipschitz(map, sampler, 1000, 20260809, bound);
  std::ostringstream ss;
  ss << "max ratio " << r.max_ratio << " vs bound " << bound << " (unitary form "
     << ib.unitary_form << ")";
  return {r.holds, ss.str()};
}

// 3. Bounded waveform error: 100 clips, K=1024, linear_fixed_phase.
Outcome bounded_error() {
  AnalysisConfig cfg;
  Rng rng(515253);
  std::vector<Waveform> clips;
  for (int i = 0; i < 100; ++i) clips.push_back(synth_clip(rng, cfg, 24320));

  PatchSet patches;
  patches.dim = 64;
  for (const Waveform& clip : clips) {
    const PatchGrid g = patchify(log_mel_of(clip, cfg), 8, 8);
    patches.data.insert(patches.data.end(), g.patches.data.begin(), g.patches.data.end());
    patches.count += g.patches.count;
  }
  TrainResult trained = train_codebook(patches, 1024, 25, 1e-6, 99, /*jobs=*/2);
  trained.codebook.patch_h = trained.codebook.patch_w = 8;

  const MelInverse inv = make_mel_inverse(make_mel_filterbank(cfg), 1e-6);
  VocoderSpec spec;
  spec.mode = VocoderMode::linear_fixed_phase;
  spec.seed = 2;
  spec.synthesis_window = make_window(cfg.window_kind, cfg.n_fft);
  spec.hop = cfg.hop;

  const BoundedErrorReport r = verify_bounded_error(clips, trained.codebook, inv, spec, cfg);
  std::size_t held = 0;
  for (const ClipCheck& c : r.clips)
    if (c.link1_ratio <= 1.0 && c.link2_ratio <= 1.0) ++held;
  std::ostringstream ss;
  ss << held << "/" << r.clips.size() << " clips, worst ratio " << r.report.max_ratio;
  return {held == r.clips.size() && r.report.holds, ss.str()};
}

// 4. Token rate arithmetic.
Outcome token_rate_check() {
  AnalysisConfig cfg;
  const double rate = token_rate(cfg, 8, 8);
  std::ostringstream ss;
  ss << "rate " << rate << " tokens/s";
  const bool ok = std::abs(rate - 258.40) <= 0.01 && std::abs(rate - 260.0) <= 2.0;
  return {ok, ss.str()};
}

// 5. Loss identities: exact zero on identical inputs; equivalence residual
//    <= 1e-9 on 50 random pairs.
Outcome loss_identities() {
  AnalysisConfig cfg;
  cfg.n_fft = 256;
  cfg.hop = 64;
  Rng rng(77007);
  const FeatureStack stack = make_seeded_stack(606, {4, 8});

  LogMelSpectrogram lm;
  lm.frames = 24;
  lm.mels = 32;
  lm.config = cfg;
  lm.values.resize(24 * 32);
  for (double& v : lm.values) v = rng.uniform(-8.0, 2.0);
  Waveform x = synth_clip(rng, cfg, 4000);

  bool zeros = l1_mel(lm, lm) == 0.0;
  zeros = zeros && perceptual_loss(as_matrix(lm), as_matrix(lm), stack) == 0.0;
  zeros = zeros && gram_loss(as_matrix(lm), as_matrix(lm), stack) == 0.0;
  zeros = zeros && feature_matching_loss(x, x, {stack}, {cfg}) == 0.0;
  zeros = zeros && multiscale_stft_distance(x, x) == 0.0;
  if (!zeros) return {false, "a loss is nonzero on identical inputs"};

  double worst = 0.0;
  for (int pair = 0; pair < 50; ++pair) {
    const Waveform a = synth_clip(rng, cfg, 1800);
    const Waveform b = synth_clip(rng, cfg, 1800);
    worst = std::max(worst, loss_equivalence_check(a, b, stack, cfg));
  }
  std::ostringstream ss;
  ss << "five exact zeros; worst equivalence residual " << worst;
  return {worst <= 1e-9, ss.str()};
}

// 6. Snake derivative vs central differences, and its 2-Lipschitz bound.
Outcome snake_checks() {
  const double h = 1e-5;
  double worst = 0.0;
  for (double a : {0.5, 1.0, 5.0}) {
    for (double x = -10.0; x <= 10.0; x += 1e-3) {
      const double fd = (snake(x + h, a) - snake(x - h, a)) / (2.0 * h);
      const double exact = snake_derivative(x, a);
      worst = std::max(worst, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
    }
  }
  if (worst > 1e-6) {
    return {false, "finite-difference mismatch " + std::to_string(worst)};
  }
  auto sampler = [](Rng& rng) {
    std::vector<double> v(128);
    for (double& x : v) x = rng.uniform(-10.0, 10.0);
    return v;
  };
  auto map = [](const std::vector<double>& v) {
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = snake(v[i], 1.0);
    return out;
  };
  const BoundReport r = empirical_lipschitz(map, sampler, 500, 8, 2.0 + 1e-6);
  std::ostringstream ss;
  ss << "fd mismatch " << worst << "; empirical Lipschitz " << r.max_ratio;
  return {r.holds, ss.str()};
}

// 7. k-means: per-iteration monotonicity on 10 datasets; held-out distortion
//    non-increasing over K on a >= 60 s corpus.
Outcome kmeans_checks() {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(9000 + seed);
    PatchSet pts;
    pts.count = 600;
    pts.dim = 12;
    pts.data.resize(600 * 12);
    for (double& v : pts.data) v = rng.normal();
    const TrainResult r = train_codebook(pts, 24, 30, 0.0, seed);
    for (std::size_t i = 1; i < r.distortion_history.size(); ++i) {
      if (r.distortion_history[i] > r.distortion_history[i - 1] * (1.0 + 1e-12))
        return {false, "distortion increased on dataset " + std::to_string(seed)};
    }
  }

  AnalysisConfig cfg;
  Rng rng(616263);
  PatchSet train, held;
  train.dim = held.dim = 64;
  const int train_tiles = 100, held_tiles = 20;  // 100 tiles ≈ 55 s + 20 held ≈ 66 s total
  for (int i = 0; i < train_tiles + held_tiles; ++i) {
    const Waveform clip = synth_clip(rng, cfg, 24320);
    const PatchGrid g = patchify(log_mel_of(clip, cfg), 8, 8);
    PatchSet& dst = i < train_tiles ? train : held;
    dst.data.insert(dst.data.end(), g.patches.data.begin(), g.patches.data.end());
    dst.count += g.patches.count;
  }
  std::ostringstream ss;
  ss << "held-out mse:";
  double prev = HUGE_VAL;
  for (std::size_t k : {16u, 64u, 256u, 1024u}) {
    const TrainResult r = train_codebook(train, k, 20, 1e-6, 31, /*jobs=*/2);
    double mse = 0.0;
    for (std::size_t i = 0; i < held.count; ++i) {
      const QuantizeResult q = quantize(held.patch(i), held.dim, r.codebook);
      mse += q.distance * q.distance;
    }
    mse /= static_cast<double>(held.count);
    ss << " K=" << k << ":" << mse;
    if (mse > prev * (1.0 + 1e-9)) return {false, ss.str() + " (increased)"};
    prev = mse;
  }
  return {true, ss.str()};
}

// 8. Griffin-Lim consistency residual non-increasing over 32 iterations on 20
//    random magnitude targets.
Outcome griffin_lim_monotone() {
  AnalysisConfig cfg;
  const MelInverse inv = make_mel_inverse(make_mel_filterbank(cfg), 1e-6);
  VocoderSpec spec;
  spec.mode = VocoderMode::griffin_lim;
  spec.griffin_lim_iters = 32;
  spec.synthesis_window = make_window(cfg.window_kind, cfg.n_fft);
  spec.hop = cfg.hop;
  Rng rng(717273);
  double worst_step = 0.0;
  for (int target = 0; target < 20; ++target) {
    spec.seed = 1000 + target;
    LogMelSpectrogram lm;
    lm.frames = 24;
    lm.mels = cfg.n_mels;
    lm.config = cfg;
    lm.values.resize(lm.frames * lm.mels);
    for (double& v : lm.values) v = rng.uniform(-8.0, 3.0);
    const SynthesisResult r = synthesize(lm, inv, spec);
    if (r.consistency_residuals.size() != 32) return {false, "missing residual trace"};
    for (std::size_t i = 1; i < r.consistency_residuals.size(); ++i) {
      worst_step =
          std::max(worst_step, r.consistency_residuals[i] - r.consistency_residuals[i - 1]);
    }
  }
  std::ostringstream ss;
  ss << "worst residual step " << worst_step;
  return {worst_step <= 1e-9, ss.str()};
}

// 9. LSD / mel distance / multiscale STFT distance strictly increase with
//    additive-noise level, averaged over 20 seeds.
Outcome metric_monotonicity() {
  AnalysisConfig cfg;
  Rng rng(818283);
  const Waveform x = synth_clip(rng, cfg, 30000);
  const double sigmas[3] = {1e-3, 1e-2, 1e-1};
  double lsd_mean[3] = {0, 0, 0}, mel_mean[3] = {0, 0, 0}, stft_mean[3] = {0, 0, 0};
  for (int level = 0; level < 3; ++level) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      Waveform y = x;
      Rng noise(splitmix64(seed * 31 + level));
      for (double& s : y.samples) s += sigmas[level] * noise.normal();
      lsd_mean[level] += lsd(x, y, cfg);
      mel_mean[level] += mel_distance(x, y, cfg);
      stft_mean[level] += stft_distance(x, y);
    }
  }
  std::ostringstream ss;
  ss << "lsd " << lsd_mean[0] / 20 << "/" << lsd_mean[1] / 20 << "/" << lsd_mean[2] / 20;
  const bool ok = lsd_mean[0] < lsd_mean[1] && lsd_mean[1] < lsd_mean[2] &&
                  mel_mean[0] < mel_mean[1] && mel_mean[1] < mel_mean[2] &&
                  stft_mean[0] < stft_mean[1] && stft_mean[1] < stft_mean[2];
  return {ok, ss.str()};
}

// 10. Byte-exact / value-exact round trips of every file format.
Outcome format_round_trips() {
  const fs::path dir = fs::temp_directory_path() / "melcap_acceptance_fmt";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(929394);

  Codebook cb;
  cb.k = 64;
  cb.dim = 64;
  cb.patch_h = cb.patch_w = 8;
  cb.config_hash = fingerprint(AnalysisConfig{});
  cb.entries.resize(cb.k * cb.dim);
  for (float& v : cb.entries) v = static_cast<float>(rng.normal());
  const std::string cb_path = (dir / "c.mcbk").string();
  save_codebook(cb_path, cb);
  const Codebook cb2 = load_codebook(cb_path);
  if (serialize_codebook(cb2) != serialize_codebook(cb) || cb2.entries != cb.entries ||
      cb2.config_hash != cb.config_hash || cb2.patch_h != cb.patch_h) {
    return {false, "MCBK round trip differs"};
  }

  TokenGrid t;
  t.rows = 12;
  t.cols = 12;
  t.indices.resize(144);
  for (auto& idx : t.indices) idx = static_cast<std::uint32_t>(rng.index(64));
  t.codebook_id = cb.hash();
  t.config_hash = cb.config_hash;
  const std::string t_path = (dir / "t.mcap").string();
  save_tokens(t_path, t);
  const TokenGrid t2 = load_tokens(t_path);
  if (serialize_tokens(t2) != serialize_tokens(t) || t2.indices != t.indices) {
    return {false, "MCAP round trip differs"};
  }

  FeatureStack stack = make_seeded_stack(55, {4, 8});
  stack.layers[0].activation = Activation::snake;
  stack.layers[0].snake_a = 1.25;
  const std::string s_path = (dir / "s.mfst").string();
  save_feature_stack(s_path, stack);
  const FeatureStack s2 = load_feature_stack(s_path);
  if (serialize_feature_stack(s2) != serialize_feature_stack(load_feature_stack(s_path))) {
    return {false, "MFST re-serialization differs"};
  }
  for (std::size_t li = 0; li < stack.layers.size(); ++li) {
    for (std::size_t i = 0; i < stack.layers[li].weights.size(); ++i) {
      if (s2.layers[li].weights[i] !=
          static_cast<double>(static_cast<float>(stack.layers[li].weights[i]))) {
        return {false, "MFST payload differs from its f32 image"};
      }
    }
  }

  CorpusEvaluation eval;
  MetricsReport row;
  row.file = "x.wav";
  row.lsd = 1.0 / 3.0;
  row.mel_distance = 2.5e-17;
  row.stft_distance = 1234.56789;
  row.mae_mel = 0.26;
  eval.rows = {row};
  eval.mean = row;
  eval.mean.file = "MEAN";
  const std::string csv_path = (dir / "m.csv").string();
  write_metrics_csv(csv_path, eval);
  const CorpusEvaluation eval2 = read_metrics_csv(csv_path);
  if (eval2.rows.size() != 1 || eval2.rows[0].lsd != row.lsd ||
      eval2.rows[0].mel_distance != row.mel_distance ||
      eval2.rows[0].stft_distance != row.stft_distance || eval2.rows[0].mae_mel != row.mae_mel ||
      eval2.mean.lsd != row.lsd) {
    return {false, "metrics CSV round trip differs"};
  }

  fs::remove_all(dir);
  return {true, "MCBK, MCAP, MFST, CSV all stable"};
}

}  // namespace

int main() {
  std::printf("melcap acceptance suite\n");
  run_criterion(1, "COLA round-trip (hann, hop 256/512, 100 waveforms)", 5.0, cola_round_trip);
  run_criterion(2, "ISTFT Lipschitz bound (1000 spectrogram pairs)", 30.0, istft_lipschitz);
  run_criterion(3, "bounded waveform error (100 clips, K=1024)", 120.0, bounded_error);
  run_criterion(4, "token rate 258.40 +- 0.01 (within 2 of 260)", 0.0, token_rate_check);
  run_criterion(5, "loss identities and equivalence residual", 0.0, loss_identities);
  run_criterion(6, "snake derivative and 2-Lipschitz bound", 0.0, snake_checks);
  run_criterion(7, "k-means monotonicity and held-out distortion", 120.0, kmeans_checks);
  run_criterion(8, "Griffin-Lim residual non-increasing (32 iters, 20 targets)", 0.0,
                griffin_lim_monotone);
  run_criterion(9, "metric monotonicity over noise levels", 0.0, metric_monotonicity);
  run_criterion(10, "format round trips (MCBK/MCAP/MFST/CSV)", 0.0, format_round_trips);
  if (g_failures > 0) {
    std::printf("%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
