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

#ifndef MELCAP_CLI_HPP_
#define MELCAP_CLI_HPP_

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "melcap/config.hpp"
#include "melcap/formats.hpp"
#include "melcap/frontend.hpp"
#include "melcap/metrics.hpp"
#include "melcap/theory.hpp"
#include "melcap/vocoder.hpp"
#include "melcap/vq.hpp"
#include "melcap/wav.hpp"

namespace melcap::cli {

// Verbosity from MELCAP_LOG: quiet|0, info|1 (default), debug|2.
inline int log_level() {
  static const int level = [] {
    const char* env = std::getenv("MELCAP_LOG");
    if (env == nullptr) return 1;
    const std::string v(env);
    if (v == "quiet" || v == "0") return 0;
    if (v == "debug" || v == "2") return 2;
    return 1;
  }();
  return level;
}

inline void info(const std::string& msg) {
  if (log_level() >= 1) std::cout << msg << "\n";
}

inline void debug(const std::string& msg) {
  if (log_level() >= 2) std::cout << msg << "\n";
}

inline void warn(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "warning: " << msg << "\n";
}

inline void print_fingerprint(const RunConfig& cfg) {
  info("config fingerprint: " + hex_u64(cfg.analysis_fingerprint()));
}

// ---------------------------------------------------------------------------
// Sidecar metadata (key = value text files next to artifacts)
// ---------------------------------------------------------------------------

inline void write_sidecar(const std::string& path,
                          const std::vector<std::pair<std::string, std::string>>& entries) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write sidecar: " + path);
  for (const auto& [k, v] : entries) out << k << " = " << v << "\n";
}

inline std::map<std::string, std::string> read_sidecar(const std::string& path) {
  std::map<std::string, std::string> entries;
  std::ifstream in(path);
  if (!in) return entries;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      const std::size_t e = s.find_last_not_of(" \t\r");
      return s.substr(b, e - b + 1);
    };
    entries[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return entries;
}

// ---------------------------------------------------------------------------
// Corpus scanning and tiling
// ---------------------------------------------------------------------------

/// Recursively collects *.wav paths under `dir`, sorted for determinism.
inline std::vector<std::string> scan_corpus(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".wav") files.push_back(entry.path().string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Samples per training tile: a (crop_frames-1)*hop chunk analyzes to exactly
/// crop_frames centered frames (24320 samples for the 96-frame default).
inline std::size_t tile_samples(const RunConfig& cfg) {
  return (cfg.crop_frames - 1) * cfg.analysis.hop;
}

/// Cuts a waveform into non-overlapping tile-sized chunks (trailing partial
/// chunk dropped).
inline std::vector<Waveform> chunk_waveform(const Waveform& wf, std::size_t chunk_len) {
  std::vector<Waveform> chunks;
  if (chunk_len == 0) return chunks;
  for (std::size_t start = 0; start + chunk_len <= wf.samples.size(); start += chunk_len) {
    Waveform c;
    c.sample_rate = wf.sample_rate;
    c.samples.assign(wf.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     wf.samples.begin() + static_cast<std::ptrdiff_t>(start + chunk_len));
    chunks.push_back(std::move(c));
  }
  return chunks;
}

// ---------------------------------------------------------------------------
// Commands.  Each throws std::invalid_argument for validation problems and
// IoError for file problems; main() maps these to exit codes 1 and 2.
// ---------------------------------------------------------------------------

inline void cmd_train_codebook(const std::string& corpus_dir, const RunConfig& cfg,
                               const std::string& out_path, std::size_t jobs = 1) {
  cfg.validate();
  print_fingerprint(cfg);
  const std::vector<std::string> files = scan_corpus(corpus_dir);
  if (files.empty()) throw std::invalid_argument("corpus is empty: " + corpus_dir);

  PatchSet patches;
  patches.dim = cfg.patch_h * cfg.patch_w;
  std::uint64_t corpus_fnv = 0xCBF29CE484222325ULL;
  std::size_t tiles_total = 0;
  for (const std::string& path : files) {
    WavReadResult wav;
    try {
      wav = read_wav(path);
    } catch (const IoError& e) {
      warn(std::string(e.what()) + " (skipped)");
      continue;
    }
    for (const std::string& w : wav.warnings) warn(w);
    if (wav.waveform.sample_rate != cfg.analysis.sample_rate) {
      warn(path + ": sample rate " + std::to_string(wav.waveform.sample_rate) +
           " != config " + std::to_string(cfg.analysis.sample_rate) + " (skipped)");
      continue;
    }
    if (wav.waveform.samples.empty()) {
      warn(path + ": empty audio (skipped)");
      continue;
    }
    for (const Waveform& tile : chunk_waveform(wav.waveform, tile_samples(cfg))) {
      const PatchGrid grid =
          patchify(log_mel_of(tile, cfg.analysis), cfg.patch_h, cfg.patch_w);
      patches.data.insert(patches.data.end(), grid.patches.data.begin(),
                          grid.patches.data.end());
      patches.count += grid.patches.count;
      ++tiles_total;
    }
    corpus_fnv = fnv1a64(path.data(), path.size(), corpus_fnv);
  }
  if (patches.count == 0)
    throw std::invalid_argument("corpus produced no training tiles (need at least " +
                                std::to_string(tile_samples(cfg)) + " samples per file)");
  info("corpus: " + std::to_string(files.size()) + " files, " + std::to_string(tiles_total) +
       " tiles, " + std::to_string(patches.count) + " patches of dim " +
       std::to_string(patches.dim));

  TrainResult trained = train_codebook(patches, cfg.codebook_size, cfg.kmeans_max_iters,
                                       cfg.kmeans_tol, cfg.seed_codebook, jobs);
  for (std::size_t i = 0; i < trained.distortion_history.size(); ++i) {
    info("iter " + std::to_string(i) + ": distortion " +
         std::to_string(trained.distortion_history[i]));
  }
  trained.codebook.patch_h = static_cast<std::uint16_t>(cfg.patch_h);
  trained.codebook.patch_w = static_cast<std::uint16_t>(cfg.patch_w);
  trained.codebook.config_hash = cfg.analysis_fingerprint();
  trained.codebook.trained_on = hex_u64(corpus_fnv);
  save_codebook(out_path, trained.codebook);
  info("codebook " + hex_u64(trained.codebook.hash()) + " -> " + out_path);
}

inline Codebook load_codebook_checked(const std::string& path, const RunConfig& cfg,
                                      bool force_mismatch) {
  Codebook cb = load_codebook(path);
  if (cb.config_hash != cfg.analysis_fingerprint()) {
    const std::string msg = path + ": codebook was trained under config " +
                            hex_u64(cb.config_hash) + " but the current config is " +
                            hex_u64(cfg.analysis_fingerprint());
    if (!force_mismatch) throw std::invalid_argument(msg + " (use --force-mismatch to override)");
    warn(msg + " (forced)");
  }
  return cb;
}

inline void cmd_encode(const std::string& wav_path, const std::string& codebook_path,
                       const RunConfig& cfg, const std::string& out_path,
                       bool force_mismatch = false) {
  cfg.validate();
  print_fingerprint(cfg);
  const Codebook cb = load_codebook_checked(codebook_path, cfg, force_mismatch);
  const WavReadResult wav = read_wav(wav_path);
  for (const std::string& w : wav.warnings) warn(w);
  if (wav.waveform.sample_rate != cfg.analysis.sample_rate) {
    throw std::invalid_argument(wav_path + ": sample rate " +
                                std::to_string(wav.waveform.sample_rate) +
                                " does not match config " +
                                std::to_string(cfg.analysis.sample_rate));
  }
  const LogMelSpectrogram lm = log_mel_of(wav.waveform, cfg.analysis);
  const TokenGrid tokens = encode(lm, cb);
  save_tokens(out_path, tokens);
  write_sidecar(out_path + ".meta.txt",
                {{"frames", std::to_string(lm.frames)},
                 {"mels", std::to_string(lm.mels)},
                 {"samples", std::to_string(wav.waveform.samples.size())},
                 {"sample_rate", std::to_string(wav.waveform.sample_rate)}});
  info("tokens " + std::to_string(tokens.rows) + "x" + std::to_string(tokens.cols) + " -> " +
       out_path);
}

/// Decoded log-mel text format: first line "melcap-logmel,<frames>,<mels>",
/// then one comma-separated row per frame.
inline void write_logmel_csv(const std::string& path, const LogMelSpectrogram& lm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "melcap-logmel," << lm.frames << ',' << lm.mels << "\n";
  for (std::size_t t = 0; t < lm.frames; ++t) {
    for (std::size_t m = 0; m < lm.mels; ++m) {
      if (m > 0) out << ',';
      out << detail::csv_double(lm.at(t, m));
    }
    out << "\n";
  }
  if (!out) throw IoError("short write: " + path);
}

inline LogMelSpectrogram decode_tokens_file(const std::string& tokens_path,
                                            const std::string& codebook_path,
                                            const RunConfig& cfg, bool force_mismatch) {
  const Codebook cb = load_codebook_checked(codebook_path, cfg, force_mismatch);
  const TokenGrid tokens = load_tokens(tokens_path);
  if (tokens.config_hash != cfg.analysis_fingerprint()) {
    const std::string msg = tokens_path + ": tokens carry config " +
                            hex_u64(tokens.config_hash) + " but the current config is " +
                            hex_u64(cfg.analysis_fingerprint());
    if (!force_mismatch) throw std::invalid_argument(msg + " (use --force-mismatch to override)");
    warn(msg + " (forced)");
  }
  std::size_t frames = 0, mels = 0;
  const auto meta = read_sidecar(tokens_path + ".meta.txt");
  if (auto it = meta.find("frames"); it != meta.end()) frames = std::stoull(it->second);
  if (auto it = meta.find("mels"); it != meta.end()) mels = std::stoull(it->second);
  if (tokens.codebook_id != cb.hash()) {
    const std::string msg = tokens_path + ": tokens were produced with codebook " +
                            hex_u64(tokens.codebook_id) + " but " + codebook_path + " hashes to " +
                            hex_u64(cb.hash());
    if (!force_mismatch) throw std::invalid_argument(msg + " (use --force-mismatch to override)");
    warn(msg + " (forced)");
  }
  return decode(tokens, cb, cfg.analysis, frames, mels, /*allow_mismatch=*/true);
}

inline void cmd_decode(const std::string& tokens_path, const std::string& codebook_path,
                       const RunConfig& cfg, const std::string& out_path,
                       bool force_mismatch = false) {
  cfg.validate();
  print_fingerprint(cfg);
  const LogMelSpectrogram lm = decode_tokens_file(tokens_path, codebook_path, cfg, force_mismatch);
  write_logmel_csv(out_path, lm);
  info("log-mel " + std::to_string(lm.frames) + "x" + std::to_string(lm.mels) + " -> " + out_path);
}

/// Synthesizes a waveform from either a token file (through the codebook) or
/// a WAV file (ground-truth mel path).  Output is 32-bit float WAV plus a
/// sidecar with mode, seed, iterations and the clamp count.
inline void cmd_synth(const std::string& input_path, const std::string& codebook_path,
                      const RunConfig& cfg, const std::string& out_wav,
                      bool force_mismatch = false) {
  cfg.validate();
  print_fingerprint(cfg);

  LogMelSpectrogram lm;
  std::string source_kind;
  std::string lower = input_path;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower.size() >= 4 && lower.compare(lower.size() - 4, 4, ".wav") == 0) {
    const WavReadResult wav = read_wav(input_path);
    for (const std::string& w : wav.warnings) warn(w);
    if (wav.waveform.sample_rate != cfg.analysis.sample_rate)
      throw std::invalid_argument(input_path + ": sample rate does not match config");
    lm = log_mel_of(wav.waveform, cfg.analysis);
    source_kind = "wav";
  } else {
    if (codebook_path.empty())
      throw std::invalid_argument("synth from tokens requires --codebook");
    lm = decode_tokens_file(input_path, codebook_path, cfg, force_mismatch);
    source_kind = "tokens";
  }

  const MelFilterbank fb = make_mel_filterbank(cfg.analysis);
  const MelInverse inv = make_mel_inverse(fb, cfg.ridge_lambda);
  const VocoderSpec spec = cfg.vocoder_spec();
  const SynthesisResult synth = synthesize(lm, inv, spec);
  write_wav(out_wav, synth.waveform, WavSampleFormat::float32);

  double peak = 0.0;
  for (double s : synth.waveform.samples) peak = std::max(peak, std::abs(s));
  write_sidecar(out_wav + ".meta.txt",
                {{"mode", spec.mode == VocoderMode::griffin_lim ? "griffin_lim"
                                                                : "linear_fixed_phase"},
                 {"seed", std::to_string(spec.seed)},
                 {"iters", std::to_string(spec.mode == VocoderMode::griffin_lim
                                              ? spec.griffin_lim_iters
                                              : 0)},
                 {"clamped_cells", std::to_string(synth.clamped_cells)},
                 {"peak", detail::csv_double(peak)},
                 {"source", source_kind},
                 {"config", hex_u64(cfg.analysis_fingerprint())}});
  info("waveform " + std::to_string(synth.waveform.samples.size()) + " samples -> " + out_wav +
       " (clamped cells: " + std::to_string(synth.clamped_cells) + ")");
}

/// Returns 0 when at least one pair was evaluated, 1 when everything was
/// skipped.
inline int cmd_eval(const std::string& ref_dir, const std::string& deg_dir, const RunConfig& cfg,
                    const std::string& out_csv, std::size_t jobs = 1) {
  cfg.validate();
  print_fingerprint(cfg);
  const CorpusEvaluation eval = evaluate_corpus(ref_dir, deg_dir, cfg.analysis, jobs);
  for (const std::string& s : eval.skipped) warn("skipped " + s);
  write_metrics_csv(out_csv, eval);
  info("evaluated " + std::to_string(eval.rows.size()) + " pairs -> " + out_csv);
  if (!eval.rows.empty()) {
    info("mean: lsd " + std::to_string(eval.mean.lsd) + ", mel_dist " +
         std::to_string(eval.mean.mel_distance) + ", stft_dist " +
         std::to_string(eval.mean.stft_distance) + ", mae_mel " +
         std::to_string(eval.mean.mae_mel));
  }
  return eval.rows.empty() ? 1 : 0;
}

// ---------------------------------------------------------------------------
// verify-theory
// ---------------------------------------------------------------------------

/// Deterministic synthetic clip: a few random sinusoids plus noise, length
/// chosen so the centered analysis yields exactly `frames` frames.
inline Waveform make_test_clip(Rng& rng, const AnalysisConfig& cfg, std::size_t frames) {
  Waveform wf;
  wf.sample_rate = cfg.sample_rate;
  const std::size_t len = (frames - 1) * cfg.hop;
  wf.samples.assign(len, 0.0);
  const int partials = 3 + static_cast<int>(rng.index(4));
  for (int p = 0; p < partials; ++p) {
    const double freq = rng.uniform(40.0, cfg.sample_rate / 2.2);
    const double amp = rng.uniform(0.02, 0.25);
    const double phase = rng.uniform(0.0, 6.283185307179586);
    for (std::size_t n = 0; n < len; ++n) {
      wf.samples[n] +=
          amp * std::sin(6.283185307179586 * freq * static_cast<double>(n) /
                             static_cast<double>(cfg.sample_rate) +
                         phase);
    }
  }
  for (std::size_t n = 0; n < len; ++n) wf.samples[n] += 0.01 * rng.normal();
  return wf;
}

struct TheoryRunResult {
  BoundReport istft_check;
  double istft_unitary_form = 0.0;  // ||h||_inf * sqrt(NT), unitary-scale convention
  double istft_adjusted = 0.0;      // re-derived constant before the OLA-normalizer factor
  BoundedErrorReport theorem;
  BoundReport snake_check;
  double loss_equivalence_shared = 0.0;    // shared stack (contract <= 1e-9)
  double loss_equivalence_distinct = 0.0;  // different stacks (reported only)
  bool all_hold = false;
};

/// Runs the executable verification suite: empirical ISTFT Lipschitz check
/// against the convention-adjusted bound, the bounded-error chain on a clip
/// corpus, the snake derivative bound, and the loss-equivalence residual.
/// Writes a text and a CSV report when `report_prefix` is nonempty.
inline TheoryRunResult run_verify_theory(const RunConfig& cfg,
                                         const std::string& report_prefix = "",
                                         std::size_t istft_trials = 1000,
                                         std::size_t n_clips = 100, std::size_t jobs = 1) {
  cfg.validate();
  print_fingerprint(cfg);
  TheoryRunResult result;
  const std::vector<double> window = make_window(cfg.analysis.window_kind, cfg.analysis.n_fft);
  const std::size_t frames = cfg.crop_frames;
  const std::size_t bins = cfg.analysis.bins();

  // 1. ISTFT operator: empirical ratio vs convention-adjusted bound.
  {
    const IstftBound ib = istft_lipschitz_bound(window, cfg.analysis.n_fft, frames);
    const double norm_min = cola_normalizer_min(window, cfg.analysis.hop, frames);
    const double bound = ib.convention_adjusted / norm_min;
    AnalysisConfig acfg = cfg.analysis;
    auto sampler = [frames, bins](Rng& rng) {
      std::vector<double> flat(2 * frames * bins);
      for (double& v : flat) v = rng.normal();
      return flat;
    };
    auto map = [&acfg, &window, frames, bins](const std::vector<double>& flat) {
      ComplexSpectrogram spec;
      spec.frames = frames;
      spec.bins = bins;
      spec.config = acfg;
      spec.values.resize(frames * bins);
      for (std::size_t i = 0; i < spec.values.size(); ++i)
        spec.values[i] = {flat[2 * i], flat[2 * i + 1]};
      return istft(spec, window, acfg.hop).samples;
    };
    result.istft_unitary_form = ib.unitary_form;
    result.istft_adjusted = ib.convention_adjusted;
    result.istft_check = empirical_lipschitz(map, sampler, istft_trials, cfg.seed_theory, bound);
    info("istft lipschitz: unitary-form " + std::to_string(ib.unitary_form) + ", adjusted bound " +
         std::to_string(bound) + ", empirical max " +
         std::to_string(result.istft_check.max_ratio) +
         (result.istft_check.holds ? " [holds]" : " [VIOLATED]"));
  }

  // 2. Bounded-error chain on a corpus (loaded or synthesized) with a
  //    codebook (loaded or trained on that corpus).
  {
    std::vector<Waveform> clips;
    if (!cfg.corpus_dir.empty()) {
      for (const std::string& path : scan_corpus(cfg.corpus_dir)) {
        if (clips.size() >= n_clips) break;
        WavReadResult wav;
        try {
          wav = read_wav(path);
        } catch (const IoError&) {
          continue;
        }
        if (wav.waveform.sample_rate != cfg.analysis.sample_rate) continue;
        for (Waveform& clip : chunk_waveform(wav.waveform, tile_samples(cfg))) {
          if (clips.size() >= n_clips) break;
          clips.push_back(std::move(clip));
        }
      }
      if (clips.empty())
        throw std::invalid_argument("verify-theory: corpus yielded no usable clips");
    } else {
      Rng rng(splitmix64(cfg.seed_theory ^ 0x7468656F72793121ULL));
      for (std::size_t i = 0; i < n_clips; ++i)
        clips.push_back(make_test_clip(rng, cfg.analysis, frames));
    }

    Codebook cb;
    if (!cfg.codebook_path.empty()) {
      cb = load_codebook_checked(cfg.codebook_path, cfg, /*force_mismatch=*/false);
    } else {
      PatchSet patches;
      patches.dim = cfg.patch_h * cfg.patch_w;
      for (const Waveform& clip : clips) {
        const PatchGrid grid =
            patchify(log_mel_of(clip, cfg.analysis), cfg.patch_h, cfg.patch_w);
        patches.data.insert(patches.data.end(), grid.patches.data.begin(),
                            grid.patches.data.end());
        patches.count += grid.patches.count;
      }
      TrainResult trained = train_codebook(patches, cfg.codebook_size, cfg.kmeans_max_iters,
                                           cfg.kmeans_tol, cfg.seed_codebook, jobs);
      cb = std::move(trained.codebook);
      cb.patch_h = static_cast<std::uint16_t>(cfg.patch_h);
      cb.patch_w = static_cast<std::uint16_t>(cfg.patch_w);
      cb.config_hash = cfg.analysis_fingerprint();
    }

    const MelFilterbank fb = make_mel_filterbank(cfg.analysis);
    const MelInverse inv = make_mel_inverse(fb, cfg.ridge_lambda);
    VocoderSpec spec = cfg.vocoder_spec();
    spec.mode = VocoderMode::linear_fixed_phase;  // the certified path
    result.theorem = verify_bounded_error(clips, cb, inv, spec, cfg.analysis);
    info("bounded error: " + std::to_string(result.theorem.clips.size()) + " clips, budget " +
         std::to_string(result.theorem.budget.composed) + ", worst ratio " +
         std::to_string(result.theorem.report.max_ratio) +
         (result.theorem.report.holds ? " [holds]" : " [VIOLATED]"));
  }

  // 3. Snake pointwise Lipschitz bound (2 + tolerance).
  {
    auto sampler = [](Rng& rng) {
      std::vector<double> v(64);
      for (double& x : v) x = rng.uniform(-10.0, 10.0);
      return v;
    };
    auto map = [](const std::vector<double>& v) {
      std::vector<double> out(v.size());
      for (std::size_t i = 0; i < v.size(); ++i) out[i] = snake(v[i], 1.0);
      return out;
    };
    result.snake_check =
        empirical_lipschitz(map, sampler, 200, splitmix64(cfg.seed_theory + 17), 2.0 + 1e-6);
    info("snake lipschitz: empirical max " + std::to_string(result.snake_check.max_ratio) +
         " vs bound 2" + (result.snake_check.holds ? " [holds]" : " [VIOLATED]"));
  }

  // 4. Loss equivalence residuals.
  {
    Rng rng(splitmix64(cfg.seed_theory + 99));
    AnalysisConfig fm_cfg = cfg.analysis;
    Waveform a = make_test_clip(rng, cfg.analysis, std::min<std::size_t>(frames, 32));
    Waveform b = make_test_clip(rng, cfg.analysis, std::min<std::size_t>(frames, 32));
    const FeatureStack shared = make_seeded_stack(cfg.seed_theory, {4, 8});
    const FeatureStack other = make_seeded_stack(cfg.seed_theory + 1, {4, 8});
    result.loss_equivalence_shared = loss_equivalence_check(a, b, shared, fm_cfg);
    result.loss_equivalence_distinct = loss_equivalence_check(a, b, shared, other, fm_cfg);
    info("loss equivalence: shared-stack residual " +
         std::to_string(result.loss_equivalence_shared) + ", distinct-stack residual " +
         std::to_string(result.loss_equivalence_distinct));
  }

  result.all_hold = result.istft_check.holds && result.theorem.report.holds &&
                    result.snake_check.holds && result.loss_equivalence_shared <= 1e-9;
  info(std::string("verify-theory: ") + (result.all_hold ? "holds: true" : "holds: FALSE"));

  if (!report_prefix.empty()) {
    {
      std::ofstream txt(report_prefix + ".txt", std::ios::trunc);
      if (!txt) throw IoError("cannot write report: " + report_prefix + ".txt");
      txt << "melcap verify-theory report\n";
      txt << "config fingerprint: " << hex_u64(cfg.analysis_fingerprint()) << "\n\n";
      txt << "istft_lipschitz: max_ratio " << result.istft_check.max_ratio << " bound "
          << result.istft_check.bound << " (unitary-form constant " << result.istft_unitary_form
          << ", convention-adjusted " << result.istft_adjusted << ") holds "
          << (result.istft_check.holds ? "true" : "false") << " witness "
          << result.istft_check.witness << "\n";
      txt << "bounded_error: clips " << result.theorem.clips.size() << " budget "
          << result.theorem.budget.composed << " (istft " << result.theorem.budget.istft_bound
          << " * P " << result.theorem.budget.mel_inverse_norm << " * exp "
          << result.theorem.budget.exp_bound << ") max_ratio " << result.theorem.report.max_ratio
          << " holds " << (result.theorem.report.holds ? "true" : "false") << " witness "
          << result.theorem.report.witness << "\n";
      txt << "snake_lipschitz: max_ratio " << result.snake_check.max_ratio << " bound "
          << result.snake_check.bound << " holds " << (result.snake_check.holds ? "true" : "false")
          << "\n";
      txt << "loss_equivalence: shared " << result.loss_equivalence_shared << " distinct "
          << result.loss_equivalence_distinct << "\n";
      txt << "holds: " << (result.all_hold ? "true" : "false") << "\n";
    }
    {
      std::ofstream csv(report_prefix + ".csv", std::ios::trunc);
      if (!csv) throw IoError("cannot write report: " + report_prefix + ".csv");
      csv << "check,item,max_ratio,bound,margin,holds,witness\n";
      auto line = [&csv](const std::string& check, const std::string& item, double ratio,
                         double bound, bool holds, const std::string& witness) {
        csv << check << ',' << item << ',' << detail::csv_double(ratio) << ','
            << detail::csv_double(bound) << ',' << detail::csv_double(bound - ratio) << ','
            << (holds ? "true" : "false") << ',' << detail::csv_field(witness) << '\n';
      };
      line("istft_lipschitz", "all_trials", result.istft_check.max_ratio,
           result.istft_check.bound, result.istft_check.holds, result.istft_check.witness);
      for (const ClipCheck& c : result.theorem.clips) {
        line("bounded_error_link1", c.id, c.link1_ratio, 1.0, c.link1_ratio <= 1.0, c.id);
        line("bounded_error_link2", c.id, c.link2_ratio, 1.0, c.link2_ratio <= 1.0, c.id);
      }
      line("snake_lipschitz", "all_trials", result.snake_check.max_ratio,
           result.snake_check.bound, result.snake_check.holds, result.snake_check.witness);
      line("loss_equivalence", "shared_stack", result.loss_equivalence_shared, 1e-9,
           result.loss_equivalence_shared <= 1e-9, "");
    }
    info("reports -> " + report_prefix + ".txt, " + report_prefix + ".csv");
  }
  return result;
}

inline int cmd_verify_theory(const RunConfig& cfg, const std::string& report_prefix,
                             std::size_t istft_trials = 1000, std::size_t n_clips = 100,
                             std::size_t jobs = 1) {
  const TheoryRunResult r = run_verify_theory(cfg, report_prefix, istft_trials, n_clips, jobs);
  return r.all_hold ? 0 : 1;
}

}  // namespace melcap::cli

#endif  // MELCAP_CLI_HPP_
