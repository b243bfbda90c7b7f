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

#ifndef MELCAP_METRICS_HPP_
#define MELCAP_METRICS_HPP_

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "melcap/frontend.hpp"
#include "melcap/losses.hpp"
#include "melcap/wav.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// Per-pair metrics
// ---------------------------------------------------------------------------

struct MetricsReport {
  std::string file;
  double lsd = 0.0;
  double mel_distance = 0.0;
  double stft_distance = 0.0;
  double mae_mel = 0.0;
  std::uint64_t config_fingerprint = 0;
};

namespace detail {

inline void require_same_signal(const Waveform& x, const Waveform& x_hat, const char* who) {
  if (x.samples.size() != x_hat.samples.size())
    throw std::invalid_argument(std::string(who) + ": waveform length mismatch");
  if (x.sample_rate != x_hat.sample_rate)
    throw std::invalid_argument(std::string(who) + ": sample rate mismatch");
}

}  // namespace detail

/// Log-spectral distance: mean over frames of the RMS difference of
/// log10-magnitude spectra, with magnitudes floored at 1e-8.
inline double lsd(const Waveform& x, const Waveform& x_hat, const AnalysisConfig& config) {
  detail::require_same_signal(x, x_hat, "lsd");
  const ComplexSpectrogram a = stft(x, config);
  const ComplexSpectrogram b = stft(x_hat, config);
  constexpr double kFloor = 1e-8;
  double acc = 0.0;
  for (std::size_t t = 0; t < a.frames; ++t) {
    double frame = 0.0;
    for (std::size_t k = 0; k < a.bins; ++k) {
      const double la = std::log10(std::max(kFloor, std::abs(a.at(t, k))));
      const double lb = std::log10(std::max(kFloor, std::abs(b.at(t, k))));
      frame += (la - lb) * (la - lb);
    }
    acc += std::sqrt(frame / static_cast<double>(a.bins));
  }
  return acc / static_cast<double>(a.frames);
}

/// Mel-scaled magnitude: filterbank applied to |X| (no squaring, no log).
inline RealMatrix mel_magnitude(const ComplexSpectrogram& spec, const MelFilterbank& fb) {
  if (fb.n_bins != spec.bins)
    throw std::invalid_argument("mel_magnitude: filterbank/spectrogram bin mismatch");
  RealMatrix out;
  out.rows = spec.frames;
  out.cols = fb.n_mels;
  out.values.assign(out.rows * out.cols, 0.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    for (std::size_t m = 0; m < fb.n_mels; ++m) {
      double acc = 0.0;
      const double* row = fb.weights.data() + m * fb.n_bins;
      for (std::size_t k = 0; k < spec.bins; ++k) acc += row[k] * std::abs(spec.at(t, k));
      out.at(t, m) = acc;
    }
  }
  return out;
}

/// Mean elementwise L1 between mel-scaled magnitude spectrograms.
inline double mel_distance(const Waveform& x, const Waveform& x_hat,
                           const AnalysisConfig& config) {
  detail::require_same_signal(x, x_hat, "mel_distance");
  const MelFilterbank fb = make_mel_filterbank(config);
  const RealMatrix a = mel_magnitude(stft(x, config), fb);
  const RealMatrix b = mel_magnitude(stft(x_hat, config), fb);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += std::abs(a.values[i] - b.values[i]);
  return acc / static_cast<double>(a.values.size());
}

/// Multiscale STFT distance (shared definition with the loss suite).
inline double stft_distance(const Waveform& x, const Waveform& x_hat) {
  return multiscale_stft_distance(x, x_hat);
}

/// All metrics for one reference/degraded pair.
inline MetricsReport evaluate_pair(const Waveform& x, const Waveform& x_hat,
                                   const AnalysisConfig& config) {
  detail::require_same_signal(x, x_hat, "evaluate_pair");
  MetricsReport r;
  r.lsd = lsd(x, x_hat, config);
  r.mel_distance = mel_distance(x, x_hat, config);
  r.stft_distance = stft_distance(x, x_hat);
  r.mae_mel = l1_mel(log_mel_of(x, config), log_mel_of(x_hat, config));
  r.config_fingerprint = fingerprint(config);
  return r;
}

// ---------------------------------------------------------------------------
// Corpus evaluation
// ---------------------------------------------------------------------------

struct CorpusEvaluation {
  std::vector<MetricsReport> rows;  // sorted by filename
  MetricsReport mean;               // file == "MEAN"
  std::vector<std::string> skipped; // per-file skip reasons
};

/// Evaluates every WAV present (by filename) in both directories.  Files
/// that are unmatched, undecodable or at the wrong sample rate are skipped
/// and recorded; pairs of unequal length are truncated to the shorter one.
/// Rows come out in filename order regardless of `jobs`.
inline CorpusEvaluation evaluate_corpus(const std::string& dir_ref, const std::string& dir_deg,
                                        const AnalysisConfig& config, std::size_t jobs = 1) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir_ref)) throw IoError("evaluate_corpus: not a directory: " + dir_ref);
  if (!fs::is_directory(dir_deg)) throw IoError("evaluate_corpus: not a directory: " + dir_deg);

  auto is_wav = [](const fs::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return ext == ".wav";
  };

  CorpusEvaluation out;
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir_ref)) {
    if (!entry.is_regular_file() || !is_wav(entry.path())) continue;
    const std::string name = entry.path().filename().string();
    if (fs::exists(fs::path(dir_deg) / name)) {
      names.push_back(name);
    } else {
      out.skipped.push_back(name + ": missing in " + dir_deg);
    }
  }
  for (const auto& entry : fs::directory_iterator(dir_deg)) {
    if (!entry.is_regular_file() || !is_wav(entry.path())) continue;
    const std::string name = entry.path().filename().string();
    if (!fs::exists(fs::path(dir_ref) / name)) {
      out.skipped.push_back(name + ": missing in " + dir_ref);
    }
  }
  std::sort(names.begin(), names.end());

  std::vector<MetricsReport> rows(names.size());
  std::vector<std::string> errors(names.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        WavReadResult ref = read_wav((fs::path(dir_ref) / names[i]).string());
        WavReadResult deg = read_wav((fs::path(dir_deg) / names[i]).string());
        if (ref.waveform.sample_rate != config.sample_rate)
          throw std::invalid_argument("sample rate " + std::to_string(ref.waveform.sample_rate) +
                                      " differs from config " +
                                      std::to_string(config.sample_rate));
        if (deg.waveform.sample_rate != config.sample_rate)
          throw std::invalid_argument("degraded sample rate differs from config");
        const std::size_t n =
            std::min(ref.waveform.samples.size(), deg.waveform.samples.size());
        if (n == 0) throw std::invalid_argument("empty audio");
        ref.waveform.samples.resize(n);
        deg.waveform.samples.resize(n);
        rows[i] = evaluate_pair(ref.waveform, deg.waveform, config);
        rows[i].file = names[i];
      } catch (const std::exception& e) {
        errors[i] = names[i] + ": " + e.what();
      }
    }
  };
  if (jobs <= 1 || names.size() < 2) {
    work(0, names.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (names.size() + jobs - 1) / jobs;
    for (std::size_t t = 0; t < jobs; ++t) {
      const std::size_t b = t * chunk;
      if (b >= names.size()) break;
      pool.emplace_back(work, b, std::min(names.size(), b + chunk));
    }
    for (auto& th : pool) th.join();
  }

  out.mean.file = "MEAN";
  out.mean.config_fingerprint = fingerprint(config);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!errors[i].empty()) {
      out.skipped.push_back(errors[i]);
      continue;
    }
    out.mean.lsd += rows[i].lsd;
    out.mean.mel_distance += rows[i].mel_distance;
    out.mean.stft_distance += rows[i].stft_distance;
    out.mean.mae_mel += rows[i].mae_mel;
    out.rows.push_back(std::move(rows[i]));
    ++kept;
  }
  if (kept > 0) {
    out.mean.lsd /= static_cast<double>(kept);
    out.mean.mel_distance /= static_cast<double>(kept);
    out.mean.stft_distance /= static_cast<double>(kept);
    out.mean.mae_mel /= static_cast<double>(kept);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV report
// ---------------------------------------------------------------------------

namespace detail {

inline std::string csv_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

inline std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double csv_parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw IoError("metrics CSV: bad number '" + s + "'");
  return v;
}

}  // namespace detail

/// UTF-8 CSV with '.' decimals: header, one row per file in order, MEAN row
/// last.  Doubles are written in shortest round-trippable form.
inline void write_metrics_csv(std::ostream& os, const CorpusEvaluation& eval) {
  os << "file,lsd,mel_dist,stft_dist,mae_mel\n";
  auto row = [&os](const MetricsReport& r) {
    os << detail::csv_field(r.file) << ',' << detail::csv_double(r.lsd) << ','
       << detail::csv_double(r.mel_distance) << ',' << detail::csv_double(r.stft_distance) << ','
       << detail::csv_double(r.mae_mel) << '\n';
  };
  for (const MetricsReport& r : eval.rows) row(r);
  row(eval.mean);
}

inline void write_metrics_csv(const std::string& path, const CorpusEvaluation& eval) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  write_metrics_csv(out, eval);
  if (!out) throw IoError("short write: " + path);
}

inline CorpusEvaluation read_metrics_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line) || line != "file,lsd,mel_dist,stft_dist,mae_mel")
    throw IoError(path + ": bad metrics CSV header");
  CorpusEvaluation eval;
  std::vector<MetricsReport> all;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = detail::csv_split(line);
    if (f.size() != 5) throw IoError(path + ": bad metrics CSV row");
    MetricsReport r;
    r.file = f[0];
    r.lsd = detail::csv_parse_double(f[1]);
    r.mel_distance = detail::csv_parse_double(f[2]);
    r.stft_distance = detail::csv_parse_double(f[3]);
    r.mae_mel = detail::csv_parse_double(f[4]);
    all.push_back(std::move(r));
  }
  if (all.empty() || all.back().file != "MEAN")
    throw IoError(path + ": metrics CSV must end with a MEAN row");
  eval.mean = all.back();
  all.pop_back();
  eval.rows = std::move(all);
  return eval;
}

}  // namespace melcap

#endif  // MELCAP_METRICS_HPP_
