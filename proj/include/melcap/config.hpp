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

#ifndef MELCAP_CONFIG_HPP_
#define MELCAP_CONFIG_HPP_

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "melcap/bytes.hpp"
#include "melcap/frontend.hpp"
#include "melcap/vocoder.hpp"

namespace melcap {

/// Parse failure with source location; formats as "file:line:col: message".
class ConfigParseError : public std::invalid_argument {
 public:
  ConfigParseError(const std::string& file, std::size_t line, std::size_t col,
                   const std::string& message)
      : std::invalid_argument(file + ":" + std::to_string(line) + ":" + std::to_string(col) +
                              ": " + message),
        line_(line),
        column_(col) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Everything one pipeline run needs: analysis front end, patch geometry,
/// codebook training knobs, vocoder mode, and the three seeds.  Defaults are
/// the 44.1 kHz / 1024-FFT / hop-256 / 96-mel setup with 8x8 patches and a
/// 1024-entry codebook (~258 tokens/s).
struct RunConfig {
  AnalysisConfig analysis;
  std::size_t crop_frames = 96;  // training tiles are crop_frames x n_mels

  std::size_t patch_h = 8;
  std::size_t patch_w = 8;

  std::size_t codebook_size = 1024;
  std::size_t kmeans_max_iters = 50;
  double kmeans_tol = 1e-6;

  VocoderMode vocoder_mode = VocoderMode::linear_fixed_phase;
  std::size_t griffin_lim_iters = 32;
  double v_max = 6.907755278982137;  // log(1e3)
  double ridge_lambda = 1e-6;        // mel pseudo-inverse regularization

  std::uint64_t seed_codebook = 1;
  std::uint64_t seed_vocoder = 2;
  std::uint64_t seed_theory = 3;

  std::string corpus_dir;
  std::string codebook_path;

  void validate() const {
    analysis.validate();
    if (crop_frames < 2) throw std::invalid_argument("RunConfig: crop_frames must be >= 2");
    if (patch_h == 0 || patch_w == 0)
      throw std::invalid_argument("RunConfig: patch dimensions must be positive");
    if (codebook_size == 0) throw std::invalid_argument("RunConfig: codebook size must be >= 1");
    if (kmeans_max_iters == 0)
      throw std::invalid_argument("RunConfig: kmeans max_iters must be >= 1");
    if (!(kmeans_tol >= 0.0)) throw std::invalid_argument("RunConfig: kmeans tol must be >= 0");
    if (!(ridge_lambda >= 0.0))
      throw std::invalid_argument("RunConfig: ridge_lambda must be >= 0");
  }

  VocoderSpec vocoder_spec() const {
    VocoderSpec spec;
    spec.mode = vocoder_mode;
    spec.seed = seed_vocoder;
    spec.griffin_lim_iters = griffin_lim_iters;
    spec.synthesis_window = make_window(analysis.window_kind, analysis.n_fft);
    spec.hop = analysis.hop;
    spec.v_max = v_max;
    return spec;
  }

  std::uint64_t analysis_fingerprint() const { return fingerprint(analysis); }
};

namespace detail {

inline bool parse_u64_value(const std::string& s, std::uint64_t& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

inline bool parse_double_value(const std::string& s, double& out) {
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

}  // namespace detail

/// Parses the key-value config grammar:
///
///   [section]
///   key = value        # trailing comments with '#'
///
/// Sections: analysis, patch, codebook, vocoder, seeds, paths.  Unknown
/// sections/keys and malformed values are reported with line and column.
inline RunConfig parse_run_config(const std::string& text,
                                  const std::string& file = "<config>") {
  RunConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line_no = 0;

  auto fail = [&](std::size_t col, const std::string& msg) -> ConfigParseError {
    return ConfigParseError(file, line_no, col, msg);
  };

  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    if (const std::size_t hash = line.find('#'); hash != std::string::npos) line.resize(hash);

    std::size_t begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    std::size_t end = line.find_last_not_of(" \t\r");
    const std::string body = line.substr(begin, end - begin + 1);

    if (body.front() == '[') {
      if (body.back() != ']') throw fail(begin + body.size(), "expected ']'");
      section = body.substr(1, body.size() - 2);
      if (section != "analysis" && section != "patch" && section != "codebook" &&
          section != "vocoder" && section != "seeds" && section != "paths") {
        throw fail(begin + 2, "unknown section [" + section + "]");
      }
      continue;
    }
    if (section.empty()) throw fail(begin + 1, "key outside of any [section]");

    const std::size_t eq = body.find('=');
    if (eq == std::string::npos) throw fail(begin + body.size(), "expected '=' after key");
    auto trim = [](std::string s) {
      const std::size_t b = s.find_first_not_of(" \t");
      if (b == std::string::npos) return std::string();
      const std::size_t e = s.find_last_not_of(" \t");
      return s.substr(b, e - b + 1);
    };
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    const std::size_t key_col = begin + 1;
    const std::size_t value_col = begin + eq + 2;
    if (key.empty()) throw fail(key_col, "empty key");
    if (value.empty()) throw fail(value_col, "empty value for '" + key + "'");

    auto want_u64 = [&](std::uint64_t& out) {
      if (!detail::parse_u64_value(value, out))
        throw fail(value_col, "expected an unsigned integer, got '" + value + "'");
    };
    auto want_size = [&](std::size_t& out) {
      std::uint64_t v;
      want_u64(v);
      out = static_cast<std::size_t>(v);
    };
    auto want_double = [&](double& out) {
      if (!detail::parse_double_value(value, out))
        throw fail(value_col, "expected a number, got '" + value + "'");
    };

    if (section == "analysis") {
      if (key == "n_fft") want_size(cfg.analysis.n_fft);
      else if (key == "hop") want_size(cfg.analysis.hop);
      else if (key == "window") {
        if (value == "hann") cfg.analysis.window_kind = WindowKind::hann;
        else if (value == "hamming") cfg.analysis.window_kind = WindowKind::hamming;
        else if (value == "rectangular") cfg.analysis.window_kind = WindowKind::rectangular;
        else throw fail(value_col, "unknown window '" + value + "'");
      } else if (key == "n_mels") want_size(cfg.analysis.n_mels);
      else if (key == "sample_rate") {
        std::uint64_t v;
        want_u64(v);
        cfg.analysis.sample_rate = static_cast<int>(v);
        cfg.analysis.f_max = std::min(cfg.analysis.f_max, static_cast<double>(v) / 2.0);
      } else if (key == "f_min") want_double(cfg.analysis.f_min);
      else if (key == "f_max") want_double(cfg.analysis.f_max);
      else if (key == "log_floor") want_double(cfg.analysis.log_floor);
      else if (key == "crop_frames") want_size(cfg.crop_frames);
      else throw fail(key_col, "unknown key '" + key + "' in [analysis]");
    } else if (section == "patch") {
      if (key == "height") want_size(cfg.patch_h);
      else if (key == "width") want_size(cfg.patch_w);
      else throw fail(key_col, "unknown key '" + key + "' in [patch]");
    } else if (section == "codebook") {
      if (key == "size") want_size(cfg.codebook_size);
      else if (key == "max_iters") want_size(cfg.kmeans_max_iters);
      else if (key == "tol") want_double(cfg.kmeans_tol);
      else throw fail(key_col, "unknown key '" + key + "' in [codebook]");
    } else if (section == "vocoder") {
      if (key == "mode") {
        if (value == "linear_fixed_phase") cfg.vocoder_mode = VocoderMode::linear_fixed_phase;
        else if (value == "griffin_lim") cfg.vocoder_mode = VocoderMode::griffin_lim;
        else throw fail(value_col, "unknown vocoder mode '" + value + "'");
      } else if (key == "griffin_lim_iters") want_size(cfg.griffin_lim_iters);
      else if (key == "v_max") want_double(cfg.v_max);
      else if (key == "ridge_lambda") want_double(cfg.ridge_lambda);
      else throw fail(key_col, "unknown key '" + key + "' in [vocoder]");
    } else if (section == "seeds") {
      if (key == "codebook") want_u64(cfg.seed_codebook);
      else if (key == "vocoder") want_u64(cfg.seed_vocoder);
      else if (key == "theory") want_u64(cfg.seed_theory);
      else throw fail(key_col, "unknown key '" + key + "' in [seeds]");
    } else if (section == "paths") {
      if (key == "corpus") cfg.corpus_dir = value;
      else if (key == "codebook") cfg.codebook_path = value;
      else throw fail(key_col, "unknown key '" + key + "' in [paths]");
    }
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path);
}

}  // namespace melcap

#endif  // MELCAP_CONFIG_HPP_
