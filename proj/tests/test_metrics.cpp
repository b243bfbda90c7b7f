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

#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <filesystem>

#include "melcap/metrics.hpp"
#include "melcap/wav.hpp"
#include "oracles.hpp"

using namespace melcap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("melcap_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Waveform noisy(const Waveform& x, double sigma, std::uint64_t seed) {
  Waveform out = x;
  Rng rng(seed);
  for (double& s : out.samples) s += sigma * rng.normal();
  return out;
}

}  // namespace

TEST_CASE("lsd") {
  AnalysisConfig cfg;
  Rng rng(1);
  const Waveform x = oracles::random_waveform(rng, 8192, cfg.sample_rate);

  SECTION("identical signals give zero") { CHECK(lsd(x, x, cfg) == 0.0); }

  SECTION("a 10x magnitude offset gives exactly 1") {
    Waveform y = x;
    for (double& s : y.samples) s *= 10.0;
    CHECK(lsd(x, y, cfg) == Catch::Approx(1.0).epsilon(1e-9));
  }

  SECTION("strictly increasing in additive-noise level, averaged over seeds") {
    double prev = 0.0;
    for (double sigma : {1e-3, 1e-2, 1e-1}) {
      double mean = 0.0;
      for (std::uint64_t seed = 0; seed < 5; ++seed)
        mean += lsd(x, noisy(x, sigma, 100 + seed), cfg);
      mean /= 5.0;
      CHECK(mean > prev);
      prev = mean;
    }
  }

  SECTION("length mismatch throws") {
    Waveform y = x;
    y.samples.pop_back();
    CHECK_THROWS_AS(lsd(x, y, cfg), std::invalid_argument);
  }
}

TEST_CASE("mel_distance") {
  AnalysisConfig cfg;
  Rng rng(2);
  const Waveform x = oracles::random_waveform(rng, 8192, cfg.sample_rate);

  SECTION("identical signals give zero") { CHECK(mel_distance(x, x, cfg) == 0.0); }

  SECTION("against silence: the mean mel magnitude of x") {
    Waveform zero = x;
    std::fill(zero.samples.begin(), zero.samples.end(), 0.0);
    const MelFilterbank fb = make_mel_filterbank(cfg);
    const RealMatrix mm = mel_magnitude(stft(x, cfg), fb);
    double want = 0.0;
    for (double v : mm.values) want += v;
    want /= static_cast<double>(mm.values.size());
    CHECK(mel_distance(x, zero, cfg) == Catch::Approx(want).epsilon(1e-12));
  }

  SECTION("hand-checked 1-frame toy: 2-bin spectrum through a 2-filter bank") {
    MelFilterbank fb;
    fb.n_mels = 2;
    fb.n_bins = 2;
    fb.weights = {1.0, 0.5,   // filter 0
                  0.0, 2.0};  // filter 1
    ComplexSpectrogram spec;
    spec.frames = 1;
    spec.bins = 2;
    spec.values = {{3.0, 4.0}, {0.0, 2.0}};  // |X| = [5, 2]
    const RealMatrix mm = mel_magnitude(spec, fb);
    // filter 0: 1*5 + 0.5*2 = 6 ; filter 1: 0*5 + 2*2 = 4
    CHECK(mm.at(0, 0) == Catch::Approx(6.0).margin(1e-12));
    CHECK(mm.at(0, 1) == Catch::Approx(4.0).margin(1e-12));
  }
}

TEST_CASE("stft_distance and metric monotonicity") {
  AnalysisConfig cfg;
  Rng rng(3);
  const Waveform x = oracles::random_waveform(rng, 6000, cfg.sample_rate);

  SECTION("identical signals give zero; symmetry") {
    CHECK(stft_distance(x, x) == 0.0);
    const Waveform y = noisy(x, 0.01, 9);
    CHECK(stft_distance(x, y) == stft_distance(y, x));
    CHECK(lsd(x, y, cfg) == lsd(y, x, cfg));
    CHECK(mel_distance(x, y, cfg) == mel_distance(y, x, cfg));
  }

  SECTION("all three metrics positive once signals differ measurably") {
    Waveform y = x;
    y.samples[100] += 1e-3;
    CHECK(lsd(x, y, cfg) > 0.0);
    CHECK(mel_distance(x, y, cfg) > 0.0);
    CHECK(stft_distance(x, y) > 0.0);
  }
}

TEST_CASE("evaluate_pair") {
  AnalysisConfig cfg;
  Rng rng(4);
  const Waveform x = oracles::random_waveform(rng, 8192, cfg.sample_rate);
  const Waveform y = noisy(x, 0.01, 5);
  const MetricsReport r = evaluate_pair(x, y, cfg);
  CHECK(r.lsd > 0.0);
  CHECK(r.mel_distance > 0.0);
  CHECK(r.stft_distance > 0.0);
  CHECK(r.mae_mel > 0.0);
  CHECK(std::isfinite(r.lsd));
  CHECK(r.config_fingerprint == fingerprint(cfg));
}

TEST_CASE("evaluate_corpus") {
  AnalysisConfig cfg;
  Rng rng(6);
  TempDir ref("ref"), deg("deg");
  for (int i = 0; i < 5; ++i) {
    const Waveform x = oracles::random_waveform(rng, 6000, cfg.sample_rate);
    const std::string name = "clip" + std::to_string(i) + ".wav";
    write_wav((ref.path / name).string(), x, WavSampleFormat::float32);
    write_wav((deg.path / name).string(), x, WavSampleFormat::float32);
  }

  SECTION("identical directories give all-zero means") {
    const CorpusEvaluation eval = evaluate_corpus(ref.path.string(), deg.path.string(), cfg);
    REQUIRE(eval.rows.size() == 5);
    CHECK(eval.mean.lsd == 0.0);
    CHECK(eval.mean.mel_distance == 0.0);
    CHECK(eval.mean.stft_distance == 0.0);
    CHECK(eval.mean.mae_mel == 0.0);
    CHECK(eval.skipped.empty());
    for (std::size_t i = 1; i < eval.rows.size(); ++i)
      CHECK(eval.rows[i - 1].file < eval.rows[i].file);  // filename order
  }

  SECTION("one corrupted file: remaining rows plus a skip record") {
    std::ofstream bad((deg.path / "clip2.wav").string(), std::ios::trunc);
    bad << "not a wav";
    bad.close();
    const CorpusEvaluation eval = evaluate_corpus(ref.path.string(), deg.path.string(), cfg);
    CHECK(eval.rows.size() == 4);
    REQUIRE(eval.skipped.size() == 1);
    CHECK(eval.skipped[0].find("clip2.wav") != std::string::npos);
  }

  SECTION("unmatched files are listed and skipped") {
    const Waveform x = oracles::random_waveform(rng, 4000, cfg.sample_rate);
    write_wav((ref.path / "only_ref.wav").string(), x, WavSampleFormat::float32);
    write_wav((deg.path / "only_deg.wav").string(), x, WavSampleFormat::float32);
    const CorpusEvaluation eval = evaluate_corpus(ref.path.string(), deg.path.string(), cfg);
    CHECK(eval.rows.size() == 5);
    CHECK(eval.skipped.size() == 2);
  }

  SECTION("jobs do not change the result") {
    const CorpusEvaluation a = evaluate_corpus(ref.path.string(), deg.path.string(), cfg, 1);
    const CorpusEvaluation b = evaluate_corpus(ref.path.string(), deg.path.string(), cfg, 3);
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      CHECK(a.rows[i].file == b.rows[i].file);
      CHECK(a.rows[i].lsd == b.rows[i].lsd);
    }
  }
}

TEST_CASE("metrics CSV round trip") {
  TempDir tmp("csv");
  CorpusEvaluation eval;
  MetricsReport r1;
  r1.file = "a.wav";
  r1.lsd = 0.123456789012345;
  r1.mel_distance = 1e-17;
  r1.stft_distance = 3.0;
  r1.mae_mel = 0.25;
  MetricsReport r2;
  r2.file = "with,comma.wav";
  r2.lsd = 2.0 / 3.0;
  r2.mel_distance = 1234.5678;
  r2.stft_distance = 9.999999999999999e-5;
  r2.mae_mel = 42.0;
  eval.rows = {r1, r2};
  eval.mean.file = "MEAN";
  eval.mean.lsd = (r1.lsd + r2.lsd) / 2.0;
  eval.mean.mel_distance = (r1.mel_distance + r2.mel_distance) / 2.0;
  eval.mean.stft_distance = (r1.stft_distance + r2.stft_distance) / 2.0;
  eval.mean.mae_mel = (r1.mae_mel + r2.mae_mel) / 2.0;

  const std::string path = (tmp.path / "m.csv").string();
  write_metrics_csv(path, eval);
  const CorpusEvaluation back = read_metrics_csv(path);
  REQUIRE(back.rows.size() == 2);
  CHECK(back.rows[0].file == r1.file);
  CHECK(back.rows[0].lsd == r1.lsd);  // exact: shortest round-trip formatting
  CHECK(back.rows[0].mel_distance == r1.mel_distance);
  CHECK(back.rows[1].file == r2.file);
  CHECK(back.rows[1].stft_distance == r2.stft_distance);
  CHECK(back.mean.lsd == eval.mean.lsd);

  SECTION("bad header is rejected") {
    std::ofstream out(path, std::ios::trunc);
    out << "nope\n";
    out.close();
    CHECK_THROWS_AS(read_metrics_csv(path), IoError);
  }
}
