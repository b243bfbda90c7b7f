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
#include <filesystem>
#include <fstream>

#include "melcap/config.hpp"
#include "melcap/formats.hpp"
#include "melcap/wav.hpp"
#include "oracles.hpp"

using namespace melcap;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("melcap_fmt_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Codebook sample_codebook() {
  Codebook cb;
  cb.k = 5;
  cb.dim = 6;
  cb.patch_h = 2;
  cb.patch_w = 3;
  cb.config_hash = 0x0123456789ABCDEFULL;
  Rng rng(77);
  cb.entries.resize(cb.k * cb.dim);
  for (float& v : cb.entries) v = static_cast<float>(rng.normal());
  return cb;
}

}  // namespace

TEST_CASE("MCBK codebook round trip") {
  TempDir tmp("mcbk");
  const Codebook cb = sample_codebook();
  const std::string path = (tmp.path / "c.mcbk").string();
  save_codebook(path, cb);

  const Codebook back = load_codebook(path);
  CHECK(back.k == cb.k);
  CHECK(back.dim == cb.dim);
  CHECK(back.patch_h == cb.patch_h);
  CHECK(back.patch_w == cb.patch_w);
  CHECK(back.config_hash == cb.config_hash);
  CHECK(back.entries == cb.entries);
  CHECK(back.hash() == cb.hash());

  SECTION("serialization is byte-stable") {
    CHECK(serialize_codebook(back) == serialize_codebook(cb));
  }
  SECTION("bad magic is an IoError") {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out << "NOPE";
    out.close();
    CHECK_THROWS_AS(load_codebook(path), IoError);
  }
  SECTION("truncated file is an IoError") {
    const auto bytes = serialize_codebook(cb);
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size() / 2));
    out.close();
    CHECK_THROWS_AS(load_codebook(path), IoError);
  }
}

TEST_CASE("MCAP token round trip") {
  TempDir tmp("mcap");
  TokenGrid t;
  t.rows = 3;
  t.cols = 4;
  t.indices = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11};
  t.codebook_id = 0xDEADBEEFCAFEF00DULL;
  t.config_hash = 0x1122334455667788ULL;
  const std::string path = (tmp.path / "t.mcap").string();
  save_tokens(path, t);
  const TokenGrid back = load_tokens(path);
  CHECK(back.rows == t.rows);
  CHECK(back.cols == t.cols);
  CHECK(back.indices == t.indices);
  CHECK(back.codebook_id == t.codebook_id);
  CHECK(back.config_hash == t.config_hash);
  CHECK(serialize_tokens(back) == serialize_tokens(t));
}

TEST_CASE("MFST feature stack round trip") {
  TempDir tmp("mfst");
  FeatureStack stack = make_seeded_stack(2024, {4, 8});
  stack.layers[1].activation = Activation::snake;
  stack.layers[1].snake_a = 0.75;
  stack.alphas = {0.5, 2.0};
  const std::string path = (tmp.path / "s.mfst").string();
  save_feature_stack(path, stack);

  const FeatureStack back = load_feature_stack(path);
  REQUIRE(back.layers.size() == 2);
  CHECK(back.selected == stack.selected);
  REQUIRE(back.alphas.size() == 2);
  CHECK(back.alphas[0] == 0.5);
  CHECK(back.alphas[1] == 2.0);
  CHECK(back.layers[1].activation == Activation::snake);
  CHECK(back.layers[1].snake_a == Catch::Approx(0.75).margin(1e-7));
  for (std::size_t li = 0; li < 2; ++li) {
    REQUIRE(back.layers[li].weights.size() == stack.layers[li].weights.size());
    for (std::size_t i = 0; i < back.layers[li].weights.size(); ++i) {
      // Payload is f32; the reload equals the float cast of the original.
      CHECK(back.layers[li].weights[i] ==
            static_cast<double>(static_cast<float>(stack.layers[li].weights[i])));
    }
  }
  // Re-serialization after one f32 round trip is byte-identical.
  CHECK(serialize_feature_stack(back) ==
        serialize_feature_stack(load_feature_stack(path)));

  SECTION("broken channel chain in a file is rejected") {
    FeatureStack broken = back;
    broken.layers[1].in_channels = 7;
    // Bypass validate-on-save by writing bytes manually.
    ByteWriter w;
    w.magic("MFST");
    w.u16(kFormatVersion);
    w.u32(2);
    for (const ConvLayer& l : broken.layers) {
      w.u32(static_cast<std::uint32_t>(l.out_channels));
      w.u32(static_cast<std::uint32_t>(l.in_channels));
      w.u32(static_cast<std::uint32_t>(l.kernel_h));
      w.u32(static_cast<std::uint32_t>(l.kernel_w));
      w.u16(static_cast<std::uint16_t>(l.stride_h));
      w.u16(static_cast<std::uint16_t>(l.stride_w));
      w.u8(static_cast<std::uint8_t>(l.activation));
      if (l.activation == Activation::snake) w.f32(static_cast<float>(l.snake_a));
      for (double v : l.weights) w.f32(static_cast<float>(v));
      for (double v : l.bias) w.f32(static_cast<float>(v));
    }
    w.u32(0);
    detail::write_file_bytes(path, w.data());
    CHECK_THROWS_AS(load_feature_stack(path), IoError);
  }
}

TEST_CASE("WAV round trips") {
  TempDir tmp("wav");
  Rng rng(9);

  SECTION("float32 mono round trip is exact") {
    Waveform wf;
    wf.sample_rate = 44100;
    wf.samples.resize(500);
    for (double& s : wf.samples) s = static_cast<float>(rng.uniform(-1.0, 1.0));
    const std::string path = (tmp.path / "f32.wav").string();
    write_wav(path, wf, WavSampleFormat::float32);
    const WavReadResult back = read_wav(path);
    CHECK(back.waveform.sample_rate == 44100);
    CHECK(back.source_channels == 1);
    CHECK(back.source_format == WavSampleFormat::float32);
    REQUIRE(back.waveform.samples.size() == wf.samples.size());
    for (std::size_t i = 0; i < wf.samples.size(); ++i)
      CHECK(back.waveform.samples[i] == wf.samples[i]);
  }

  SECTION("pcm16 round trip within one quantization step") {
    Waveform wf;
    wf.sample_rate = 22050;
    wf.samples.resize(300);
    for (double& s : wf.samples) s = rng.uniform(-0.99, 0.99);
    const std::string path = (tmp.path / "p16.wav").string();
    write_wav(path, wf, WavSampleFormat::pcm16);
    const WavReadResult back = read_wav(path);
    for (std::size_t i = 0; i < wf.samples.size(); ++i)
      CHECK(back.waveform.samples[i] == Catch::Approx(wf.samples[i]).margin(1.0 / 32767.0));
  }

  SECTION("stereo input downmixes by averaging with a warning") {
    // Hand-built 2-channel PCM16 file: L = 0.5, R = -0.5 -> mono 0.
    ByteWriter w;
    const std::uint32_t data_size = 4 * 4;  // 4 frames * 2ch * 2 bytes
    w.magic("RIFF");
    w.u32(36 + data_size);
    w.magic("WAVE");
    w.magic("fmt ");
    w.u32(16);
    w.u16(1);
    w.u16(2);
    w.u32(8000);
    w.u32(8000 * 4);
    w.u16(4);
    w.u16(16);
    w.magic("data");
    w.u32(data_size);
    for (int i = 0; i < 4; ++i) {
      w.u16(static_cast<std::uint16_t>(16384));   // L
      w.u16(static_cast<std::uint16_t>(-16384));  // R
    }
    const std::string path = (tmp.path / "st.wav").string();
    detail::write_file_bytes(path, w.data());
    const WavReadResult back = read_wav(path);
    CHECK(back.source_channels == 2);
    REQUIRE(back.warnings.size() == 1);
    CHECK(back.warnings[0].find("downmix") != std::string::npos);
    for (double s : back.waveform.samples) CHECK(s == 0.0);
  }

  SECTION("WAVE_FORMAT_EXTENSIBLE float32 is unwrapped") {
    ByteWriter w;
    const std::uint32_t data_size = 3 * 4;
    w.magic("RIFF");
    w.u32(36 + 24 + data_size);
    w.magic("WAVE");
    w.magic("fmt ");
    w.u32(40);
    w.u16(0xFFFE);  // extensible
    w.u16(1);
    w.u32(44100);
    w.u32(44100 * 4);
    w.u16(4);
    w.u16(32);
    w.u16(22);      // cbSize
    w.u16(32);      // valid bits
    w.u32(0x4);     // channel mask
    w.u16(3);       // sub-format tag: IEEE float
    for (int i = 0; i < 7; ++i) w.u16(0);  // rest of the GUID
    w.magic("data");
    w.u32(data_size);
    w.f32(0.25f);
    w.f32(-0.5f);
    w.f32(1.0f);
    const std::string path = (tmp.path / "ext.wav").string();
    detail::write_file_bytes(path, w.data());
    const WavReadResult back = read_wav(path);
    REQUIRE(back.waveform.samples.size() == 3);
    CHECK(back.waveform.samples[0] == 0.25);
    CHECK(back.waveform.samples[1] == -0.5);
    CHECK(back.waveform.samples[2] == 1.0);
  }

  SECTION("unsupported bit depth is rejected with a clear error") {
    ByteWriter w;
    w.magic("RIFF");
    w.u32(36 + 4);
    w.magic("WAVE");
    w.magic("fmt ");
    w.u32(16);
    w.u16(1);
    w.u16(1);
    w.u32(8000);
    w.u32(8000);
    w.u16(1);
    w.u16(8);  // 8-bit PCM: unsupported
    w.magic("data");
    w.u32(4);
    w.u32(0);
    const std::string path = (tmp.path / "u8.wav").string();
    detail::write_file_bytes(path, w.data());
    CHECK_THROWS_AS(read_wav(path), IoError);
  }
}

TEST_CASE("run config parsing") {
  SECTION("full file with every section") {
    const std::string text = R"(# pipeline setup
[analysis]
n_fft = 512
hop = 128
window = hamming
n_mels = 64
sample_rate = 22050
f_min = 20
f_max = 11000
log_floor = 1e-6
crop_frames = 64

[patch]
height = 4
width = 8

[codebook]
size = 128
max_iters = 30
tol = 1e-5

[vocoder]
mode = griffin_lim
griffin_lim_iters = 12
v_max = 5.5
ridge_lambda = 1e-4

[seeds]
codebook = 11
vocoder = 22
theory = 33

[paths]
corpus = /tmp/corpus
codebook = /tmp/cb.mcbk
)";
    const RunConfig cfg = parse_run_config(text, "test.ini");
    CHECK(cfg.analysis.n_fft == 512);
    CHECK(cfg.analysis.hop == 128);
    CHECK(cfg.analysis.window_kind == WindowKind::hamming);
    CHECK(cfg.analysis.n_mels == 64);
    CHECK(cfg.analysis.sample_rate == 22050);
    CHECK(cfg.analysis.f_min == 20.0);
    CHECK(cfg.analysis.f_max == 11000.0);
    CHECK(cfg.analysis.log_floor == 1e-6);
    CHECK(cfg.crop_frames == 64);
    CHECK(cfg.patch_h == 4);
    CHECK(cfg.patch_w == 8);
    CHECK(cfg.codebook_size == 128);
    CHECK(cfg.kmeans_max_iters == 30);
    CHECK(cfg.kmeans_tol == 1e-5);
    CHECK(cfg.vocoder_mode == VocoderMode::griffin_lim);
    CHECK(cfg.griffin_lim_iters == 12);
    CHECK(cfg.v_max == 5.5);
    CHECK(cfg.ridge_lambda == 1e-4);
    CHECK(cfg.seed_codebook == 11);
    CHECK(cfg.seed_vocoder == 22);
    CHECK(cfg.seed_theory == 33);
    CHECK(cfg.corpus_dir == "/tmp/corpus");
    CHECK(cfg.codebook_path == "/tmp/cb.mcbk");
  }

  SECTION("defaults reproduce the standard setup") {
    const RunConfig cfg = parse_run_config("[analysis]\nn_fft = 1024\n");
    CHECK(cfg.analysis.hop == 256);
    CHECK(cfg.analysis.n_mels == 96);
    CHECK(cfg.analysis.sample_rate == 44100);
    CHECK(cfg.patch_h == 8);
    CHECK(cfg.patch_w == 8);
    CHECK(cfg.codebook_size == 1024);
  }

  SECTION("errors carry line and column") {
    try {
      parse_run_config("[analysis]\nn_fft = abc\n", "bad.ini");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(e.line() == 2);
      CHECK(e.column() > 0);
      CHECK(std::string(e.what()).find("bad.ini:2:") != std::string::npos);
    }

    try {
      parse_run_config("[nope]\n", "bad.ini");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(e.line() == 1);
      CHECK(std::string(e.what()).find("unknown section") != std::string::npos);
    }

    try {
      parse_run_config("key_without_section = 1\n", "bad.ini");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(std::string(e.what()).find("section") != std::string::npos);
    }

    try {
      parse_run_config("[analysis]\nn_fft 1024\n", "bad.ini");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(e.line() == 2);
      CHECK(std::string(e.what()).find("'='") != std::string::npos);
    }

    try {
      parse_run_config("[analysis]\nbogus = 1\n", "bad.ini");
      FAIL("expected ConfigParseError");
    } catch (const ConfigParseError& e) {
      CHECK(std::string(e.what()).find("unknown key") != std::string::npos);
    }
  }

  SECTION("semantic validation still applies after a clean parse") {
    CHECK_THROWS_AS(parse_run_config("[analysis]\nhop = 4096\n"), std::invalid_argument);
  }
}
