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

#ifndef MELCAP_WAV_HPP_
#define MELCAP_WAV_HPP_

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "melcap/bytes.hpp"
#include "melcap/frontend.hpp"

namespace melcap {

enum class WavSampleFormat : std::uint16_t {
  pcm16 = 1,
  float32 = 3,
};

struct WavReadResult {
  Waveform waveform;            // mono, samples in [-1,1] nominal range
  std::uint16_t source_channels = 1;
  WavSampleFormat source_format = WavSampleFormat::pcm16;
  std::vector<std::string> warnings;  // e.g. multichannel downmix notice
};

namespace detail {

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(len));
  if (len > 0) in.read(reinterpret_cast<char*>(buf.data()), len);
  if (!in) throw IoError("short read: " + path);
  return buf;
}

inline void write_file_bytes(const std::string& path, const std::vector<std::uint8_t>& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write: " + path);
}

}  // namespace detail

// Reads a little-endian RIFF/WAVE file.  Supported sample formats: 16-bit PCM
// and 32-bit IEEE float (plus their WAVE_FORMAT_EXTENSIBLE wrappings).
// Multichannel input is downmixed to mono by averaging, with a warning.
inline WavReadResult read_wav(const std::string& path) {
  std::vector<std::uint8_t> buf = detail::read_file_bytes(path);
  ByteReader r(buf);
  r.expect_magic("RIFF", path);
  (void)r.u32();  // RIFF size, not trusted
  r.expect_magic("WAVE", path);

  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits_per_sample = 0;
  bool have_fmt = false;
  const std::uint8_t* data_ptr = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= buf.size()) {
    char id[4];
    std::memcpy(id, buf.data() + pos, 4);
    std::uint32_t chunk_size;
    std::memcpy(&chunk_size, buf.data() + pos + 4, 4);
    std::size_t body = pos + 8;
    if (body + chunk_size > buf.size()) {
      // Tolerate a truncated final chunk size field from sloppy writers.
      chunk_size = static_cast<std::uint32_t>(buf.size() - body);
    }
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (chunk_size < 16) throw IoError(path + ": fmt chunk too small");
      ByteReader fr(buf.data() + body, chunk_size);
      format_tag = fr.u16();
      channels = fr.u16();
      sample_rate = fr.u32();
      (void)fr.u32();  // byte rate
      (void)fr.u16();  // block align
      bits_per_sample = fr.u16();
      if (format_tag == 0xFFFE && chunk_size >= 40) {
        // WAVE_FORMAT_EXTENSIBLE: the real tag leads the sub-format GUID.
        ByteReader er(buf.data() + body + 24, chunk_size - 24);
        format_tag = er.u16();
      }
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_ptr = buf.data() + body;
      data_size = chunk_size;
    }
    pos = body + chunk_size + (chunk_size & 1);  // chunks are 2-byte aligned
  }

  if (!have_fmt) throw IoError(path + ": missing fmt chunk");
  if (data_ptr == nullptr) throw IoError(path + ": missing data chunk");
  if (channels == 0) throw IoError(path + ": zero channels");
  if (sample_rate == 0) throw IoError(path + ": zero sample rate");

  WavReadResult result;
  result.source_channels = channels;
  result.waveform.sample_rate = static_cast<int>(sample_rate);

  std::size_t frame_count = 0;
  if (format_tag == 1 && bits_per_sample == 16) {
    result.source_format = WavSampleFormat::pcm16;
    frame_count = data_size / (2u * channels);
    result.waveform.samples.resize(frame_count);
    const std::uint8_t* p = data_ptr;
    for (std::size_t i = 0; i < frame_count; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        std::int16_t s;
        std::memcpy(&s, p, 2);
        p += 2;
        acc += static_cast<double>(s) / 32768.0;
      }
      result.waveform.samples[i] = acc / channels;
    }
  } else if (format_tag == 3 && bits_per_sample == 32) {
    result.source_format = WavSampleFormat::float32;
    frame_count = data_size / (4u * channels);
    result.waveform.samples.resize(frame_count);
    const std::uint8_t* p = data_ptr;
    for (std::size_t i = 0; i < frame_count; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        float s;
        std::memcpy(&s, p, 4);
        p += 4;
        if (!std::isfinite(s)) throw IoError(path + ": non-finite sample");
        acc += static_cast<double>(s);
      }
      result.waveform.samples[i] = acc / channels;
    }
  } else {
    throw IoError(path + ": unsupported sample format (tag " +
                  std::to_string(format_tag) + ", " + std::to_string(bits_per_sample) +
                  " bits); only 16-bit PCM and 32-bit float are handled");
  }
  if (channels > 1) {
    result.warnings.push_back(path + ": " + std::to_string(channels) +
                              " channels downmixed to mono by averaging");
  }
  return result;
}

// Writes a mono RIFF/WAVE file.  pcm16 clamps to [-1,1] and rounds; float32
// stores samples verbatim.
inline void write_wav(const std::string& path, const Waveform& wf,
                      WavSampleFormat format = WavSampleFormat::pcm16) {
  if (wf.sample_rate <= 0) throw std::invalid_argument("write_wav: sample_rate must be positive");
  ByteWriter w;
  const std::uint16_t channels = 1;
  const std::uint16_t bits = format == WavSampleFormat::pcm16 ? 16 : 32;
  const std::uint32_t byte_rate = static_cast<std::uint32_t>(wf.sample_rate) * channels * bits / 8;
  const std::uint16_t block_align = channels * bits / 8;
  const std::uint32_t data_size =
      static_cast<std::uint32_t>(wf.samples.size()) * block_align;

  w.magic("RIFF");
  w.u32(36 + data_size);
  w.magic("WAVE");
  w.magic("fmt ");
  w.u32(16);
  w.u16(static_cast<std::uint16_t>(format));
  w.u16(channels);
  w.u32(static_cast<std::uint32_t>(wf.sample_rate));
  w.u32(byte_rate);
  w.u16(block_align);
  w.u16(bits);
  w.magic("data");
  w.u32(data_size);
  if (format == WavSampleFormat::pcm16) {
    for (double s : wf.samples) {
      double c = s < -1.0 ? -1.0 : (s > 1.0 ? 1.0 : s);
      long q = std::lrint(c * 32768.0);  // symmetric with the reader's /32768
      if (q > 32767) q = 32767;
      if (q < -32768) q = -32768;
      w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
    }
  } else {
    for (double s : wf.samples) w.f32(static_cast<float>(s));
  }
  detail::write_file_bytes(path, w.data());
}

}  // namespace melcap

#endif  // MELCAP_WAV_HPP_
