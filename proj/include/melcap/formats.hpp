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

#ifndef MELCAP_FORMATS_HPP_
#define MELCAP_FORMATS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "melcap/bytes.hpp"
#include "melcap/losses.hpp"
#include "melcap/vq.hpp"
#include "melcap/wav.hpp"

namespace melcap {

inline constexpr std::uint16_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// MCBK — codebook file
// ---------------------------------------------------------------------------
// magic "MCBK", version u16, K u32, D u32, patch_h u16, patch_w u16,
// config hash u64, then K*D little-endian f32, row-major.

inline std::vector<std::uint8_t> serialize_codebook(const Codebook& cb) {
  ByteWriter w;
  w.magic("MCBK");
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(cb.k));
  w.u32(static_cast<std::uint32_t>(cb.dim));
  w.u16(cb.patch_h);
  w.u16(cb.patch_w);
  w.u64(cb.config_hash);
  for (float v : cb.entries) w.f32(v);
  return w.data();
}

inline Codebook parse_codebook(const std::vector<std::uint8_t>& buf, const std::string& what) {
  ByteReader r(buf);
  r.expect_magic("MCBK", what);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw IoError(what + ": unsupported MCBK version " + std::to_string(version));
  Codebook cb;
  cb.k = r.u32();
  cb.dim = r.u32();
  cb.patch_h = r.u16();
  cb.patch_w = r.u16();
  cb.config_hash = r.u64();
  if (cb.k == 0 || cb.dim == 0) throw IoError(what + ": empty codebook");
  if (static_cast<std::size_t>(cb.patch_h) * cb.patch_w != cb.dim)
    throw IoError(what + ": patch geometry does not match entry dimension");
  cb.entries.resize(cb.k * cb.dim);
  for (float& v : cb.entries) v = r.f32();
  return cb;
}

inline void save_codebook(const std::string& path, const Codebook& cb) {
  detail::write_file_bytes(path, serialize_codebook(cb));
}

inline Codebook load_codebook(const std::string& path) {
  return parse_codebook(detail::read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// MCAP — token file
// ---------------------------------------------------------------------------
// magic "MCAP", version u16, config hash u64, codebook hash u64, rows u32,
// cols u32, then rows*cols little-endian u32 indices, row-major.

inline std::vector<std::uint8_t> serialize_tokens(const TokenGrid& tokens) {
  ByteWriter w;
  w.magic("MCAP");
  w.u16(kFormatVersion);
  w.u64(tokens.config_hash);
  w.u64(tokens.codebook_id);
  w.u32(static_cast<std::uint32_t>(tokens.rows));
  w.u32(static_cast<std::uint32_t>(tokens.cols));
  for (std::uint32_t idx : tokens.indices) w.u32(idx);
  return w.data();
}

inline TokenGrid parse_tokens(const std::vector<std::uint8_t>& buf, const std::string& what) {
  ByteReader r(buf);
  r.expect_magic("MCAP", what);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw IoError(what + ": unsupported MCAP version " + std::to_string(version));
  TokenGrid t;
  t.config_hash = r.u64();
  t.codebook_id = r.u64();
  t.rows = r.u32();
  t.cols = r.u32();
  if (t.rows == 0 || t.cols == 0) throw IoError(what + ": empty token grid");
  t.indices.resize(t.rows * t.cols);
  for (std::uint32_t& idx : t.indices) idx = r.u32();
  return t;
}

inline void save_tokens(const std::string& path, const TokenGrid& tokens) {
  detail::write_file_bytes(path, serialize_tokens(tokens));
}

inline TokenGrid load_tokens(const std::string& path) {
  return parse_tokens(detail::read_file_bytes(path), path);
}

// ---------------------------------------------------------------------------
// MFST — feature stack file
// ---------------------------------------------------------------------------
// magic "MFST", version u16, layer count u32, then per layer:
//   out u32, in u32, kh u32, kw u32, stride_h u16, stride_w u16,
//   activation u8 (1 = snake, followed by its f32 parameter),
//   f32 weights (out*in*kh*kw), f32 biases (out);
// trailing table: selected count u32, then per entry (layer index u32,
// alpha f32).

inline std::vector<std::uint8_t> serialize_feature_stack(const FeatureStack& stack) {
  stack.validate();
  ByteWriter w;
  w.magic("MFST");
  w.u16(kFormatVersion);
  w.u32(static_cast<std::uint32_t>(stack.layers.size()));
  for (const ConvLayer& l : stack.layers) {
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
  w.u32(static_cast<std::uint32_t>(stack.selected.size()));
  for (std::size_t i = 0; i < stack.selected.size(); ++i) {
    w.u32(static_cast<std::uint32_t>(stack.selected[i]));
    w.f32(static_cast<float>(stack.alphas[i]));
  }
  return w.data();
}

inline FeatureStack parse_feature_stack(const std::vector<std::uint8_t>& buf,
                                        const std::string& what) {
  ByteReader r(buf);
  r.expect_magic("MFST", what);
  const std::uint16_t version = r.u16();
  if (version != kFormatVersion)
    throw IoError(what + ": unsupported MFST version " + std::to_string(version));
  FeatureStack stack;
  const std::uint32_t n_layers = r.u32();
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    ConvLayer l;
    l.out_channels = r.u32();
    l.in_channels = r.u32();
    l.kernel_h = r.u32();
    l.kernel_w = r.u32();
    l.stride_h = r.u16();
    l.stride_w = r.u16();
    const std::uint8_t tag = r.u8();
    if (tag > 1) throw IoError(what + ": unknown activation tag");
    l.activation = static_cast<Activation>(tag);
    if (l.activation == Activation::snake) l.snake_a = r.f32();
    l.weights.resize(l.out_channels * l.in_channels * l.kernel_h * l.kernel_w);
    for (double& v : l.weights) v = r.f32();
    l.bias.resize(l.out_channels);
    for (double& v : l.bias) v = r.f32();
    stack.layers.push_back(std::move(l));
  }
  const std::uint32_t n_sel = r.u32();
  for (std::uint32_t i = 0; i < n_sel; ++i) {
    stack.selected.push_back(r.u32());
    stack.alphas.push_back(r.f32());
  }
  stack.source = StackSource::file;
  try {
    stack.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError(what + ": " + e.what());
  }
  return stack;
}

inline void save_feature_stack(const std::string& path, const FeatureStack& stack) {
  detail::write_file_bytes(path, serialize_feature_stack(stack));
}

inline FeatureStack load_feature_stack(const std::string& path) {
  return parse_feature_stack(detail::read_file_bytes(path), path);
}

}  // namespace melcap

#endif  // MELCAP_FORMATS_HPP_
