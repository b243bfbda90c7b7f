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

#ifndef MELCAP_LOSSES_HPP_
#define MELCAP_LOSSES_HPP_

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "melcap/activations.hpp"
#include "melcap/frontend.hpp"
#include "melcap/rng.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// Small dense containers
// ---------------------------------------------------------------------------

/// Plain row-major real matrix used for 2D maps fed to the feature stack and
/// for Gram matrices.
struct RealMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

inline RealMatrix magnitude(const ComplexSpectrogram& spec) {
  RealMatrix m;
  m.rows = spec.frames;
  m.cols = spec.bins;
  m.values.resize(m.rows * m.cols);
  for (std::size_t i = 0; i < m.values.size(); ++i) m.values[i] = std::abs(spec.values[i]);
  return m;
}

inline RealMatrix as_matrix(const LogMelSpectrogram& lm) {
  return RealMatrix{lm.frames, lm.mels, lm.values};
}

/// channels x height x width feature tensor.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double& at(std::size_t c, std::size_t y, std::size_t x) {
    return values[(c * height + y) * width + x];
  }
  double at(std::size_t c, std::size_t y, std::size_t x) const {
    return values[(c * height + y) * width + x];
  }
};

// ---------------------------------------------------------------------------
// Feature stack
// ---------------------------------------------------------------------------

enum class Activation : std::uint8_t { relu = 0, snake = 1 };

struct ConvLayer {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel_h = 0;
  std::size_t kernel_w = 0;
  std::size_t stride_h = 1;
  std::size_t stride_w = 1;
  Activation activation = Activation::relu;
  double snake_a = 1.0;
  std::vector<double> weights;  // out x in x kh x kw, row-major
  std::vector<double> bias;     // out
};

enum class StackSource : std::uint8_t { file = 0, seeded = 1 };

/// A stack of strided valid convolutions with pointwise nonlinearities, the
/// generic conv feature extractor behind the perceptual, Gram and feature
/// matching losses.  `selected` lists the layer indices whose outputs the
/// losses compare; `alphas` are the per-selected-layer weights (default 1,
/// i.e. uniform after the 1/L mean).
struct FeatureStack {
  std::vector<ConvLayer> layers;
  std::vector<std::size_t> selected;
  std::vector<double> alphas;
  StackSource source = StackSource::seeded;
  std::uint64_t source_seed = 0;

  void validate() const {
    if (layers.empty()) throw std::invalid_argument("FeatureStack: no layers");
    if (selected.empty()) throw std::invalid_argument("FeatureStack: no selected layers");
    if (selected.size() != alphas.size())
      throw std::invalid_argument("FeatureStack: selected/alpha size mismatch");
    std::size_t chan = 1;  // stacks run on single-channel 2D maps
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const ConvLayer& l = layers[i];
      if (l.in_channels != chan) {
        throw std::invalid_argument("FeatureStack: layer " + std::to_string(i) + " expects " +
                                    std::to_string(l.in_channels) + " input channels but gets " +
                                    std::to_string(chan));
      }
      if (l.out_channels == 0 || l.kernel_h == 0 || l.kernel_w == 0 || l.stride_h == 0 ||
          l.stride_w == 0) {
        throw std::invalid_argument("FeatureStack: layer " + std::to_string(i) +
                                    " has a zero dimension");
      }
      if (l.weights.size() != l.out_channels * l.in_channels * l.kernel_h * l.kernel_w)
        throw std::invalid_argument("FeatureStack: layer " + std::to_string(i) + " weight size");
      if (l.bias.size() != l.out_channels)
        throw std::invalid_argument("FeatureStack: layer " + std::to_string(i) + " bias size");
      chan = l.out_channels;
    }
    for (std::size_t s : selected) {
      if (s >= layers.size())
        throw std::invalid_argument("FeatureStack: selected layer out of range");
    }
    for (double a : alphas) {
      if (!(a >= 0.0)) throw std::invalid_argument("FeatureStack: alphas must be >= 0");
    }
  }
};

/// Deterministic seeded stack: kernels are variance-scaled normal draws
/// (std = sqrt(2 / fan_in)), biases zero.  `channels` gives the output width
/// of each 3x3 relu layer; all layers are selected with alpha 1.
inline FeatureStack make_seeded_stack(std::uint64_t seed,
                                      const std::vector<std::size_t>& channels = {8, 16},
                                      std::size_t kernel = 3) {
  FeatureStack stack;
  stack.source = StackSource::seeded;
  stack.source_seed = seed;
  Rng rng(seed);
  std::size_t in = 1;
  for (std::size_t li = 0; li < channels.size(); ++li) {
    ConvLayer layer;
    layer.in_channels = in;
    layer.out_channels = channels[li];
    layer.kernel_h = layer.kernel_w = kernel;
    layer.activation = Activation::relu;
    const std::size_t fan_in = in * kernel * kernel;
    const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
    layer.weights.resize(layer.out_channels * fan_in);
    for (double& w : layer.weights) w = scale * rng.normal();
    layer.bias.assign(layer.out_channels, 0.0);
    stack.layers.push_back(std::move(layer));
    stack.selected.push_back(li);
    stack.alphas.push_back(1.0);
    in = channels[li];
  }
  stack.validate();
  return stack;
}

namespace detail {

inline FeatureMap conv_forward(const FeatureMap& in, const ConvLayer& layer) {
  if (in.channels != layer.in_channels)
    throw std::invalid_argument("feature_forward: channel mismatch inside stack");
  if (in.height < layer.kernel_h || in.width < layer.kernel_w) {
    throw std::invalid_argument("feature_forward: input " + std::to_string(in.height) + "x" +
                                std::to_string(in.width) + " smaller than kernel");
  }
  FeatureMap out;
  out.channels = layer.out_channels;
  out.height = (in.height - layer.kernel_h) / layer.stride_h + 1;
  out.width = (in.width - layer.kernel_w) / layer.stride_w + 1;
  out.values.assign(out.channels * out.height * out.width, 0.0);
  for (std::size_t oc = 0; oc < out.channels; ++oc) {
    for (std::size_t oy = 0; oy < out.height; ++oy) {
      for (std::size_t ox = 0; ox < out.width; ++ox) {
        double acc = layer.bias[oc];
        for (std::size_t ic = 0; ic < in.channels; ++ic) {
          for (std::size_t ky = 0; ky < layer.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < layer.kernel_w; ++kx) {
              const double wv =
                  layer.weights[((oc * in.channels + ic) * layer.kernel_h + ky) * layer.kernel_w +
                                kx];
              acc += wv * in.at(ic, oy * layer.stride_h + ky, ox * layer.stride_w + kx);
            }
          }
        }
        switch (layer.activation) {
          case Activation::relu: acc = acc > 0.0 ? acc : 0.0; break;
          case Activation::snake: acc = snake(acc, layer.snake_a); break;
        }
        out.at(oc, oy, ox) = acc;
      }
    }
  }
  return out;
}

inline double total_abs_diff(const FeatureMap& a, const FeatureMap& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) acc += std::abs(a.values[i] - b.values[i]);
  return acc;
}

}  // namespace detail

/// Runs the conv stack on a single-channel 2D map and returns every layer's
/// feature map in order.
inline std::vector<FeatureMap> feature_forward(const RealMatrix& input,
                                               const FeatureStack& stack) {
  stack.validate();
  for (double v : input.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("feature_forward: non-finite input");
  }
  FeatureMap cur;
  cur.channels = 1;
  cur.height = input.rows;
  cur.width = input.cols;
  cur.values = input.values;
  std::vector<FeatureMap> maps;
  maps.reserve(stack.layers.size());
  for (const ConvLayer& layer : stack.layers) {
    cur = detail::conv_forward(cur, layer);
    maps.push_back(cur);
  }
  return maps;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

/// How per-layer L1 terms are reduced into the final scalar.
enum class LossReduction {
  layer_mean,   // (1/L) * sum_l alpha_l * total-L1   (default)
  layer_sum,    //         sum_l alpha_l * total-L1
  per_element,  // (1/L) * sum_l alpha_l * mean-L1 per element
};

/// Mean elementwise L1: (1 / (T*M)) * sum |S - S_hat|.
inline double l1_mel(const LogMelSpectrogram& s, const LogMelSpectrogram& s_hat) {
  if (s.frames != s_hat.frames || s.mels != s_hat.mels)
    throw std::invalid_argument("l1_mel: shape mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < s.values.size(); ++i)
    acc += std::abs(s.values[i] - s_hat.values[i]);
  return acc / static_cast<double>(s.values.size());
}

/// Conv-feature distance over the selected layers of `stack`.
inline double perceptual_loss(const RealMatrix& s, const RealMatrix& s_hat,
                              const FeatureStack& stack,
                              LossReduction reduction = LossReduction::layer_mean) {
  if (s.rows != s_hat.rows || s.cols != s_hat.cols)
    throw std::invalid_argument("perceptual_loss: shape mismatch");
  const std::vector<FeatureMap> fa = feature_forward(s, stack);
  const std::vector<FeatureMap> fb = feature_forward(s_hat, stack);
  double acc = 0.0;
  for (std::size_t i = 0; i < stack.selected.size(); ++i) {
    const FeatureMap& ma = fa[stack.selected[i]];
    const FeatureMap& mb = fb[stack.selected[i]];
    double term = detail::total_abs_diff(ma, mb);
    if (reduction == LossReduction::per_element)
      term /= static_cast<double>(ma.values.size());
    acc += stack.alphas[i] * term;
  }
  if (reduction != LossReduction::layer_sum)
    acc /= static_cast<double>(stack.selected.size());
  return acc;
}

inline double perceptual_loss(const LogMelSpectrogram& s, const LogMelSpectrogram& s_hat,
                              const FeatureStack& stack,
                              LossReduction reduction = LossReduction::layer_mean) {
  return perceptual_loss(as_matrix(s), as_matrix(s_hat), stack, reduction);
}

/// Position-normalized Gram matrix of one feature map: with Phi the
/// (positions x channels) flattening, GM = Phi^T Phi / positions.
inline RealMatrix gram_matrix(const FeatureMap& fm) {
  RealMatrix gm;
  gm.rows = gm.cols = fm.channels;
  gm.values.assign(fm.channels * fm.channels, 0.0);
  const std::size_t positions = fm.height * fm.width;
  for (std::size_t a = 0; a < fm.channels; ++a) {
    for (std::size_t b = a; b < fm.channels; ++b) {
      double acc = 0.0;
      const double* pa = fm.values.data() + a * positions;
      const double* pb = fm.values.data() + b * positions;
      for (std::size_t p = 0; p < positions; ++p) acc += pa[p] * pb[p];
      acc /= static_cast<double>(positions);
      gm.at(a, b) = acc;
      gm.at(b, a) = acc;
    }
  }
  return gm;
}

/// Gram-matrix distance over the selected layers.
inline double gram_loss(const RealMatrix& s, const RealMatrix& s_hat, const FeatureStack& stack,
                        LossReduction reduction = LossReduction::layer_mean) {
  if (s.rows != s_hat.rows || s.cols != s_hat.cols)
    throw std::invalid_argument("gram_loss: shape mismatch");
  const std::vector<FeatureMap> fa = feature_forward(s, stack);
  const std::vector<FeatureMap> fb = feature_forward(s_hat, stack);
  double acc = 0.0;
  for (std::size_t i = 0; i < stack.selected.size(); ++i) {
    const RealMatrix ga = gram_matrix(fa[stack.selected[i]]);
    const RealMatrix gb = gram_matrix(fb[stack.selected[i]]);
    double term = 0.0;
    for (std::size_t j = 0; j < ga.values.size(); ++j)
      term += std::abs(ga.values[j] - gb.values[j]);
    if (reduction == LossReduction::per_element)
      term /= static_cast<double>(ga.values.size());
    acc += stack.alphas[i] * term;
  }
  if (reduction != LossReduction::layer_sum)
    acc /= static_cast<double>(stack.selected.size());
  return acc;
}

inline double gram_loss(const LogMelSpectrogram& s, const LogMelSpectrogram& s_hat,
                        const FeatureStack& stack,
                        LossReduction reduction = LossReduction::layer_mean) {
  return gram_loss(as_matrix(s), as_matrix(s_hat), stack, reduction);
}

/// Feature distances between the linear-magnitude STFTs of two waveforms,
/// summed over every (stack, stft config) pair and every selected layer —
/// no per-layer weights or layer mean, times the overall `weight`.
inline double feature_matching_loss(const Waveform& x, const Waveform& x_hat,
                                    const std::vector<FeatureStack>& stacks,
                                    const std::vector<AnalysisConfig>& stft_configs,
                                    double weight = 1.0) {
  if (x.samples.size() != x_hat.samples.size())
    throw std::invalid_argument("feature_matching_loss: waveform length mismatch");
  if (x.sample_rate != x_hat.sample_rate)
    throw std::invalid_argument("feature_matching_loss: sample rate mismatch");
  double acc = 0.0;
  for (const AnalysisConfig& cfg : stft_configs) {
    const RealMatrix ma = magnitude(stft(x, cfg));
    const RealMatrix mb = magnitude(stft(x_hat, cfg));
    for (const FeatureStack& stack : stacks) {
      const std::vector<FeatureMap> fa = feature_forward(ma, stack);
      const std::vector<FeatureMap> fb = feature_forward(mb, stack);
      for (std::size_t sel : stack.selected) {
        acc += detail::total_abs_diff(fa[sel], fb[sel]);
      }
    }
  }
  return weight * acc;
}

/// Mean over FFT scales of the mean elementwise L1 between linear-magnitude
/// spectrograms; hop is size/4 with a hann window.
inline double multiscale_stft_distance(const Waveform& x, const Waveform& x_hat,
                                       const std::vector<std::size_t>& fft_sizes = {512, 1024,
                                                                                    2048}) {
  if (x.samples.size() != x_hat.samples.size())
    throw std::invalid_argument("multiscale_stft_distance: waveform length mismatch");
  if (x.sample_rate != x_hat.sample_rate)
    throw std::invalid_argument("multiscale_stft_distance: sample rate mismatch");
  if (fft_sizes.empty())
    throw std::invalid_argument("multiscale_stft_distance: need at least one scale");
  double acc = 0.0;
  for (std::size_t size : fft_sizes) {
    AnalysisConfig cfg;
    cfg.n_fft = size;
    cfg.hop = std::max<std::size_t>(1, size / 4);
    cfg.window_kind = WindowKind::hann;
    cfg.sample_rate = x.sample_rate;
    cfg.f_max = x.sample_rate / 2.0;
    const RealMatrix ma = magnitude(stft(x, cfg));
    const RealMatrix mb = magnitude(stft(x_hat, cfg));
    double term = 0.0;
    for (std::size_t i = 0; i < ma.values.size(); ++i)
      term += std::abs(ma.values[i] - mb.values[i]);
    acc += term / static_cast<double>(ma.values.size());
  }
  return acc / static_cast<double>(fft_sizes.size());
}

}  // namespace melcap

#endif  // MELCAP_LOSSES_HPP_
