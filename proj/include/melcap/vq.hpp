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

#ifndef MELCAP_VQ_HPP_
#define MELCAP_VQ_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "melcap/bytes.hpp"
#include "melcap/frontend.hpp"
#include "melcap/rng.hpp"

namespace melcap {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

/// Non-overlapping patches cut from a log-mel spectrogram, flattened row-major
/// (time-major within a patch) into D = patch_h * patch_w vectors.  `data` is
/// count x dim, row-major.
struct PatchSet {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<double> data;

  const double* patch(std::size_t i) const { return data.data() + i * dim; }
  double* patch(std::size_t i) { return data.data() + i * dim; }
};

/// PatchSet plus the patch-grid geometry of its source spectrogram.
struct PatchGrid {
  PatchSet patches;
  std::size_t rows = 0;  // time direction
  std::size_t cols = 0;  // mel direction
};

/// Single-stage vector-quantization codebook.  Entries are stored as 32-bit
/// floats, matching the on-disk payload bit for bit; distance arithmetic is
/// done in double.
struct Codebook {
  std::size_t k = 0;
  std::size_t dim = 0;
  std::uint16_t patch_h = 0;
  std::uint16_t patch_w = 0;
  std::uint64_t config_hash = 0;
  std::string trained_on;  // corpus fingerprint, informational
  std::vector<float> entries;  // k x dim, row-major

  const float* entry(std::size_t i) const { return entries.data() + i * dim; }

  /// FNV-1a of the canonical payload serialization (dims + entries).
  std::uint64_t hash() const {
    ByteWriter w;
    w.u32(static_cast<std::uint32_t>(k));
    w.u32(static_cast<std::uint32_t>(dim));
    w.u16(patch_h);
    w.u16(patch_w);
    w.u64(config_hash);
    for (float v : entries) w.f32(v);
    return fnv1a64(w.data().data(), w.data().size());
  }
};

/// Discrete token indices for one spectrogram, rows x cols patch grid.
struct TokenGrid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint32_t> indices;  // rows x cols, row-major
  std::uint64_t codebook_id = 0;
  std::uint64_t config_hash = 0;
};

/// Nearest-code distance statistics over a patch set; delta_max is the
/// dataset supremum of the quantization error.
struct QuantizationReport {
  std::vector<double> per_patch_nearest_dist;
  double delta_max = 0.0;
  double mean_dist = 0.0;
};

/// Codebook training trace; distortion is mean squared nearest-code distance
/// after each assignment pass.
struct TrainResult {
  Codebook codebook;
  std::vector<double> distortion_history;
  std::size_t iterations = 0;
};

// ---------------------------------------------------------------------------
// Patchify
// ---------------------------------------------------------------------------

/// Cuts `logmel` into non-overlapping patch_h x patch_w patches in row-major
/// (time-major) order.  Ragged right/bottom edges are padded with the
/// spectrogram's silence value log(log_floor) before cutting.
inline PatchGrid patchify(const LogMelSpectrogram& logmel, std::size_t patch_h,
                          std::size_t patch_w) {
  if (patch_h == 0 || patch_w == 0)
    throw std::invalid_argument("patchify: patch dimensions must be positive");
  if (logmel.frames == 0 || logmel.mels == 0)
    throw std::invalid_argument("patchify: empty spectrogram");
  const double pad_value = std::log(logmel.config.log_floor);
  PatchGrid grid;
  grid.rows = (logmel.frames + patch_h - 1) / patch_h;
  grid.cols = (logmel.mels + patch_w - 1) / patch_w;
  grid.patches.count = grid.rows * grid.cols;
  grid.patches.dim = patch_h * patch_w;
  grid.patches.data.resize(grid.patches.count * grid.patches.dim);
  for (std::size_t r = 0; r < grid.rows; ++r) {
    for (std::size_t c = 0; c < grid.cols; ++c) {
      double* dst = grid.patches.patch(r * grid.cols + c);
      for (std::size_t dt = 0; dt < patch_h; ++dt) {
        const std::size_t t = r * patch_h + dt;
        for (std::size_t dm = 0; dm < patch_w; ++dm) {
          const std::size_t m = c * patch_w + dm;
          dst[dt * patch_w + dm] =
              (t < logmel.frames && m < logmel.mels) ? logmel.at(t, m) : pad_value;
        }
      }
    }
  }
  return grid;
}

// ---------------------------------------------------------------------------
// Quantization
// ---------------------------------------------------------------------------

struct QuantizeResult {
  std::size_t index = 0;
  double distance = 0.0;
};

/// Nearest codebook entry by Euclidean distance; ties resolve to the lowest
/// index.
inline QuantizeResult quantize(const double* patch, std::size_t dim, const Codebook& cb) {
  if (dim != cb.dim) {
    throw std::invalid_argument("quantize: patch dim " + std::to_string(dim) +
                                " does not match codebook dim " + std::to_string(cb.dim));
  }
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < cb.k; ++i) {
    const float* e = cb.entry(i);
    double d2 = 0.0;
    for (std::size_t j = 0; j < dim; ++j) {
      const double diff = patch[j] - static_cast<double>(e[j]);
      d2 += diff * diff;
    }
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return {best, std::sqrt(best_d2)};
}

inline QuantizeResult quantize(const std::vector<double>& patch, const Codebook& cb) {
  return quantize(patch.data(), patch.size(), cb);
}

// ---------------------------------------------------------------------------
// Codebook training (Lloyd k-means, k-means++ init)
// ---------------------------------------------------------------------------

namespace detail {

// Deterministic parallel assignment: each point's nearest centroid is
// independent, and the distortion reduction below runs in point order, so the
// result does not depend on the thread count.
inline void assign_points(const PatchSet& pts, const std::vector<double>& centroids,
                          std::size_t k, std::vector<std::size_t>& owner,
                          std::vector<double>& dist2, std::size_t jobs) {
  const std::size_t dim = pts.dim;
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const double* p = pts.patch(i);
      std::size_t best = 0;
      double best_d2 = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double* e = centroids.data() + c * dim;
        double d2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = p[j] - e[j];
          d2 += diff * diff;
        }
        if (d2 < best_d2) {
          best_d2 = d2;
          best = c;
        }
      }
      owner[i] = best;
      dist2[i] = best_d2;
    }
  };
  if (jobs <= 1 || pts.count < 256) {
    work(0, pts.count);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (pts.count + jobs - 1) / jobs;
  for (std::size_t t = 0; t < jobs; ++t) {
    const std::size_t b = t * chunk;
    if (b >= pts.count) break;
    pool.emplace_back(work, b, std::min(pts.count, b + chunk));
  }
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// Lloyd k-means with k-means++ initialization.  Deterministic for a given
/// (patches, k, seed); empty clusters are reseeded to the point currently
/// farthest from its centroid; stops when the relative distortion improvement
/// drops below `tol` or after `max_iters` passes.  Distortion is the mean
/// squared nearest-centroid distance and is checked non-increasing every
/// iteration.
inline TrainResult train_codebook(const PatchSet& patches, std::size_t k,
                                  std::size_t max_iters, double tol, std::uint64_t seed,
                                  std::size_t jobs = 1) {
  if (k == 0) throw std::invalid_argument("train_codebook: k must be >= 1");
  if (patches.count < k) {
    throw std::invalid_argument("train_codebook: " + std::to_string(patches.count) +
                                " patches is fewer than k = " + std::to_string(k));
  }
  for (double v : patches.data) {
    if (!std::isfinite(v)) throw std::invalid_argument("train_codebook: non-finite patch value");
  }
  const std::size_t dim = patches.dim;
  const std::size_t n = patches.count;
  Rng rng(seed);

  // k-means++ seeding.
  std::vector<double> centroids(k * dim);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    const std::size_t first = rng.index(n);
    std::copy_n(patches.patch(first), dim, centroids.begin());
    for (std::size_t c = 1; c < k; ++c) {
      const double* last = centroids.data() + (c - 1) * dim;
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double* p = patches.patch(i);
        double d = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          const double diff = p[j] - last[j];
          d += diff * diff;
        }
        d2[i] = std::min(d2[i], d);
        total += d2[i];
      }
      if (!(total > 0.0)) {
        throw std::invalid_argument(
            "train_codebook: fewer than k distinct patches (k-means++ ran out of mass at center " +
            std::to_string(c) + ")");
      }
      double target = rng.uniform01() * total;
      std::size_t pick = n - 1;
      double run = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        run += d2[i];
        if (run >= target) {
          pick = i;
          break;
        }
      }
      std::copy_n(patches.patch(pick), dim, centroids.data() + c * dim);
    }
  }

  TrainResult result;
  std::vector<std::size_t> owner(n, 0);
  std::vector<double> dist2(n, 0.0);
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    detail::assign_points(patches, centroids, k, owner, dist2, jobs);
    double distortion = 0.0;
    for (std::size_t i = 0; i < n; ++i) distortion += dist2[i];
    distortion /= static_cast<double>(n);
    if (!result.distortion_history.empty() && distortion > prev * (1.0 + 1e-12)) {
      throw std::logic_error("train_codebook: distortion increased between iterations");
    }
    result.distortion_history.push_back(distortion);
    result.iterations = iter + 1;
    const bool converged = std::isfinite(prev) && (prev - distortion) <= tol * prev;
    prev = distortion;

    // Update step.
    std::vector<double> sums(k * dim, 0.0);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = patches.patch(i);
      double* s = sums.data() + owner[i] * dim;
      for (std::size_t j = 0; j < dim; ++j) s[j] += p[j];
      ++counts[owner[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      double* e = centroids.data() + c * dim;
      const double* s = sums.data() + c * dim;
      for (std::size_t j = 0; j < dim; ++j) e[j] = s[j] / static_cast<double>(counts[c]);
    }
    // Reseed dead codes to the point farthest from its centroid.  Each such
    // move can only lower the next assignment's distortion (the dead code
    // attracted nothing, and the moved code gains its seed point at zero
    // distance), so Lloyd monotonicity survives.
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (dist2[i] > far_d) {
          far_d = dist2[i];
          far = i;
        }
      }
      std::copy_n(patches.patch(far), dim, centroids.data() + c * dim);
      dist2[far] = 0.0;  // so a second dead code picks a different seed
    }
    if (converged) break;
  }

  result.codebook.k = k;
  result.codebook.dim = dim;
  result.codebook.entries.resize(k * dim);
  for (std::size_t i = 0; i < k * dim; ++i) {
    result.codebook.entries[i] = static_cast<float>(centroids[i]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Encode / decode
// ---------------------------------------------------------------------------

/// Patchify + per-patch nearest-code lookup.  The grid geometry follows
/// patchify; indices are row-major.
inline TokenGrid encode(const LogMelSpectrogram& logmel, const Codebook& cb) {
  if (cb.patch_h == 0 || cb.patch_w == 0)
    throw std::invalid_argument("encode: codebook has no patch geometry");
  PatchGrid grid = patchify(logmel, cb.patch_h, cb.patch_w);
  TokenGrid tokens;
  tokens.rows = grid.rows;
  tokens.cols = grid.cols;
  tokens.indices.resize(grid.patches.count);
  for (std::size_t i = 0; i < grid.patches.count; ++i) {
    tokens.indices[i] =
        static_cast<std::uint32_t>(quantize(grid.patches.patch(i), grid.patches.dim, cb).index);
  }
  tokens.codebook_id = cb.hash();
  tokens.config_hash = fingerprint(logmel.config);
  return tokens;
}

/// Places codeword patches back on the grid.  `frames`/`mels` crop the
/// right/bottom padding when the source shape is known (0 keeps the padded
/// grid).  A codebook whose hash does not match tokens.codebook_id is
/// rejected unless `allow_mismatch` (callers downgrade this to a warning via
/// the override flag).
inline LogMelSpectrogram decode(const TokenGrid& tokens, const Codebook& cb,
                                const AnalysisConfig& config, std::size_t frames = 0,
                                std::size_t mels = 0, bool allow_mismatch = false) {
  if (!allow_mismatch && tokens.codebook_id != 0 && tokens.codebook_id != cb.hash()) {
    throw std::invalid_argument("decode: token grid was produced with a different codebook (id " +
                                hex_u64(tokens.codebook_id) + " vs " + hex_u64(cb.hash()) +
                                "); pass the matching codebook or force the mismatch");
  }
  const std::size_t padded_frames = tokens.rows * cb.patch_h;
  const std::size_t padded_mels = tokens.cols * cb.patch_w;
  if (frames == 0) frames = padded_frames;
  if (mels == 0) mels = padded_mels;
  if (frames > padded_frames || mels > padded_mels)
    throw std::invalid_argument("decode: crop exceeds the token grid span");
  LogMelSpectrogram out;
  out.frames = frames;
  out.mels = mels;
  out.config = config;
  out.values.assign(frames * mels, 0.0);
  for (std::size_t r = 0; r < tokens.rows; ++r) {
    for (std::size_t c = 0; c < tokens.cols; ++c) {
      const std::uint32_t idx = tokens.indices[r * tokens.cols + c];
      if (idx >= cb.k) {
        throw std::invalid_argument("decode: token index " + std::to_string(idx) +
                                    " out of range for codebook of size " + std::to_string(cb.k));
      }
      const float* e = cb.entry(idx);
      for (std::size_t dt = 0; dt < cb.patch_h; ++dt) {
        const std::size_t t = r * cb.patch_h + dt;
        if (t >= frames) break;
        for (std::size_t dm = 0; dm < cb.patch_w; ++dm) {
          const std::size_t m = c * cb.patch_w + dm;
          if (m >= mels) break;
          out.at(t, m) = static_cast<double>(e[dt * cb.patch_w + dm]);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quantization-error accounting
// ---------------------------------------------------------------------------

/// Per-patch nearest-code distances plus their supremum and mean.  Also
/// verifies, patch by patch, that the nearest distance is <= the distance to
/// every other code (throws logic_error on violation: that would mean the
/// argmin is broken).
inline QuantizationReport quantization_delta(const Codebook& cb, const PatchSet& patches) {
  if (patches.count == 0) throw std::invalid_argument("quantization_delta: empty patch set");
  QuantizationReport report;
  report.per_patch_nearest_dist.resize(patches.count);
  double sum = 0.0;
  for (std::size_t i = 0; i < patches.count; ++i) {
    const QuantizeResult q = quantize(patches.patch(i), patches.dim, cb);
    for (std::size_t c = 0; c < cb.k; ++c) {
      const float* e = cb.entry(c);
      double d2 = 0.0;
      for (std::size_t j = 0; j < patches.dim; ++j) {
        const double diff = patches.patch(i)[j] - static_cast<double>(e[j]);
        d2 += diff * diff;
      }
      if (std::sqrt(d2) < q.distance - 1e-12) {
        throw std::logic_error("quantization_delta: code " + std::to_string(c) +
                               " is closer than the reported nearest code for patch " +
                               std::to_string(i));
      }
    }
    report.per_patch_nearest_dist[i] = q.distance;
    report.delta_max = std::max(report.delta_max, q.distance);
    sum += q.distance;
  }
  report.mean_dist = sum / static_cast<double>(patches.count);
  return report;
}

/// Steady-state discrete-token rate: (sample_rate / hop / patch_h) *
/// (n_mels / patch_w) tokens per second.
inline double token_rate(const AnalysisConfig& config, std::size_t patch_h,
                         std::size_t patch_w) {
  config.validate();
  if (patch_h == 0 || patch_w == 0)
    throw std::invalid_argument("token_rate: patch dimensions must be positive");
  return (static_cast<double>(config.sample_rate) / static_cast<double>(config.hop) /
          static_cast<double>(patch_h)) *
         (static_cast<double>(config.n_mels) / static_cast<double>(patch_w));
}

}  // namespace melcap

#endif  // MELCAP_VQ_HPP_
