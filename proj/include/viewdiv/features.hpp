// Copyright (c) 2026, The viewdiv Authors. All rights reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VIEWDIV_FEATURES_HPP_
#define VIEWDIV_FEATURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "viewdiv/geometry.hpp"

namespace viewdiv {

/// Row-major N x D matrix of per-patch feature vectors.
class FeatureMap {
 public:
  FeatureMap() = default;
  /// Throws DimMismatch on zero dims or a size mismatch, NonFiniteValue on
  /// NaN/Inf entries.
  FeatureMap(std::size_t n, std::size_t d, std::vector<double> values, bool normalized = false);

  std::size_t n() const { return n_; }
  std::size_t d() const { return d_; }
  bool normalized() const { return normalized_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(values_).subspan(i * d_, d_);
  }

  friend bool operator==(const FeatureMap&, const FeatureMap&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<double> values_;
  bool normalized_ = false;
};

/// Rows with L2 norm below this are treated as zero.
inline constexpr double kZeroNorm = 1e-12;

/// Scales `v` to unit L2 norm. A zero vector becomes e1 and false is returned.
bool normalize_in_place(std::span<double> v);

struct NormalizedMap {
  FeatureMap map;
  /// Rows that were replaced by e1.
  std::size_t zero_rows = 0;
};

NormalizedMap normalize_rows(const FeatureMap& f);

// ---------------------------------------------------------------------------
// Pixels

/// 8-bit interleaved RGB raster. Also used for patch crops.
struct PixelPatch {
  std::int64_t width = 0;
  std::int64_t height = 0;
  std::vector<std::uint8_t> data;  // width * height * 3

  std::uint8_t at(std::int64_t x, std::int64_t y, int c) const {
    return data[static_cast<std::size_t>((y * width + x) * 3 + c)];
  }
  bool valid() const {
    return width >= 1 && height >= 1 &&
           data.size() == static_cast<std::size_t>(width * height * 3);
  }
};

using Image = PixelPatch;

/// Pixel window covered by a continuous rect: floor on the min corner, ceil on
/// the max corner, clipped to the image.
struct PixelWindow {
  std::int64_t x0, y0, x1, y1;
};
PixelWindow rasterize(const Rect& r, std::int64_t width, std::int64_t height);

/// Copies the pixels under `r`. Throws EmptyPatch if the window is empty.
PixelPatch crop_pixels(const Image& img, const Rect& r);

/// Binary PPM (P6, maxval 255). Throws IoError.
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& img);

// ---------------------------------------------------------------------------
// Toy encoder

inline constexpr int kToyGrid = 8;
inline constexpr std::size_t kToyDim = kToyGrid * kToyGrid * 3;

/**
 * Area-weighted average pooling of each channel onto an 8x8 grid, scaled to
 * [0, 1]. Layout is channel-major: index = c * 64 + gy * 8 + gx.
 *
 * Pooling is done in exact integer arithmetic on a 1/8-pixel lattice, so an
 * integer upscale of a patch pools to bit-identical values.
 */
std::vector<double> toy_pool(const PixelPatch& patch);

/// toy_pool followed by L2 normalization. An all-zero patch yields e1.
std::vector<double> toy_encode(const PixelPatch& patch);

// ---------------------------------------------------------------------------
// FEMB embedding files
//
//   "FEMB" | version u32 = 1 | n u32 | d u32 | n*d float32, row-major
//   all little-endian.

inline constexpr std::uint32_t kFembVersion = 1;

/// Values are narrowed to float32.
void write_embeddings(const std::filesystem::path& path, const FeatureMap& f);
std::vector<std::uint8_t> encode_embeddings(const FeatureMap& f);

/// Throws BadMagic, TruncatedFile, DimMismatch or NonFiniteValue.
FeatureMap decode_embeddings(std::span<const std::uint8_t> bytes, bool renormalize = false);
FeatureMap load_embeddings(const std::filesystem::path& path, bool renormalize = false);

/// Maps pair_id to the two embedding files of an external encoder:
///   {"pair_id": {"view1": path, "view2": path, "strategy": "grid3"}, ...}
struct EmbeddingEntry {
  std::filesystem::path view1;
  std::filesystem::path view2;
  std::string strategy;
};
using EmbeddingManifest = std::map<std::string, EmbeddingEntry>;

/// Relative paths resolve against the manifest's directory. Throws ManifestError.
EmbeddingManifest load_embedding_manifest(const std::filesystem::path& path);

}  // namespace viewdiv

#endif  // VIEWDIV_FEATURES_HPP_
