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

#ifndef VIEWDIV_PATCHES_HPP_
#define VIEWDIV_PATCHES_HPP_

#include <string>
#include <vector>

#include "viewdiv/geometry.hpp"
#include "viewdiv/rng.hpp"

namespace viewdiv {

/// How a view is cut into the patches whose features are transported.
struct PatchStrategy {
  enum class Kind { Grid, Sampled };

  Kind kind = Kind::Grid;
  int grid_factor = 3;
  int sample_count = 9;
  /// Square side each sampled patch is resized to before encoding.
  int target_side = 84;

  static PatchStrategy grid(int factor) { return {Kind::Grid, factor, 9, 84}; }
  static PatchStrategy sampled() { return {Kind::Sampled, 3, 9, 84}; }

  /// Number of patches per view.
  int patch_count() const { return kind == Kind::Grid ? grid_factor * grid_factor : sample_count; }

  friend bool operator==(const PatchStrategy&, const PatchStrategy&) = default;
};

/// "grid2", "grid3", "sampled".
std::string to_string(const PatchStrategy& s);
/// Throws BadFactor for grids other than 2 or 3 unless `allow_any_factor`.
PatchStrategy parse_patch_strategy(const std::string& name, bool allow_any_factor = false);

struct PatchSet {
  Rect source_view;
  PatchStrategy strategy;
  /// View-local coordinates: (0, 0) is the view's top-left corner.
  std::vector<Rect> patches;

  /// Patches translated into the coordinates of the view's image.
  std::vector<Rect> in_image_coords() const;
};

/// Row-major f x f tiling of the view. Factors other than 2 and 3 throw
/// BadFactor unless `allow_any_factor` is set.
PatchSet grid_patches(const Rect& view, int factor, bool allow_any_factor = false);

/// Area-fraction and aspect-ratio law of sampled patches, relative to the view.
inline constexpr double kPatchAreaMin = 0.1;
inline constexpr double kPatchAreaMax = 0.6;
inline constexpr double kPatchRatioMin = 3.0 / 4.0;
inline constexpr double kPatchRatioMax = 4.0 / 3.0;
inline constexpr int kSampledPatchCount = 9;

/**
 * Nine random sub-rectangles of the view, each covering a uniform fraction in
 * [0.1, 0.6] of the view area with a log-uniform aspect ratio in [3/4, 4/3].
 *
 * The ratio interval is narrowed per draw to the ratios that fit inside the
 * view at the drawn area, so no draw is rejected.
 */
PatchSet sampled_patches(const Rect& view, Rng& rng);

PatchSet make_patches(const Rect& view, const PatchStrategy& strategy, Rng& rng);

}  // namespace viewdiv

#endif  // VIEWDIV_PATCHES_HPP_
