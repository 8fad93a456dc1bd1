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

#ifndef VIEWDIV_GEOMETRY_HPP_
#define VIEWDIV_GEOMETRY_HPP_

#include <cstdint>
#include <string>

#include "viewdiv/rng.hpp"

namespace viewdiv {

/// Axis-aligned region in continuous pixel coordinates, corner convention.
struct Rect {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
  double area() const { return width() * height(); }
  /// width / height
  double aspect() const { return width() / height(); }

  bool valid() const;

  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Throws InvalidRect unless the rect has finite corners and positive area.
void check_rect(const Rect& r);

std::string to_string(const Rect& r);

struct ImageExtent {
  std::int64_t width = 0;
  std::int64_t height = 0;

  double area() const { return static_cast<double>(width) * static_cast<double>(height); }
  Rect bounds() const { return {0.0, 0.0, static_cast<double>(width), static_cast<double>(height)}; }

  friend bool operator==(const ImageExtent&, const ImageExtent&) = default;
};

/// Area-fraction and aspect-ratio law of a RandomResizedCrop.
struct CropScale {
  double s_min = 0.2;
  double s_max = 1.0;
  double ratio_min = 3.0 / 4.0;
  double ratio_max = 4.0 / 3.0;

  bool valid() const;

  friend bool operator==(const CropScale&, const CropScale&) = default;
};

/// Intersection area; zero for disjoint or edge-touching rects.
double intersection_area(const Rect& a, const Rect& b);

/// Intersection over union in [0, 1].
double iou(const Rect& a, const Rect& b);

/// True iff `inner` lies within `outer` componentwise.
bool contains(const Rect& outer, const Rect& inner);

inline constexpr int kRrcAttempts = 10;

/**
 * Samples a RandomResizedCrop region.
 *
 * Up to kRrcAttempts draws of a uniform area fraction in [s_min, s_max] and a
 * log-uniform aspect ratio in [ratio_min, ratio_max]; the first draw that
 * fits inside the extent is placed uniformly at random. If all attempts fail
 * the crop is centered, with its ratio clamped to the bounds and its area
 * clamped into [s_min, s_max]. Only the fallback may leave the ratio bounds,
 * and only for images whose own aspect is far outside them.
 *
 * Throws ExtentTooSmall when even s_max of the extent is below one pixel.
 */
Rect sample_rrc(const ImageExtent& extent, const CropScale& scale, Rng& rng);

/// Relative slack used when checking sampled areas and ratios against their
/// bounds. Corner arithmetic rounds, so exact-boundary draws may land a few
/// ulps outside.
inline constexpr double kLawTolerance = 1e-9;

/// True iff `r` is inside the extent and obeys the area-fraction law.
bool satisfies_area_law(const Rect& r, const ImageExtent& extent, const CropScale& scale);

/// True iff the aspect ratio of `r` is within the bounds.
bool satisfies_ratio_law(const Rect& r, const CropScale& scale);

}  // namespace viewdiv

#endif  // VIEWDIV_GEOMETRY_HPP_
