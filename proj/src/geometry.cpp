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

#include "viewdiv/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "viewdiv/error.hpp"

namespace viewdiv {

bool Rect::valid() const {
  return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
         std::isfinite(y_max) && x_max > x_min && y_max > y_min;
}

void check_rect(const Rect& r) {
  VIEWDIV_ENFORCE(r.valid(), ErrorKind::InvalidRect, to_string(r));
}

std::string to_string(const Rect& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "(%.17g, %.17g, %.17g, %.17g)", r.x_min, r.y_min, r.x_max,
                r.y_max);
  return buf;
}

bool CropScale::valid() const {
  return s_min > 0.0 && s_min <= s_max && s_max <= 1.0 && ratio_min > 0.0 &&
         ratio_min <= ratio_max && std::isfinite(ratio_max);
}

double intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double h = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const Rect& a, const Rect& b) {
  if (a == b) return 1.0;
  const double inter = intersection_area(a, b);
  if (inter == 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

bool contains(const Rect& outer, const Rect& inner) {
  return inner.x_min >= outer.x_min && inner.y_min >= outer.y_min &&
         inner.x_max <= outer.x_max && inner.y_max <= outer.y_max;
}

namespace {

Rect place(double w, double h, const ImageExtent& extent, Rng& rng) {
  const double W = static_cast<double>(extent.width);
  const double H = static_cast<double>(extent.height);
  const double x = rng.uniform(0.0, W - w);
  const double y = rng.uniform(0.0, H - h);
  return {x, y, std::min(x + w, W), std::min(y + h, H)};
}

Rect center_fallback(const ImageExtent& extent, const CropScale& scale) {
  const double W = static_cast<double>(extent.width);
  const double H = static_cast<double>(extent.height);
  const double A = W * H;
  const double ratio = std::clamp(W / H, scale.ratio_min, scale.ratio_max);
  double w = std::min(W, H * ratio);
  double h = w / ratio;
  if (w * h > scale.s_max * A) {
    const double k = std::sqrt(scale.s_max * A / (w * h));
    w *= k;
    h *= k;
  } else if (w * h < scale.s_min * A) {
    // Extreme image aspect: grow along the free axis, leaving the ratio bounds.
    if (w >= W) {
      h = std::min(H, scale.s_min * A / w);
    } else {
      w = std::min(W, scale.s_min * A / h);
    }
  }
  const double x = (W - w) / 2.0;
  const double y = (H - h) / 2.0;
  return {x, y, x + w, y + h};
}

}  // namespace

Rect sample_rrc(const ImageExtent& extent, const CropScale& scale, Rng& rng) {
  VIEWDIV_ENFORCE(extent.width >= 1 && extent.height >= 1, ErrorKind::ExtentTooSmall,
                  "image extent must be at least 1x1");
  VIEWDIV_ENFORCE(scale.valid(), ErrorKind::InvalidConfig, "invalid crop scale");
  const double A = extent.area();
  VIEWDIV_ENFORCE(scale.s_max * A >= 1.0, ErrorKind::ExtentTooSmall,
                  "s_max of the extent is smaller than one pixel");

  const double W = static_cast<double>(extent.width);
  const double H = static_cast<double>(extent.height);
  const double log_lo = std::log(scale.ratio_min);
  const double log_hi = std::log(scale.ratio_max);
  for (int attempt = 0; attempt < kRrcAttempts; ++attempt) {
    const double target = A * rng.uniform(scale.s_min, scale.s_max);
    const double ratio =
        std::clamp(std::exp(rng.uniform(log_lo, log_hi)), scale.ratio_min, scale.ratio_max);
    const double w = std::sqrt(target * ratio);
    const double h = std::sqrt(target / ratio);
    if (w > 0.0 && w <= W && h > 0.0 && h <= H) return place(w, h, extent, rng);
  }
  return center_fallback(extent, scale);
}

bool satisfies_area_law(const Rect& r, const ImageExtent& extent, const CropScale& scale) {
  if (!r.valid() || !contains(extent.bounds(), r)) return false;
  const double frac = r.area() / extent.area();
  return frac >= scale.s_min * (1.0 - kLawTolerance) && frac <= scale.s_max * (1.0 + kLawTolerance);
}

bool satisfies_ratio_law(const Rect& r, const CropScale& scale) {
  if (!r.valid()) return false;
  const double ratio = r.aspect();
  return ratio >= scale.ratio_min * (1.0 - kLawTolerance) &&
         ratio <= scale.ratio_max * (1.0 + kLawTolerance);
}

}  // namespace viewdiv
