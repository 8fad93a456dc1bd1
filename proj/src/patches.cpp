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

#include "viewdiv/patches.hpp"

#include <algorithm>
#include <cmath>

#include "viewdiv/error.hpp"

namespace viewdiv {

std::string to_string(const PatchStrategy& s) {
  if (s.kind == PatchStrategy::Kind::Sampled) return "sampled";
  return "grid" + std::to_string(s.grid_factor);
}

PatchStrategy parse_patch_strategy(const std::string& name, bool allow_any_factor) {
  if (name == "sampled") return PatchStrategy::sampled();
  if (name.rfind("grid", 0) == 0 && name.size() > 4) {
    int factor = 0;
    try {
      factor = std::stoi(name.substr(4));
    } catch (const std::exception&) {
      throw Error(ErrorKind::BadFactor, "cannot parse grid factor in '" + name + "'");
    }
    VIEWDIV_ENFORCE(factor >= 1 && (allow_any_factor || factor == 2 || factor == 3),
                    ErrorKind::BadFactor, "grid factor must be 2 or 3, got " + std::to_string(factor));
    return PatchStrategy::grid(factor);
  }
  throw Error(ErrorKind::InvalidConfig, "unknown patch strategy '" + name + "'");
}

std::vector<Rect> PatchSet::in_image_coords() const {
  std::vector<Rect> out;
  out.reserve(patches.size());
  for (const Rect& p : patches) {
    out.push_back({source_view.x_min + p.x_min, source_view.y_min + p.y_min,
                   source_view.x_min + p.x_max, source_view.y_min + p.y_max});
  }
  return out;
}

PatchSet grid_patches(const Rect& view, int factor, bool allow_any_factor) {
  check_rect(view);
  VIEWDIV_ENFORCE(factor >= 1 && (allow_any_factor || factor == 2 || factor == 3),
                  ErrorKind::BadFactor, "grid factor must be 2 or 3, got " + std::to_string(factor));
  PatchSet set;
  set.source_view = view;
  set.strategy = PatchStrategy::grid(factor);
  const double w = view.width();
  const double h = view.height();
  // Edges are computed from the index, not accumulated, so neighbours share
  // bit-identical boundaries and the outer edges hit the view exactly.
  auto edge = [factor](double extent, int i) {
    return i == factor ? extent : extent * static_cast<double>(i) / static_cast<double>(factor);
  };
  set.patches.reserve(static_cast<std::size_t>(factor) * factor);
  for (int r = 0; r < factor; ++r) {
    for (int c = 0; c < factor; ++c) {
      set.patches.push_back({edge(w, c), edge(h, r), edge(w, c + 1), edge(h, r + 1)});
    }
  }
  return set;
}

PatchSet sampled_patches(const Rect& view, Rng& rng) {
  check_rect(view);
  PatchSet set;
  set.source_view = view;
  set.strategy = PatchStrategy::sampled();
  const double W = view.width();
  const double H = view.height();
  const double A = W * H;
  set.patches.reserve(kSampledPatchCount);
  for (int i = 0; i < kSampledPatchCount; ++i) {
    const double frac = rng.uniform(kPatchAreaMin, kPatchAreaMax);
    const double area = frac * A;
    // w = sqrt(area * r) <= W  and  h = sqrt(area / r) <= H
    double r_lo = std::max(kPatchRatioMin, area / (H * H));
    double r_hi = std::min(kPatchRatioMax, (W * W) / area);
    double w = 0.0;
    double h = 0.0;
    if (r_lo <= r_hi) {
      const double r =
          std::clamp(std::exp(rng.uniform(std::log(r_lo), std::log(r_hi))), r_lo, r_hi);
      w = std::min(W, std::sqrt(area * r));
      h = std::min(H, std::sqrt(area / r));
    } else {
      // View far outside the ratio bounds: fill the short side.
      rng.uniform01();
      if (W < H) {
        w = W;
        h = area / W;
      } else {
        h = H;
        w = area / H;
      }
    }
    const double x = rng.uniform(0.0, W - w);
    const double y = rng.uniform(0.0, H - h);
    set.patches.push_back({x, y, std::min(x + w, W), std::min(y + h, H)});
  }
  return set;
}

PatchSet make_patches(const Rect& view, const PatchStrategy& strategy, Rng& rng) {
  if (strategy.kind == PatchStrategy::Kind::Grid) return grid_patches(view, strategy.grid_factor, true);
  return sampled_patches(view, rng);
}

}  // namespace viewdiv
