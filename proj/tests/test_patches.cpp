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

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "viewdiv/error.hpp"
#include "viewdiv/patches.hpp"

using namespace viewdiv;

TEST_CASE("grid factor 2 splits a 224 view into four 112 squares") {
  const PatchSet s = grid_patches({0, 0, 224, 224}, 2);
  REQUIRE(s.patches.size() == 4);
  for (const Rect& p : s.patches) {
    CHECK(p.width() == 112.0);
    CHECK(p.height() == 112.0);
  }
  CHECK(s.patches[1] == Rect{112, 0, 224, 112});
  CHECK(s.patches[2] == Rect{0, 112, 112, 224});
}

TEST_CASE("grid factor 3 uses real-valued edges") {
  const PatchSet s = grid_patches({0, 0, 224, 224}, 3);
  REQUIRE(s.patches.size() == 9);
  for (const Rect& p : s.patches) {
    CHECK(p.width() == doctest::Approx(224.0 / 3.0).epsilon(1e-12));
    CHECK(p.height() == doctest::Approx(224.0 / 3.0).epsilon(1e-12));
  }
  CHECK(s.patches[8].x_max == 224.0);
  CHECK(s.patches[8].y_max == 224.0);
}

TEST_CASE("grid patches tile the view") {
  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const double x0 = rng.uniform(0, 300), y0 = rng.uniform(0, 300);
    const Rect view{x0, y0, x0 + rng.uniform(1, 400), y0 + rng.uniform(1, 400)};
    for (int f : {2, 3}) {
      const PatchSet s = grid_patches(view, f);
      double total = 0.0;
      for (std::size_t i = 0; i < s.patches.size(); ++i) {
        total += s.patches[i].area();
        CHECK(contains({0, 0, view.width(), view.height()}, s.patches[i]));
        for (std::size_t j = i + 1; j < s.patches.size(); ++j) {
          CHECK(intersection_area(s.patches[i], s.patches[j]) == 0.0);
        }
      }
      CHECK(std::abs(total - view.area()) <= 1e-9 * view.area());
      for (const Rect& r : s.in_image_coords()) CHECK(contains(view, r));
    }
  }
}

TEST_CASE("grid factor validation") {
  try {
    grid_patches({0, 0, 10, 10}, 4);
    FAIL("expected BadFactor");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BadFactor);
  }
  CHECK(grid_patches({0, 0, 10, 10}, 4, true).patches.size() == 16);
  CHECK_THROWS_AS(parse_patch_strategy("grid5"), Error);
  CHECK(parse_patch_strategy("grid5", true).grid_factor == 5);
  CHECK(parse_patch_strategy("grid2") == PatchStrategy::grid(2));
  CHECK(parse_patch_strategy("sampled").kind == PatchStrategy::Kind::Sampled);
  CHECK_THROWS_AS(parse_patch_strategy("tiles"), Error);
  CHECK(to_string(PatchStrategy::grid(3)) == "grid3");
}

TEST_CASE("patch counts") {
  CHECK(PatchStrategy::grid(2).patch_count() == 4);
  CHECK(PatchStrategy::grid(3).patch_count() == 9);
  CHECK(PatchStrategy::sampled().patch_count() == 9);
}

TEST_CASE("sampled patches are nine contained patches and deterministic") {
  const Rect view{10, 20, 210, 170};
  Rng a(4), b(4);
  const PatchSet s1 = sampled_patches(view, a);
  const PatchSet s2 = sampled_patches(view, b);
  REQUIRE(s1.patches.size() == 9);
  CHECK(s1.patches == s2.patches);
  for (const Rect& r : s1.in_image_coords()) CHECK(contains(view, r));
}

TEST_CASE("sampled patches of an 84 view obey the area and ratio law") {
  const Rect view{0, 0, 84, 84};
  const double lo = std::sqrt(kPatchAreaMin * 84 * 84);
  const double hi = std::sqrt(kPatchAreaMax * 84 * 84);
  CHECK(lo == doctest::Approx(26.56).epsilon(1e-3));
  CHECK(hi == doctest::Approx(65.07).epsilon(1e-3));
  double min_side = 1e9, max_side = 0.0;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    Rng rng(seed);
    for (const Rect& p : sampled_patches(view, rng).patches) {
      const double side = std::sqrt(p.area());
      min_side = std::min(min_side, side);
      max_side = std::max(max_side, side);
      CHECK(contains(view, p));
      CHECK(p.aspect() >= kPatchRatioMin * (1 - 1e-9));
      CHECK(p.aspect() <= kPatchRatioMax * (1 + 1e-9));
    }
  }
  CHECK(min_side >= lo * (1 - 1e-9));
  CHECK(max_side <= hi * (1 + 1e-9));
  CHECK(min_side < lo + 0.5);
  CHECK(max_side > hi - 0.5);
}

TEST_CASE("sampled patches of elongated views stay inside") {
  Rng rng(8);
  for (const Rect view : {Rect{0, 0, 300, 20}, Rect{0, 0, 20, 300}, Rect{5, 5, 6, 100}}) {
    for (int i = 0; i < 200; ++i) {
      for (const Rect& p : sampled_patches(view, rng).patches) {
        CHECK(p.valid());
        CHECK(contains({0, 0, view.width(), view.height()}, p));
      }
    }
  }
}
