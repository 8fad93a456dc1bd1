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

#ifndef VIEWDIV_SYNTH_HPP_
#define VIEWDIV_SYNTH_HPP_

#include <cstdint>
#include <filesystem>

#include "viewdiv/features.hpp"
#include "viewdiv/pairgen.hpp"

namespace viewdiv {

struct SynthOptions {
  int images = 200;
  std::int64_t width = 224;
  std::int64_t height = 224;
  std::uint64_t seed = 0;
  /// Every fourth image gets a landscape 4:3 extent when set.
  bool vary_aspect = true;
};

struct SynthImage {
  AnnotatedImage meta;
  Image pixels;
};

/**
 * Procedural scene: a two-colour low-frequency background with pixel noise
 * and one to three textured instance boxes. The first box is large enough
 * (about a quarter of the frame) for a crop to match it closely.
 */
SynthImage make_synthetic_image(std::uint64_t seed, std::int64_t width, std::int64_t height,
                                const std::string& id);

/// Writes <dir>/img_XXXX.ppm and <dir>/manifest.json; returns the manifest path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SynthOptions& opts);

}  // namespace viewdiv

#endif  // VIEWDIV_SYNTH_HPP_
