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

#include "viewdiv/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "viewdiv/error.hpp"
#include "viewdiv/rng.hpp"

namespace viewdiv {

namespace {

using Rgb = std::array<double, 3>;

/// Saturated colour from a random hue.
Rgb random_colour(Rng& rng) {
  const double h = rng.uniform(0.0, 6.0);
  const double s = rng.uniform(0.7, 1.0);
  const double v = rng.uniform(0.5, 1.0);
  const double f = h - std::floor(h);
  const double p = v * (1.0 - s), q = v * (1.0 - s * f), t = v * (1.0 - s * (1.0 - f));
  switch (static_cast<int>(h) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

}  // namespace

SynthImage make_synthetic_image(std::uint64_t seed, std::int64_t width, std::int64_t height,
                                const std::string& id) {
  Rng rng(seed);
  SynthImage out;
  out.meta.id = id;
  out.meta.extent = {width, height};
  Image& img = out.pixels;
  img.width = width;
  img.height = height;
  img.data.resize(static_cast<std::size_t>(width * height * 3));

  const Rgb a = random_colour(rng);
  const Rgb b = random_colour(rng);
  // Background blend completes about one cycle per image span.
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double period = rng.uniform(1.0, 2.0) * static_cast<double>(std::max(width, height));
  const double kx = std::cos(angle) * 2.0 * std::numbers::pi / period;
  const double ky = std::sin(angle) * 2.0 * std::numbers::pi / period;
  const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  for (std::int64_t y = 0; y < height; ++y) {
    for (std::int64_t x = 0; x < width; ++x) {
      const double t = 0.5 + 0.5 * std::sin(kx * static_cast<double>(x) + ky * static_cast<double>(y) + phase);
      for (int c = 0; c < 3; ++c) {
        const double noise = rng.uniform(-0.03, 0.03);
        img.data[static_cast<std::size_t>((y * width + x) * 3 + c)] =
            to_byte(a[c] * (1.0 - t) + b[c] * t + noise);
      }
    }
  }

  const double W = static_cast<double>(width);
  const double H = static_cast<double>(height);
  const int n_boxes = 1 + static_cast<int>(rng.below(3));
  for (int k = 0; k < n_boxes; ++k) {
    double bw, bh, x0, y0;
    if (k == 0) {
      // Large instance hugging a random corner.
      bw = W * rng.uniform(0.45, 0.6);
      bh = H * rng.uniform(0.45, 0.6);
      x0 = rng.below(2) == 0 ? rng.uniform(0.0, 0.05 * W) : W - bw - rng.uniform(0.0, 0.05 * W);
      y0 = rng.below(2) == 0 ? rng.uniform(0.0, 0.05 * H) : H - bh - rng.uniform(0.0, 0.05 * H);
    } else {
      bw = W * rng.uniform(0.1, 0.25);
      bh = H * rng.uniform(0.1, 0.25);
      x0 = rng.uniform(0.0, W - bw);
      y0 = rng.uniform(0.0, H - bh);
    }
    const Rect box{std::floor(x0), std::floor(y0), std::floor(x0 + bw), std::floor(y0 + bh)};
    out.meta.boxes.push_back(box);
    const Rgb fill = random_colour(rng);
    const Rgb stripe = random_colour(rng);
    const std::int64_t cell = 4 + static_cast<std::int64_t>(rng.below(8));
    for (auto y = static_cast<std::int64_t>(box.y_min); y < static_cast<std::int64_t>(box.y_max); ++y) {
      for (auto x = static_cast<std::int64_t>(box.x_min); x < static_cast<std::int64_t>(box.x_max); ++x) {
        const bool on = ((x / cell) + (y / cell)) % 2 == 0;
        for (int c = 0; c < 3; ++c) {
          img.data[static_cast<std::size_t>((y * width + x) * 3 + c)] = to_byte(on ? fill[c] : stripe[c]);
        }
      }
    }
  }
  return out;
}

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir,
                                             const SynthOptions& opts) {
  VIEWDIV_ENFORCE(opts.images >= 1 && opts.width >= 1 && opts.height >= 1, ErrorKind::InvalidInput,
                  "synthetic corpus needs at least one non-empty image");
  std::filesystem::create_directories(dir);
  Corpus corpus;
  for (int i = 0; i < opts.images; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "img_%04d", i);
    std::int64_t w = opts.width;
    std::int64_t h = opts.height;
    if (opts.vary_aspect && i % 4 == 3) h = std::max<std::int64_t>(1, w * 3 / 4);
    SynthImage s = make_synthetic_image(derive_seed(opts.seed, static_cast<std::uint64_t>(i)), w, h, name);
    const std::string file = std::string(name) + ".ppm";
    write_ppm(dir / file, s.pixels);
    s.meta.pixel_path = file;
    corpus.add(std::move(s.meta));
  }
  const auto manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::binary);
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "cannot write " + manifest.string());
  out << corpus_to_json(corpus) << '\n';
  return manifest;
}

}  // namespace viewdiv
