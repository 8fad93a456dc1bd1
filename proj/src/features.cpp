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

#include "viewdiv/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "viewdiv/error.hpp"

namespace viewdiv {

FeatureMap::FeatureMap(std::size_t n, std::size_t d, std::vector<double> values, bool normalized)
    : n_(n), d_(d), values_(std::move(values)), normalized_(normalized) {
  VIEWDIV_ENFORCE(n_ > 0 && d_ > 0, ErrorKind::DimMismatch,
                  "feature map needs n > 0 and d > 0, got " + std::to_string(n_) + "x" +
                      std::to_string(d_));
  VIEWDIV_ENFORCE(values_.size() == n_ * d_, ErrorKind::DimMismatch,
                  "expected " + std::to_string(n_ * d_) + " values, got " +
                      std::to_string(values_.size()));
  for (std::size_t i = 0; i < values_.size(); ++i) {
    VIEWDIV_ENFORCE(std::isfinite(values_[i]), ErrorKind::NonFiniteValue,
                    "entry (" + std::to_string(i / d_) + ", " + std::to_string(i % d_) + ")");
  }
}

bool normalize_in_place(std::span<double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm >= kZeroNorm)) {
    std::fill(v.begin(), v.end(), 0.0);
    if (!v.empty()) v[0] = 1.0;
    return false;
  }
  for (double& x : v) x /= norm;
  return true;
}

NormalizedMap normalize_rows(const FeatureMap& f) {
  std::vector<double> values(f.values().begin(), f.values().end());
  std::size_t zero_rows = 0;
  for (std::size_t i = 0; i < f.n(); ++i) {
    std::span<double> row(values.data() + i * f.d(), f.d());
    // Leave rows that are already unit length alone so the operation is
    // idempotent to the last bit.
    double sq = 0.0;
    for (double x : row) sq += x * x;
    if (sq == 1.0) continue;
    if (!normalize_in_place(row)) ++zero_rows;
  }
  return {FeatureMap(f.n(), f.d(), std::move(values), true), zero_rows};
}

// ---------------------------------------------------------------------------
// Pixels

PixelWindow rasterize(const Rect& r, std::int64_t width, std::int64_t height) {
  auto clip = [](double v, std::int64_t hi) {
    return std::clamp<std::int64_t>(static_cast<std::int64_t>(v), 0, hi);
  };
  return {clip(std::floor(r.x_min), width), clip(std::floor(r.y_min), height),
          clip(std::ceil(r.x_max), width), clip(std::ceil(r.y_max), height)};
}

PixelPatch crop_pixels(const Image& img, const Rect& r) {
  VIEWDIV_ENFORCE(img.valid(), ErrorKind::EmptyPatch, "source image is empty");
  const PixelWindow w = rasterize(r, img.width, img.height);
  VIEWDIV_ENFORCE(w.x1 > w.x0 && w.y1 > w.y0, ErrorKind::EmptyPatch,
                  "rect " + to_string(r) + " covers no pixels");
  PixelPatch out;
  out.width = w.x1 - w.x0;
  out.height = w.y1 - w.y0;
  out.data.resize(static_cast<std::size_t>(out.width * out.height * 3));
  const std::size_t row_bytes = static_cast<std::size_t>(out.width * 3);
  for (std::int64_t y = 0; y < out.height; ++y) {
    const auto* src = img.data.data() + ((w.y0 + y) * img.width + w.x0) * 3;
    std::memcpy(out.data.data() + static_cast<std::size_t>(y) * row_bytes, src, row_bytes);
  }
  return out;
}

namespace {

// Skips whitespace and '#' comments in a PPM header.
void skip_header_space(std::istream& in) {
  while (true) {
    int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

}  // namespace

Image read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  VIEWDIV_ENFORCE(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  VIEWDIV_ENFORCE(magic == "P6", ErrorKind::IoError, path.string() + " is not a binary PPM");
  std::int64_t dims[3] = {0, 0, 0};
  for (auto& v : dims) {
    skip_header_space(in);
    in >> v;
  }
  VIEWDIV_ENFORCE(in.good() && dims[0] > 0 && dims[1] > 0 && dims[2] == 255, ErrorKind::IoError,
                  path.string() + ": unsupported PPM header");
  in.get();  // single whitespace before the raster
  Image img;
  img.width = dims[0];
  img.height = dims[1];
  img.data.resize(static_cast<std::size_t>(img.width * img.height * 3));
  in.read(reinterpret_cast<char*>(img.data.data()), static_cast<std::streamsize>(img.data.size()));
  VIEWDIV_ENFORCE(in.gcount() == static_cast<std::streamsize>(img.data.size()), ErrorKind::IoError,
                  path.string() + ": truncated raster");
  return img;
}

void write_ppm(const std::filesystem::path& path, const Image& img) {
  VIEWDIV_ENFORCE(img.valid(), ErrorKind::IoError, "refusing to write an empty image");
  std::ofstream out(path, std::ios::binary);
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data.data()),
            static_cast<std::streamsize>(img.data.size()));
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Toy encoder

namespace {

/// overlap[i * G + g]: length of pixel i ([G*i, G*i+G)) inside cell g
/// ([g*n, (g+1)*n)) on the lattice scaled by G.
std::vector<std::int64_t> overlaps(std::int64_t n) {
  constexpr std::int64_t G = kToyGrid;
  std::vector<std::int64_t> out(static_cast<std::size_t>(n * G), 0);
  for (std::int64_t i = 0; i < n; ++i) {
    for (std::int64_t g = 0; g < G; ++g) {
      const std::int64_t lo = std::max(G * i, g * n);
      const std::int64_t hi = std::min(G * i + G, (g + 1) * n);
      if (hi > lo) out[static_cast<std::size_t>(i * G + g)] = hi - lo;
    }
  }
  return out;
}

}  // namespace

std::vector<double> toy_pool(const PixelPatch& patch) {
  VIEWDIV_ENFORCE(patch.valid(), ErrorKind::EmptyPatch, "patch has no pixels");
  constexpr std::int64_t G = kToyGrid;
  const std::int64_t W = patch.width;
  const std::int64_t H = patch.height;
  const auto ox = overlaps(W);
  const auto oy = overlaps(H);

  std::vector<std::int64_t> sums(kToyDim, 0);
  std::vector<std::int64_t> row(static_cast<std::size_t>(G * 3));
  for (std::int64_t y = 0; y < H; ++y) {
    std::fill(row.begin(), row.end(), 0);
    for (std::int64_t x = 0; x < W; ++x) {
      for (std::int64_t gx = 0; gx < G; ++gx) {
        const std::int64_t wx = ox[static_cast<std::size_t>(x * G + gx)];
        if (wx == 0) continue;
        for (int c = 0; c < 3; ++c) row[static_cast<std::size_t>(gx * 3 + c)] += wx * patch.at(x, y, c);
      }
    }
    for (std::int64_t gy = 0; gy < G; ++gy) {
      const std::int64_t wy = oy[static_cast<std::size_t>(y * G + gy)];
      if (wy == 0) continue;
      for (std::int64_t gx = 0; gx < G; ++gx) {
        for (int c = 0; c < 3; ++c) {
          sums[static_cast<std::size_t>(c * G * G + gy * G + gx)] +=
              wy * row[static_cast<std::size_t>(gx * 3 + c)];
        }
      }
    }
  }
  // Each cell spans W x H lattice units.
  const double cell_area = static_cast<double>(W) * static_cast<double>(H);
  std::vector<double> out(kToyDim);
  for (std::size_t i = 0; i < kToyDim; ++i) out[i] = static_cast<double>(sums[i]) / cell_area / 255.0;
  return out;
}

std::vector<double> toy_encode(const PixelPatch& patch) {
  std::vector<double> v = toy_pool(patch);
  normalize_in_place(v);
  return v;
}

// ---------------------------------------------------------------------------
// FEMB

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

constexpr std::size_t kHeaderBytes = 16;

}  // namespace

std::vector<std::uint8_t> encode_embeddings(const FeatureMap& f) {
  std::vector<std::uint8_t> out;
  out.reserve(kHeaderBytes + f.values().size() * 4);
  for (char c : {'F', 'E', 'M', 'B'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kFembVersion);
  put_u32(out, static_cast<std::uint32_t>(f.n()));
  put_u32(out, static_cast<std::uint32_t>(f.d()));
  for (double v : f.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

void write_embeddings(const std::filesystem::path& path, const FeatureMap& f) {
  const auto bytes = encode_embeddings(f);
  std::ofstream out(path, std::ios::binary);
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "write failed for " + path.string());
}

FeatureMap decode_embeddings(std::span<const std::uint8_t> bytes, bool renormalize) {
  VIEWDIV_ENFORCE(bytes.size() >= 4 && std::memcmp(bytes.data(), "FEMB", 4) == 0,
                  ErrorKind::BadMagic, "missing FEMB magic");
  VIEWDIV_ENFORCE(bytes.size() >= kHeaderBytes, ErrorKind::TruncatedFile, "header cut short");
  const std::uint32_t version = get_u32(bytes, 4);
  VIEWDIV_ENFORCE(version == kFembVersion, ErrorKind::BadMagic,
                  "unsupported FEMB version " + std::to_string(version));
  const std::uint64_t n = get_u32(bytes, 8);
  const std::uint64_t d = get_u32(bytes, 12);
  VIEWDIV_ENFORCE(n > 0 && d > 0, ErrorKind::DimMismatch,
                  "header claims " + std::to_string(n) + "x" + std::to_string(d));
  const std::uint64_t payload = bytes.size() - kHeaderBytes;
  VIEWDIV_ENFORCE(payload >= n * d * 4, ErrorKind::TruncatedFile,
                  "payload has " + std::to_string(payload / 4) + " floats, header needs " +
                      std::to_string(n * d));
  VIEWDIV_ENFORCE(payload == n * d * 4, ErrorKind::DimMismatch, "trailing bytes after payload");
  std::vector<double> values(n * d);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, kHeaderBytes + 4 * i)));
  }
  FeatureMap f(n, d, std::move(values));
  if (renormalize) return normalize_rows(f).map;
  return f;
}

FeatureMap load_embeddings(const std::filesystem::path& path, bool renormalize) {
  std::ifstream in(path, std::ios::binary);
  VIEWDIV_ENFORCE(in.good(), ErrorKind::IoError, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_embeddings(bytes, renormalize);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

EmbeddingManifest load_embedding_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  VIEWDIV_ENFORCE(in.good(), ErrorKind::ManifestError, "cannot open " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ManifestError, path.string() + ": " + e.what());
  }
  VIEWDIV_ENFORCE(doc.is_object(), ErrorKind::ManifestError, "embedding manifest must be an object");
  const auto base = path.parent_path();
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return fp.is_relative() ? base / fp : fp;
  };
  EmbeddingManifest out;
  try {
    for (const auto& [pair_id, entry] : doc.items()) {
      out[pair_id] = {resolve(entry.at("view1").get<std::string>()),
                      resolve(entry.at("view2").get<std::string>()),
                      entry.at("strategy").get<std::string>()};
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ManifestError, path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace viewdiv
