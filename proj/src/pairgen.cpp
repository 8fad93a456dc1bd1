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

#include "viewdiv/pairgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "viewdiv/error.hpp"

namespace viewdiv {

using json = nlohmann::json;

std::string_view to_string(ConfigKind kind) {
  switch (kind) {
    case ConfigKind::Baseline: return "Baseline";
    case ConfigKind::ZeroOverlap: return "ZeroOverlap";
    case ConfigKind::InstanceVsBg: return "InstanceVsBg";
    case ConfigKind::OnlyBg: return "OnlyBg";
    case ConfigKind::LowerBound: return "LowerBound";
    case ConfigKind::SmallerCrop: return "SmallerCrop";
    case ConfigKind::LargerCrop: return "LargerCrop";
    case ConfigKind::SmallerCropZeroOverlap: return "SmallerCropZeroOverlap";
  }
  return "?";
}

ConfigKind parse_config_kind(std::string_view name) {
  for (ConfigKind k : kAllConfigKinds) {
    if (to_string(k) == name) return k;
  }
  throw Error(ErrorKind::InvalidConfig, "unknown config kind '" + std::string(name) + "'");
}

std::string_view to_string(CorpusProfile profile) {
  return profile == CorpusProfile::Coco ? "coco" : "imagenet";
}

CorpusProfile parse_corpus_profile(std::string_view name) {
  if (name == "coco") return CorpusProfile::Coco;
  if (name == "imagenet") return CorpusProfile::ImageNet;
  throw Error(ErrorKind::InvalidConfig, "unknown corpus profile '" + std::string(name) + "'");
}

CropScale default_scale(ConfigKind kind, CorpusProfile profile) {
  CropScale s;  // s = (0.2, 1.0), ratio [3/4, 4/3]
  switch (kind) {
    case ConfigKind::SmallerCrop:
    case ConfigKind::SmallerCropZeroOverlap:
      if (profile == CorpusProfile::Coco) {
        s.s_min = 0.08;
        s.s_max = 0.4;
      } else {
        s.s_min = 0.18;
        s.s_max = 0.9;
      }
      break;
    case ConfigKind::LargerCrop:
      s.s_min = 0.4;
      s.s_max = 1.0;
      break;
    default:
      break;
  }
  return s;
}

PairConfig PairConfig::make(ConfigKind kind, CorpusProfile profile) {
  PairConfig cfg;
  cfg.kind = kind;
  cfg.scale = default_scale(kind, profile);
  return cfg;
}

void PairConfig::validate() const {
  VIEWDIV_ENFORCE(scale.valid(), ErrorKind::InvalidConfig, "crop scale out of range");
  VIEWDIV_ENFORCE(iou_bg_max > 0.0 && iou_bg_max < iou_fg_min && iou_fg_min <= 1.0,
                  ErrorKind::InvalidConfig, "require 0 < iou_bg_max < iou_fg_min <= 1");
  VIEWDIV_ENFORCE(max_attempts >= 1, ErrorKind::InvalidConfig, "max_attempts must be positive");
}

// ---------------------------------------------------------------------------
// Corpus

void Corpus::add(AnnotatedImage img) {
  VIEWDIV_ENFORCE(!index.count(img.id), ErrorKind::ManifestError, "duplicate image id '" + img.id + "'");
  if (img.boxes.size() > kPseudoMaskBoxLimit) ++box_limit_warnings;
  index.emplace(img.id, images.size());
  images.push_back(std::move(img));
}

const AnnotatedImage& Corpus::at(std::string_view id) const {
  auto it = index.find(std::string(id));
  VIEWDIV_ENFORCE(it != index.end(), ErrorKind::UnknownImage, "image id '" + std::string(id) + "'");
  return images[it->second];
}

Corpus parse_corpus(std::string_view json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ManifestError, e.what());
  }
  VIEWDIV_ENFORCE(doc.is_object() && doc.contains("images") && doc["images"].is_array(),
                  ErrorKind::ManifestError, "expected an object with an \"images\" array");
  Corpus corpus;
  try {
    for (const auto& entry : doc["images"]) {
      AnnotatedImage img;
      img.id = entry.at("id").get<std::string>();
      img.extent.width = entry.at("width").get<std::int64_t>();
      img.extent.height = entry.at("height").get<std::int64_t>();
      VIEWDIV_ENFORCE(img.extent.width >= 1 && img.extent.height >= 1, ErrorKind::ManifestError,
                      "image '" + img.id + "' has a non-positive extent");
      std::string path = entry.value("path", std::string{});
      if (!path.empty() && !base_dir.empty() && std::filesystem::path(path).is_relative()) {
        path = (base_dir / path).string();
      }
      img.pixel_path = path;
      const Rect bounds = img.extent.bounds();
      for (const auto& b : entry.value("boxes", json::array())) {
        VIEWDIV_ENFORCE(b.is_array() && b.size() == 4, ErrorKind::ManifestError,
                        "box of image '" + img.id + "' must have 4 coordinates");
        Rect r{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        VIEWDIV_ENFORCE(r.valid(), ErrorKind::ManifestError,
                        "degenerate box " + to_string(r) + " in image '" + img.id + "'");
        if (!contains(bounds, r)) {
          r = {std::max(r.x_min, 0.0), std::max(r.y_min, 0.0), std::min(r.x_max, bounds.x_max),
               std::min(r.y_max, bounds.y_max)};
          VIEWDIV_ENFORCE(r.valid(), ErrorKind::ManifestError,
                          "box outside image '" + img.id + "'");
          ++corpus.clipped_boxes;
        }
        img.boxes.push_back(r);
      }
      corpus.add(std::move(img));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ManifestError, e.what());
  }
  VIEWDIV_ENFORCE(corpus.size() > 0, ErrorKind::ManifestError, "corpus is empty");
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& manifest) {
  std::ifstream in(manifest, std::ios::binary);
  VIEWDIV_ENFORCE(in.good(), ErrorKind::ManifestError, "cannot open " + manifest.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str(), manifest.parent_path());
}

std::string corpus_to_json(const Corpus& corpus) {
  json images = json::array();
  for (const auto& img : corpus.images) {
    json boxes = json::array();
    for (const auto& b : img.boxes) boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max});
    images.push_back({{"id", img.id},
                      {"width", img.extent.width},
                      {"height", img.extent.height},
                      {"path", img.pixel_path},
                      {"boxes", boxes}});
  }
  return json{{"images", images}}.dump(1);
}

// ---------------------------------------------------------------------------
// Predicates

namespace {

bool is_zero_overlap_kind(ConfigKind k) {
  return k == ConfigKind::ZeroOverlap || k == ConfigKind::SmallerCropZeroOverlap ||
         k == ConfigKind::InstanceVsBg || k == ConfigKind::OnlyBg;
}

bool clear_of_boxes(const Rect& v, const std::vector<Rect>& boxes, double bg_max) {
  return std::all_of(boxes.begin(), boxes.end(),
                     [&](const Rect& b) { return iou(v, b) < bg_max; });
}

/// Largest area of a rect with aspect ratio in the scale bounds that fits in
/// a w x h box.
double max_law_area(double w, double h, const CropScale& scale) {
  if (w <= 0.0 || h <= 0.0) return 0.0;
  const double r = w / h;
  if (r > scale.ratio_max) return scale.ratio_max * h * h;
  if (r < scale.ratio_min) return w * w / scale.ratio_min;
  return w * h;
}

/// A rect disjoint from v1 lies entirely in one of the four strips around it.
/// True iff one of them can hold a crop of at least s_min of the extent.
bool leaves_room(const Rect& v1, const ImageExtent& extent, const CropScale& scale) {
  const double W = static_cast<double>(extent.width);
  const double H = static_cast<double>(extent.height);
  const double need = scale.s_min * extent.area() * (1.0 - kLawTolerance);
  return max_law_area(v1.x_min, H, scale) >= need || max_law_area(W - v1.x_max, H, scale) >= need ||
         max_law_area(W, v1.y_min, scale) >= need || max_law_area(W, H - v1.y_max, scale) >= need;
}

/// Constraints that involve v1 only.
bool anchor_ok(const Rect& v1, const std::vector<Rect>& boxes, const PairConfig& cfg) {
  switch (cfg.kind) {
    case ConfigKind::InstanceVsBg:
      return std::any_of(boxes.begin(), boxes.end(),
                         [&](const Rect& b) { return iou(v1, b) > cfg.iou_fg_min; });
    case ConfigKind::OnlyBg:
      return clear_of_boxes(v1, boxes, cfg.iou_bg_max);
    default:
      return true;
  }
}

/// Constraints that involve v2, given an admissible v1.
bool partner_ok(const Rect& v1, const Rect& v2, const std::vector<Rect>& boxes,
                const PairConfig& cfg) {
  if (is_zero_overlap_kind(cfg.kind) && iou(v1, v2) > kZeroIou) return false;
  if (cfg.kind == ConfigKind::InstanceVsBg || cfg.kind == ConfigKind::OnlyBg) {
    return clear_of_boxes(v2, boxes, cfg.iou_bg_max);
  }
  return true;
}

}  // namespace

bool satisfies_predicate(const Rect& v1, const Rect& v2, const std::vector<Rect>& boxes,
                         const PairConfig& cfg) {
  if (cfg.kind == ConfigKind::LowerBound) return true;
  return anchor_ok(v1, boxes, cfg) && partner_ok(v1, v2, boxes, cfg);
}

ViewPair generate_pair(const AnnotatedImage& img, const AnnotatedImage* partner,
                       const PairConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ViewPair pair;
  pair.config_kind = cfg.kind;
  pair.seed = seed;

  if (cfg.kind == ConfigKind::LowerBound) {
    VIEWDIV_ENFORCE(partner != nullptr, ErrorKind::MissingPartner,
                    "LowerBound needs a partner image for '" + img.id + "'");
    VIEWDIV_ENFORCE(partner->id != img.id, ErrorKind::MissingPartner,
                    "partner must differ from anchor '" + img.id + "'");
    pair.image_ids = {img.id, partner->id};
    pair.v1 = sample_rrc(img.extent, cfg.scale, rng);
    pair.v2 = sample_rrc(partner->extent, cfg.scale, rng);
    return pair;
  }

  VIEWDIV_ENFORCE(cfg.kind != ConfigKind::InstanceVsBg || !img.boxes.empty(),
                  ErrorKind::NoInstances, "image '" + img.id + "' has no instance boxes");
  pair.image_ids = {img.id, img.id};

  int attempts = 0;
  while (attempts < cfg.max_attempts) {
    const Rect v1 = sample_rrc(img.extent, cfg.scale, rng);
    ++attempts;
    if (!anchor_ok(v1, img.boxes, cfg)) continue;
    if (is_zero_overlap_kind(cfg.kind) && !leaves_room(v1, img.extent, cfg.scale)) continue;
    for (int k = 0; k < kPartnerDrawsPerAnchor && attempts < cfg.max_attempts; ++k) {
      const Rect v2 = sample_rrc(img.extent, cfg.scale, rng);
      ++attempts;
      if (partner_ok(v1, v2, img.boxes, cfg)) {
        pair.v1 = v1;
        pair.v2 = v2;
        return pair;
      }
    }
  }
  throw Error(ErrorKind::Unsatisfiable, "image '" + img.id + "', " + std::string(to_string(cfg.kind)) +
                                            ", " + std::to_string(attempts) + " attempts");
}

bool satisfies_config(const ViewPair& pair, const Corpus& corpus, const PairConfig& cfg) {
  const AnnotatedImage& a = corpus.at(pair.image_ids.first);
  const AnnotatedImage& b = corpus.at(pair.image_ids.second);
  if (pair.config_kind != cfg.kind) return false;
  if (!pair.v1.valid() || !pair.v2.valid()) return false;
  if (!contains(a.extent.bounds(), pair.v1) || !contains(b.extent.bounds(), pair.v2)) return false;
  if (cfg.kind == ConfigKind::LowerBound) return a.id != b.id;
  if (a.id != b.id) return false;
  return satisfies_predicate(pair.v1, pair.v2, a.boxes, cfg);
}

}  // namespace viewdiv
