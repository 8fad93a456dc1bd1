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

#ifndef VIEWDIV_PAIRGEN_HPP_
#define VIEWDIV_PAIRGEN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "viewdiv/geometry.hpp"
#include "viewdiv/rng.hpp"

namespace viewdiv {

enum class ConfigKind {
  Baseline,
  ZeroOverlap,
  InstanceVsBg,
  OnlyBg,
  LowerBound,
  SmallerCrop,
  LargerCrop,
  SmallerCropZeroOverlap,
};

inline constexpr std::array<ConfigKind, 8> kAllConfigKinds = {
    ConfigKind::Baseline,    ConfigKind::ZeroOverlap, ConfigKind::InstanceVsBg,
    ConfigKind::OnlyBg,      ConfigKind::LowerBound,  ConfigKind::SmallerCrop,
    ConfigKind::LargerCrop,  ConfigKind::SmallerCropZeroOverlap,
};

std::string_view to_string(ConfigKind kind);
/// Throws InvalidConfig on an unknown name.
ConfigKind parse_config_kind(std::string_view name);

/// Selects the Smaller Crop scale range: object-centric (ImageNet-like)
/// corpora use a wider range than scene (COCO-like) corpora.
enum class CorpusProfile { Coco, ImageNet };

std::string_view to_string(CorpusProfile profile);
CorpusProfile parse_corpus_profile(std::string_view name);

/// Default crop scale of a configuration kind.
CropScale default_scale(ConfigKind kind, CorpusProfile profile);

inline constexpr int kDefaultMaxAttempts = 1000;
/// IoU at or below this value counts as zero overlap.
inline constexpr double kZeroIou = 1e-12;

struct PairConfig {
  ConfigKind kind = ConfigKind::Baseline;
  CropScale scale;
  double iou_fg_min = 0.8;
  double iou_bg_max = 0.1;
  int max_attempts = kDefaultMaxAttempts;

  static PairConfig make(ConfigKind kind, CorpusProfile profile = CorpusProfile::Coco);

  /// Throws InvalidConfig when any invariant is broken.
  void validate() const;

  friend bool operator==(const PairConfig&, const PairConfig&) = default;
};

struct AnnotatedImage {
  std::string id;
  ImageExtent extent;
  std::vector<Rect> boxes;
  std::string pixel_path;
};

/// Maximum box count produced by pseudo-mask generation; larger counts are
/// accepted with a warning.
inline constexpr std::size_t kPseudoMaskBoxLimit = 3;

struct Corpus {
  std::vector<AnnotatedImage> images;
  std::unordered_map<std::string, std::size_t> index;
  /// Images with more than kPseudoMaskBoxLimit boxes.
  std::size_t box_limit_warnings = 0;
  /// Boxes clipped to their image extent on ingestion.
  std::size_t clipped_boxes = 0;

  void add(AnnotatedImage img);
  /// Throws UnknownImage.
  const AnnotatedImage& at(std::string_view id) const;
  std::size_t size() const { return images.size(); }
};

/**
 * Parses an annotation manifest:
 *   {"images":[{"id":str,"width":int,"height":int,"path":str,
 *               "boxes":[[x_min,y_min,x_max,y_max],...]}]}
 * Relative pixel paths are resolved against `base_dir`. Throws ManifestError.
 */
Corpus parse_corpus(std::string_view json_text, const std::filesystem::path& base_dir = {});
Corpus load_corpus(const std::filesystem::path& manifest);
std::string corpus_to_json(const Corpus& corpus);

struct ViewPair {
  std::pair<std::string, std::string> image_ids;
  Rect v1;
  Rect v2;
  ConfigKind config_kind = ConfigKind::Baseline;
  std::uint64_t seed = 0;

  friend bool operator==(const ViewPair&, const ViewPair&) = default;
};

/// Number of v2 candidates tried against one anchor v1 before it is redrawn.
inline constexpr int kPartnerDrawsPerAnchor = 32;

/**
 * Draws a positive pair satisfying the configuration predicate.
 *
 * v1 is drawn from the crop law until it meets its own constraints, then v2 is
 * rejection-sampled against it. For zero-overlap kinds an anchor that leaves
 * no room for a disjoint crop is redrawn at once. Every candidate rect counts
 * as one attempt;
 * after cfg.max_attempts the image is declared Unsatisfiable.
 *
 * `partner` must be non-null and distinct iff cfg.kind is LowerBound.
 */
ViewPair generate_pair(const AnnotatedImage& img, const AnnotatedImage* partner,
                       const PairConfig& cfg, std::uint64_t seed);

/// Re-evaluates the configuration predicate. Throws UnknownImage when the
/// pair's image ids do not resolve in `corpus`.
bool satisfies_config(const ViewPair& pair, const Corpus& corpus, const PairConfig& cfg);

/// Predicate on rects alone, for same-image kinds. LowerBound returns true.
bool satisfies_predicate(const Rect& v1, const Rect& v2, const std::vector<Rect>& boxes,
                         const PairConfig& cfg);

}  // namespace viewdiv

#endif  // VIEWDIV_PAIRGEN_HPP_
