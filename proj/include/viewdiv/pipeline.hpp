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

#ifndef VIEWDIV_PIPELINE_HPP_
#define VIEWDIV_PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "viewdiv/pairgen.hpp"
#include "viewdiv/patches.hpp"
#include "viewdiv/transport.hpp"

namespace viewdiv {

/// A pair configuration plus the label it is reported under.
struct ConfigEntry {
  std::string label;
  PairConfig config;
};

struct EncoderSpec {
  enum class Kind { Toy, External };
  Kind kind = Kind::Toy;
  /// Embedding manifest, External only.
  std::filesystem::path manifest;
};

struct RunSpec {
  std::filesystem::path corpus_manifest;
  std::vector<ConfigEntry> configs;
  CorpusProfile profile = CorpusProfile::Coco;
  PatchStrategy strategy = PatchStrategy::grid(3);
  EncoderSpec encoder;
  SinkhornParams sinkhorn;
  Solver solver = Solver::Sinkhorn;
  std::uint64_t seed = 0;
  double data_fraction = 1.0;
  int pairs_per_image = 1;
  /// Never affects output bytes.
  int workers = 1;

  /// Throws InvalidConfig.
  void validate() const;
};

/**
 * Parses a run specification:
 *   {"corpus_manifest": path, "configs": ["Baseline", {"kind": ..., "label": ...,
 *    "scale": [s_min, s_max], "ratio": [lo, hi], "iou_fg_min": .., "iou_bg_max": ..,
 *    "max_attempts": ..}, ...], "corpus_profile": "coco"|"imagenet",
 *    "strategy": "grid2"|"grid3"|"sampled", "encoder": "toy" | {"external": path},
 *    "sinkhorn": {"lambda": .., "iterations": .., "epsilon": ..},
 *    "solver": "sinkhorn"|"exact", "seed": u64, "data_fraction": (0,1],
 *    "pairs_per_image": int, "workers": int}
 * Relative paths resolve against `base_dir`.
 */
RunSpec parse_run_spec(const std::string& json_text, const std::filesystem::path& base_dir = {});
RunSpec load_run_spec(const std::filesystem::path& path);

inline constexpr int kHistogramBins = 32;

struct ConfigStats {
  std::string label;
  ConfigKind kind = ConfigKind::Baseline;
  CropScale scale;
  std::int64_t requested = 0;
  std::int64_t count = 0;
  std::int64_t skipped = 0;
  std::map<std::string, std::int64_t> skip_reasons;
  double mean = 0.0;
  double stddev = 0.0;
  double min = 0.0;
  double max = 0.0;
  std::array<std::int64_t, kHistogramBins> histogram{};
  /// Negative scores folded into bin 0.
  std::int64_t negative_clamped = 0;
};

struct SimilarityReport {
  std::vector<ConfigStats> configs;
  std::uint64_t seed = 0;
  double data_fraction = 1.0;
  int pairs_per_image = 1;
  std::string strategy;
  std::string encoder;
  std::string solver;
  SinkhornParams sinkhorn;
  std::string corpus_manifest;
  std::size_t corpus_images = 0;
  std::size_t subset_images = 0;
  std::size_t zero_feature_rows = 0;
  std::size_t box_limit_warnings = 0;

  const ConfigStats* find(const std::string& label) const;
};

struct PairRecord {
  std::string pair_id;
  std::string config;
  std::string image_id_1;
  std::string image_id_2;
  Rect v1;
  Rect v2;
  std::string strategy;
  double score = 0.0;
};

struct PhaseTiming {
  double sample_ms = 0.0;
  double features_ms = 0.0;
  double transport_ms = 0.0;
};

struct RunTiming {
  double wall_ms = 0.0;
  double load_ms = 0.0;
  std::map<std::string, PhaseTiming> per_config;
};

struct RunResult {
  SimilarityReport report;
  std::vector<PairRecord> pairs;
  RunTiming timing;
};

/// Pairs that could not be generated for an (image, config, index) slot.
struct SkipRecord {
  std::string image_id;
  std::string config;
  int pair_index = 0;
  std::string reason;
};

/// A generated pair together with the patch geometry its scores use.
struct PlannedPair {
  std::string pair_id;
  std::string config;
  ViewPair pair;
  PatchSet patches1;
  PatchSet patches2;
};

struct SamplePlan {
  std::vector<PlannedPair> pairs;
  std::vector<SkipRecord> skipped;
};

/// Indices (ascending) of the seeded-shuffle prefix holding ceil(f * n) images.
std::vector<std::size_t> select_subset(std::size_t n, double fraction, std::uint64_t seed);

/// "<image_id>/<label>/<index>"
std::string make_pair_id(const std::string& image_id, const std::string& label, int index);

/// Pair geometry for every slot, without scoring. Matches what run() scores.
SamplePlan sample_pairs(const RunSpec& spec);
SamplePlan sample_pairs(const RunSpec& spec, const Corpus& corpus);

/// Full scoring run. Throws ManifestError / EncoderMismatch; numerical errors
/// propagate. Unsatisfiable slots are counted, not thrown.
RunResult run(const RunSpec& spec);
RunResult run(const RunSpec& spec, const Corpus& corpus);

std::string report_to_json(const SimilarityReport& report);
SimilarityReport report_from_json(const std::string& text);
std::string pairs_to_csv(const std::vector<PairRecord>& pairs);
std::string timing_to_json(const RunTiming& timing);
/// Per-config means scaled by 10 for display.
std::string plotdata_to_json(const SimilarityReport& report);
std::string sample_plan_to_json(const SamplePlan& plan, const RunSpec& spec);

/// Writes report.json, pairs.csv, plotdata.json and timing.json into `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunResult& result);

enum class RangeVerdict { Inside, Above, Below };
std::string_view to_string(RangeVerdict v);

struct RangeRule {
  double upper = 0.0;
  double lower = 0.0;
  /// label -> verdict, in report order.
  std::vector<std::pair<std::string, RangeVerdict>> verdicts;
};

/// Band between the Baseline mean (upper) and the SmallerCropZeroOverlap mean
/// (lower). Throws MissingAnchor when either anchor has no scored pairs.
RangeRule range_rule(const SimilarityReport& report);
std::string range_rule_to_json(const RangeRule& rule);

struct FractionRow {
  double fraction = 1.0;
  std::size_t images = 0;
  double wall_ms = 0.0;
  /// label -> (mean S, count)
  std::vector<std::pair<std::string, std::pair<double, std::int64_t>>> means;
};

struct FractionTable {
  std::vector<FractionRow> rows;
  /// label -> max_f |mean S(f) - mean S(1.0)|
  std::vector<std::pair<std::string, double>> stability;
  double max_stability = 0.0;
};

/// One run per fraction (descending). Fractions must lie in (0, 1].
FractionTable fraction_study(const RunSpec& spec, const std::vector<double>& fractions);
FractionTable fraction_study(const RunSpec& spec, const Corpus& corpus,
                             const std::vector<double>& fractions);
std::string fraction_table_to_json(const FractionTable& table);

}  // namespace viewdiv

#endif  // VIEWDIV_PIPELINE_HPP_
