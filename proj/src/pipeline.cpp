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

#include "viewdiv/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "viewdiv/error.hpp"
#include "viewdiv/features.hpp"
#include "viewdiv/rng.hpp"

namespace viewdiv {

using json = nlohmann::json;

namespace {

constexpr std::uint64_t kSubsetStream = fnv1a64("subset");
constexpr std::uint64_t kPartnerStream = fnv1a64("partner");
constexpr std::uint64_t kPatchStream = fnv1a64("patches");

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::string read_text(const std::filesystem::path& path, ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  VIEWDIV_ENFORCE(in.good(), kind, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "cannot write " + path.string());
  out << text;
  VIEWDIV_ENFORCE(out.good(), ErrorKind::IoError, "write failed for " + path.string());
}

std::string fmt_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json rect_json(const Rect& r) { return json::array({r.x_min, r.y_min, r.x_max, r.y_max}); }

}  // namespace

// ---------------------------------------------------------------------------
// RunSpec

void RunSpec::validate() const {
  VIEWDIV_ENFORCE(!configs.empty(), ErrorKind::InvalidConfig, "configs must be non-empty");
  std::set<std::string> labels;
  for (const auto& c : configs) {
    c.config.validate();
    VIEWDIV_ENFORCE(!c.label.empty() && labels.insert(c.label).second, ErrorKind::InvalidConfig,
                    "config labels must be unique and non-empty ('" + c.label + "')");
  }
  VIEWDIV_ENFORCE(data_fraction > 0.0 && data_fraction <= 1.0, ErrorKind::InvalidConfig,
                  "data_fraction must lie in (0, 1]");
  VIEWDIV_ENFORCE(pairs_per_image >= 1, ErrorKind::InvalidConfig, "pairs_per_image must be >= 1");
  VIEWDIV_ENFORCE(workers >= 1, ErrorKind::InvalidConfig, "workers must be >= 1");
  VIEWDIV_ENFORCE(strategy.patch_count() >= 1, ErrorKind::BadFactor, "empty patch strategy");
  sinkhorn.validate();
}

RunSpec parse_run_spec(const std::string& json_text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  VIEWDIV_ENFORCE(doc.is_object(), ErrorKind::InvalidConfig, "run spec must be a JSON object");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path fp(p);
    return (fp.is_relative() && !base_dir.empty()) ? base_dir / fp : fp;
  };

  RunSpec spec;
  try {
    spec.corpus_manifest = resolve(doc.at("corpus_manifest").get<std::string>());
    spec.profile = parse_corpus_profile(doc.value("corpus_profile", std::string("coco")));
    spec.strategy = parse_patch_strategy(doc.value("strategy", std::string("grid3")),
                                         doc.value("allow_any_grid_factor", false));
    if (doc.contains("encoder")) {
      const auto& e = doc["encoder"];
      if (e.is_string()) {
        VIEWDIV_ENFORCE(e.get<std::string>() == "toy", ErrorKind::InvalidConfig,
                        "encoder must be \"toy\" or {\"external\": path}");
      } else {
        spec.encoder.kind = EncoderSpec::Kind::External;
        spec.encoder.manifest = resolve(e.at("external").get<std::string>());
      }
    }
    if (doc.contains("sinkhorn")) {
      const auto& s = doc["sinkhorn"];
      spec.sinkhorn.lambda = s.value("lambda", spec.sinkhorn.lambda);
      spec.sinkhorn.iterations = s.value("iterations", spec.sinkhorn.iterations);
      spec.sinkhorn.epsilon = s.value("epsilon", spec.sinkhorn.epsilon);
    }
    spec.solver = parse_solver(doc.value("solver", std::string("sinkhorn")));
    spec.seed = doc.value("seed", std::uint64_t{0});
    spec.data_fraction = doc.value("data_fraction", 1.0);
    spec.pairs_per_image = doc.value("pairs_per_image", 1);
    spec.workers = doc.value("workers", 1);

    const json configs = doc.value("configs", json::array());
    for (const auto& c : configs) {
      ConfigEntry entry;
      if (c.is_string()) {
        entry.config = PairConfig::make(parse_config_kind(c.get<std::string>()), spec.profile);
        entry.label = c.get<std::string>();
      } else {
        const auto kind = parse_config_kind(c.at("kind").get<std::string>());
        entry.config = PairConfig::make(kind, spec.profile);
        entry.label = c.value("label", std::string(to_string(kind)));
        if (c.contains("scale")) {
          entry.config.scale.s_min = c["scale"].at(0).get<double>();
          entry.config.scale.s_max = c["scale"].at(1).get<double>();
        }
        if (c.contains("ratio")) {
          entry.config.scale.ratio_min = c["ratio"].at(0).get<double>();
          entry.config.scale.ratio_max = c["ratio"].at(1).get<double>();
        }
        entry.config.iou_fg_min = c.value("iou_fg_min", entry.config.iou_fg_min);
        entry.config.iou_bg_max = c.value("iou_bg_max", entry.config.iou_bg_max);
        entry.config.max_attempts = c.value("max_attempts", entry.config.max_attempts);
      }
      spec.configs.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, e.what());
  }
  spec.validate();
  return spec;
}

RunSpec load_run_spec(const std::filesystem::path& path) {
  return parse_run_spec(read_text(path, ErrorKind::InvalidConfig), path.parent_path());
}

// ---------------------------------------------------------------------------
// Sampling

std::vector<std::size_t> select_subset(std::size_t n, double fraction, std::uint64_t seed) {
  VIEWDIV_ENFORCE(fraction > 0.0 && fraction <= 1.0, ErrorKind::InvalidConfig,
                  "fraction must lie in (0, 1]");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, kSubsetStream));
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(order[i - 1], order[j]);
  }
  auto keep = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  keep = std::clamp<std::size_t>(keep, n == 0 ? 0 : 1, n);
  order.resize(keep);
  std::sort(order.begin(), order.end());
  return order;
}

std::string make_pair_id(const std::string& image_id, const std::string& label, int index) {
  return image_id + "/" + label + "/" + std::to_string(index);
}

namespace {

struct Context {
  const RunSpec& spec;
  const Corpus& corpus;
  std::vector<std::size_t> subset;
};

std::uint64_t pair_seed(const RunSpec& spec, const std::string& image_id, const std::string& label,
                        int index) {
  const std::uint64_t image_seed = derive_seed(spec.seed, fnv1a64(image_id));
  const std::uint64_t config_seed = derive_seed(image_seed, fnv1a64(label));
  return derive_seed(config_seed, static_cast<std::uint64_t>(index));
}

/// Generates the pair and its patches for one slot; returns the skip reason
/// on failure.
std::optional<std::string> plan_slot(const Context& ctx, std::size_t pos, std::size_t cfg_idx,
                                     int index, PlannedPair& out) {
  const AnnotatedImage& img = ctx.corpus.images[ctx.subset[pos]];
  const ConfigEntry& entry = ctx.spec.configs[cfg_idx];
  const std::uint64_t seed = pair_seed(ctx.spec, img.id, entry.label, index);

  const AnnotatedImage* partner = nullptr;
  if (entry.config.kind == ConfigKind::LowerBound) {
    if (ctx.subset.size() < 2) return std::string(to_string(ErrorKind::MissingPartner));
    Rng prng(derive_seed(seed, kPartnerStream));
    std::size_t k = static_cast<std::size_t>(prng.below(ctx.subset.size() - 1));
    if (k >= pos) ++k;
    partner = &ctx.corpus.images[ctx.subset[k]];
  }

  try {
    out.pair = generate_pair(img, partner, entry.config, seed);
  } catch (const Error& e) {
    switch (e.kind()) {
      case ErrorKind::Unsatisfiable:
      case ErrorKind::MissingPartner:
      case ErrorKind::NoInstances:
        return std::string(to_string(e.kind()));
      default:
        throw;
    }
  }
  out.pair_id = make_pair_id(img.id, entry.label, index);
  out.config = entry.label;
  Rng patch_rng(derive_seed(seed, kPatchStream));
  out.patches1 = make_patches(out.pair.v1, ctx.spec.strategy, patch_rng);
  out.patches2 = make_patches(out.pair.v2, ctx.spec.strategy, patch_rng);
  return std::nullopt;
}

Context make_context(const RunSpec& spec, const Corpus& corpus) {
  spec.validate();
  VIEWDIV_ENFORCE(corpus.size() > 0, ErrorKind::ManifestError, "corpus is empty");
  Context ctx{spec, corpus, select_subset(corpus.size(), spec.data_fraction, spec.seed)};
  VIEWDIV_ENFORCE(!ctx.subset.empty(), ErrorKind::ManifestError, "fraction subset is empty");
  return ctx;
}

/// Runs fn(pos) for every subset position on `workers` threads. The first
/// exception by position is rethrown after all threads finish.
template <typename Fn>
void parallel_over(std::size_t count, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t pos = next++; pos < count; pos = next++) {
      try {
        fn(pos);
      } catch (...) {
        errors[pos] = std::current_exception();
      }
    }
  };
  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(1, workers)), std::max<std::size_t>(count, 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SamplePlan sample_pairs(const RunSpec& spec, const Corpus& corpus) {
  const Context ctx = make_context(spec, corpus);
  const std::size_t n_cfg = spec.configs.size();
  const auto per_image = n_cfg * static_cast<std::size_t>(spec.pairs_per_image);
  std::vector<PlannedPair> planned(ctx.subset.size() * per_image);
  std::vector<std::optional<std::string>> skipped(planned.size());

  parallel_over(ctx.subset.size(), spec.workers, [&](std::size_t pos) {
    for (std::size_t c = 0; c < n_cfg; ++c) {
      for (int p = 0; p < spec.pairs_per_image; ++p) {
        const std::size_t slot = pos * per_image + c * spec.pairs_per_image + p;
        skipped[slot] = plan_slot(ctx, pos, c, p, planned[slot]);
      }
    }
  });

  SamplePlan plan;
  for (std::size_t slot = 0; slot < planned.size(); ++slot) {
    if (skipped[slot]) {
      const std::size_t pos = slot / per_image;
      const std::size_t c = (slot % per_image) / spec.pairs_per_image;
      plan.skipped.push_back({corpus.images[ctx.subset[pos]].id, spec.configs[c].label,
                              static_cast<int>(slot % spec.pairs_per_image), *skipped[slot]});
    } else {
      plan.pairs.push_back(std::move(planned[slot]));
    }
  }
  return plan;
}

SamplePlan sample_pairs(const RunSpec& spec) { return sample_pairs(spec, load_corpus(spec.corpus_manifest)); }

// ---------------------------------------------------------------------------
// Scoring

namespace {

struct SlotResult {
  std::optional<std::string> skip;
  PlannedPair planned;
  double score = 0.0;
  PhaseTiming timing;
  std::size_t zero_rows = 0;
};

Image load_pixels(const AnnotatedImage& img) {
  VIEWDIV_ENFORCE(!img.pixel_path.empty(), ErrorKind::ManifestError,
                  "image '" + img.id + "' has no pixel path");
  Image px;
  try {
    px = read_ppm(img.pixel_path);
  } catch (const Error& e) {
    throw Error(ErrorKind::ManifestError, e.what());
  }
  VIEWDIV_ENFORCE(px.width == img.extent.width && px.height == img.extent.height,
                  ErrorKind::ManifestError, "image '" + img.id + "' size differs from its manifest entry");
  return px;
}

FeatureMap toy_features(const Image& pixels, const PatchSet& set, std::size_t& zero_rows) {
  std::vector<double> values;
  values.reserve(set.patches.size() * kToyDim);
  for (const Rect& r : set.in_image_coords()) {
    std::vector<double> v = toy_pool(crop_pixels(pixels, r));
    if (!normalize_in_place(v)) ++zero_rows;
    values.insert(values.end(), v.begin(), v.end());
  }
  return FeatureMap(set.patches.size(), kToyDim, std::move(values), true);
}

}  // namespace

RunResult run(const RunSpec& spec, const Corpus& corpus) {
  const auto wall_start = Clock::now();
  const Context ctx = make_context(spec, corpus);
  const std::size_t n_cfg = spec.configs.size();
  const auto per_image = n_cfg * static_cast<std::size_t>(spec.pairs_per_image);
  const std::string strategy_name = to_string(spec.strategy);
  const bool toy = spec.encoder.kind == EncoderSpec::Kind::Toy;

  EmbeddingManifest embeddings;
  if (!toy) embeddings = load_embedding_manifest(spec.encoder.manifest);

  std::vector<SlotResult> slots(ctx.subset.size() * per_image);
  std::vector<double> load_ms(ctx.subset.size(), 0.0);

  parallel_over(ctx.subset.size(), spec.workers, [&](std::size_t pos) {
    const AnnotatedImage& img = corpus.images[ctx.subset[pos]];
    Image pixels;
    if (toy) {
      const auto t0 = Clock::now();
      pixels = load_pixels(img);
      load_ms[pos] = elapsed_ms(t0);
    }
    for (std::size_t c = 0; c < n_cfg; ++c) {
      for (int p = 0; p < spec.pairs_per_image; ++p) {
        SlotResult& slot = slots[pos * per_image + c * spec.pairs_per_image + p];
        auto t0 = Clock::now();
        slot.skip = plan_slot(ctx, pos, c, p, slot.planned);
        slot.timing.sample_ms = elapsed_ms(t0);
        if (slot.skip) continue;

        t0 = Clock::now();
        FeatureMap x, y;
        if (toy) {
          x = toy_features(pixels, slot.planned.patches1, slot.zero_rows);
          if (slot.planned.pair.image_ids.second == img.id) {
            y = toy_features(pixels, slot.planned.patches2, slot.zero_rows);
          } else {
            const Image partner = load_pixels(corpus.at(slot.planned.pair.image_ids.second));
            y = toy_features(partner, slot.planned.patches2, slot.zero_rows);
          }
        } else {
          auto it = embeddings.find(slot.planned.pair_id);
          VIEWDIV_ENFORCE(it != embeddings.end(), ErrorKind::EncoderMismatch,
                          "no embeddings for pair '" + slot.planned.pair_id + "'");
          VIEWDIV_ENFORCE(it->second.strategy == strategy_name, ErrorKind::EncoderMismatch,
                          "pair '" + slot.planned.pair_id + "' was extracted with strategy '" +
                              it->second.strategy + "', run uses '" + strategy_name + "'");
          x = load_embeddings(it->second.view1);
          y = load_embeddings(it->second.view2);
          const auto expect = static_cast<std::size_t>(spec.strategy.patch_count());
          VIEWDIV_ENFORCE(x.n() == expect && y.n() == expect, ErrorKind::EncoderMismatch,
                          "pair '" + slot.planned.pair_id + "' embeddings do not have " +
                              std::to_string(expect) + " rows");
          for (const auto* f : {&x, &y}) {
            for (std::size_t i = 0; i < f->n(); ++i) {
              double sq = 0.0;
              for (double v : f->row(i)) sq += v * v;
              if (std::sqrt(sq) < kZeroNorm) ++slot.zero_rows;
            }
          }
        }
        slot.timing.features_ms = elapsed_ms(t0);

        t0 = Clock::now();
        slot.score = similarity(x, y, spec.sinkhorn, spec.solver);
        slot.timing.transport_ms = elapsed_ms(t0);
      }
    }
  });

  RunResult result;
  SimilarityReport& report = result.report;
  report.seed = spec.seed;
  report.data_fraction = spec.data_fraction;
  report.pairs_per_image = spec.pairs_per_image;
  report.strategy = strategy_name;
  report.encoder = toy ? "toy" : "external";
  report.solver = std::string(to_string(spec.solver));
  report.sinkhorn = spec.sinkhorn;
  report.corpus_manifest = spec.corpus_manifest.string();
  report.corpus_images = corpus.size();
  report.subset_images = ctx.subset.size();
  report.box_limit_warnings = corpus.box_limit_warnings;

  for (std::size_t c = 0; c < n_cfg; ++c) {
    ConfigStats st;
    st.label = spec.configs[c].label;
    st.kind = spec.configs[c].config.kind;
    st.scale = spec.configs[c].config.scale;
    std::vector<double> scores;
    PhaseTiming& pt = result.timing.per_config[st.label];
    for (std::size_t pos = 0; pos < ctx.subset.size(); ++pos) {
      for (int p = 0; p < spec.pairs_per_image; ++p) {
        const SlotResult& slot = slots[pos * per_image + c * spec.pairs_per_image + p];
        ++st.requested;
        pt.sample_ms += slot.timing.sample_ms;
        pt.features_ms += slot.timing.features_ms;
        pt.transport_ms += slot.timing.transport_ms;
        if (slot.skip) {
          ++st.skipped;
          ++st.skip_reasons[*slot.skip];
          continue;
        }
        scores.push_back(slot.score);
        report.zero_feature_rows += slot.zero_rows;
      }
    }
    st.count = static_cast<std::int64_t>(scores.size());
    if (!scores.empty()) {
      double sum = 0.0;
      for (double s : scores) sum += s;
      st.mean = sum / static_cast<double>(scores.size());
      double ss = 0.0;
      for (double s : scores) ss += (s - st.mean) * (s - st.mean);
      st.stddev = std::sqrt(ss / static_cast<double>(scores.size()));
      st.min = *std::min_element(scores.begin(), scores.end());
      st.max = *std::max_element(scores.begin(), scores.end());
      for (double s : scores) {
        int bin = 0;
        if (s < 0.0) {
          ++st.negative_clamped;
        } else {
          bin = std::min(kHistogramBins - 1, static_cast<int>(std::floor(s * kHistogramBins)));
        }
        ++st.histogram[static_cast<std::size_t>(bin)];
      }
    }
    report.configs.push_back(std::move(st));
  }

  // Pair records: image-major, then config, then index.
  for (const SlotResult& slot : slots) {
    if (slot.skip) continue;
    const auto& pl = slot.planned;
    result.pairs.push_back({pl.pair_id, pl.config, pl.pair.image_ids.first, pl.pair.image_ids.second,
                            pl.pair.v1, pl.pair.v2, strategy_name, slot.score});
  }

  result.timing.load_ms = std::accumulate(load_ms.begin(), load_ms.end(), 0.0);
  result.timing.wall_ms = elapsed_ms(wall_start);
  return result;
}

RunResult run(const RunSpec& spec) { return run(spec, load_corpus(spec.corpus_manifest)); }

// ---------------------------------------------------------------------------
// Serialization

const ConfigStats* SimilarityReport::find(const std::string& label) const {
  for (const auto& c : configs)
    if (c.label == label) return &c;
  return nullptr;
}

std::string report_to_json(const SimilarityReport& r) {
  json configs = json::array();
  for (const auto& c : r.configs) {
    json reasons = json::object();
    for (const auto& [k, v] : c.skip_reasons) reasons[k] = v;
    json entry = {{"config", c.label},
                  {"kind", std::string(to_string(c.kind))},
                  {"scale", {c.scale.s_min, c.scale.s_max}},
                  {"ratio", {c.scale.ratio_min, c.scale.ratio_max}},
                  {"requested", c.requested},
                  {"count", c.count},
                  {"skipped", c.skipped},
                  {"skip_reasons", reasons},
                  {"histogram", c.histogram},
                  {"negative_clamped", c.negative_clamped}};
    if (c.count > 0) {
      entry["mean"] = c.mean;
      entry["std"] = c.stddev;
      entry["min"] = c.min;
      entry["max"] = c.max;
    } else {
      entry["mean"] = nullptr;
      entry["std"] = nullptr;
      entry["min"] = nullptr;
      entry["max"] = nullptr;
    }
    configs.push_back(std::move(entry));
  }
  json doc = {
      {"metadata",
       {{"seed", r.seed},
        {"data_fraction", r.data_fraction},
        {"pairs_per_image", r.pairs_per_image},
        {"strategy", r.strategy},
        {"encoder", r.encoder},
        {"solver", r.solver},
        {"sinkhorn",
         {{"lambda", r.sinkhorn.lambda},
          {"iterations", r.sinkhorn.iterations},
          {"epsilon", r.sinkhorn.epsilon}}},
        {"corpus_manifest", r.corpus_manifest},
        {"corpus_images", r.corpus_images},
        {"subset_images", r.subset_images}}},
      {"warnings",
       {{"zero_feature_rows", r.zero_feature_rows}, {"box_limit", r.box_limit_warnings}}},
      {"configs", configs}};
  return doc.dump(2) + "\n";
}

SimilarityReport report_from_json(const std::string& text) {
  SimilarityReport r;
  try {
    const json doc = json::parse(text);
    const auto& md = doc.at("metadata");
    r.seed = md.at("seed").get<std::uint64_t>();
    r.data_fraction = md.at("data_fraction").get<double>();
    r.pairs_per_image = md.at("pairs_per_image").get<int>();
    r.strategy = md.at("strategy").get<std::string>();
    r.encoder = md.at("encoder").get<std::string>();
    r.solver = md.at("solver").get<std::string>();
    r.sinkhorn.lambda = md.at("sinkhorn").at("lambda").get<double>();
    r.sinkhorn.iterations = md.at("sinkhorn").at("iterations").get<int>();
    r.sinkhorn.epsilon = md.at("sinkhorn").at("epsilon").get<double>();
    r.corpus_manifest = md.at("corpus_manifest").get<std::string>();
    r.corpus_images = md.at("corpus_images").get<std::size_t>();
    r.subset_images = md.at("subset_images").get<std::size_t>();
    if (doc.contains("warnings")) {
      r.zero_feature_rows = doc["warnings"].value("zero_feature_rows", std::size_t{0});
      r.box_limit_warnings = doc["warnings"].value("box_limit", std::size_t{0});
    }
    for (const auto& c : doc.at("configs")) {
      ConfigStats st;
      st.label = c.at("config").get<std::string>();
      st.kind = parse_config_kind(c.at("kind").get<std::string>());
      st.scale.s_min = c.at("scale").at(0).get<double>();
      st.scale.s_max = c.at("scale").at(1).get<double>();
      st.scale.ratio_min = c.at("ratio").at(0).get<double>();
      st.scale.ratio_max = c.at("ratio").at(1).get<double>();
      st.requested = c.at("requested").get<std::int64_t>();
      st.count = c.at("count").get<std::int64_t>();
      st.skipped = c.at("skipped").get<std::int64_t>();
      for (const auto& [k, v] : c.at("skip_reasons").items()) st.skip_reasons[k] = v.get<std::int64_t>();
      st.histogram = c.at("histogram").get<std::array<std::int64_t, kHistogramBins>>();
      st.negative_clamped = c.value("negative_clamped", std::int64_t{0});
      if (st.count > 0) {
        st.mean = c.at("mean").get<double>();
        st.stddev = c.at("std").get<double>();
        st.min = c.at("min").get<double>();
        st.max = c.at("max").get<double>();
      }
      r.configs.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, std::string("malformed report: ") + e.what());
  }
  return r;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string pairs_to_csv(const std::vector<PairRecord>& pairs) {
  std::string out =
      "pair_id,config,image_id_1,image_id_2,v1_x_min,v1_y_min,v1_x_max,v1_y_max,"
      "v2_x_min,v2_y_min,v2_x_max,v2_y_max,strategy,S\n";
  for (const auto& p : pairs) {
    out += csv_field(p.pair_id) + ',' + csv_field(p.config) + ',' + csv_field(p.image_id_1) + ',' +
           csv_field(p.image_id_2);
    for (const Rect* r : {&p.v1, &p.v2}) {
      for (double v : {r->x_min, r->y_min, r->x_max, r->y_max}) out += ',' + fmt_real(v);
    }
    out += ',' + csv_field(p.strategy) + ',' + fmt_real(p.score) + '\n';
  }
  return out;
}

std::string timing_to_json(const RunTiming& t) {
  json per = json::object();
  for (const auto& [label, pt] : t.per_config) {
    per[label] = {{"sample_ms", pt.sample_ms},
                  {"features_ms", pt.features_ms},
                  {"transport_ms", pt.transport_ms},
                  {"total_ms", pt.sample_ms + pt.features_ms + pt.transport_ms}};
  }
  return json{{"wall_ms", t.wall_ms}, {"load_ms", t.load_ms}, {"per_config", per}}.dump(2) + "\n";
}

std::string plotdata_to_json(const SimilarityReport& report) {
  constexpr double kDisplayScale = 10.0;
  json series = json::array();
  for (const auto& c : report.configs) {
    if (c.count == 0) {
      series.push_back({{"config", c.label}, {"emd_x10", nullptr}, {"std_x10", nullptr}, {"count", 0}});
      continue;
    }
    series.push_back({{"config", c.label},
                      {"emd_x10", c.mean * kDisplayScale},
                      {"std_x10", c.stddev * kDisplayScale},
                      {"count", c.count}});
  }
  json doc = {{"display_scale", kDisplayScale}, {"strategy", report.strategy}, {"series", series}};
  try {
    const RangeRule rule = range_rule(report);
    doc["band_x10"] = {rule.lower * kDisplayScale, rule.upper * kDisplayScale};
  } catch (const Error&) {
    doc["band_x10"] = nullptr;
  }
  return doc.dump(2) + "\n";
}

std::string sample_plan_to_json(const SamplePlan& plan, const RunSpec& spec) {
  json pairs = json::array();
  for (const auto& p : plan.pairs) {
    json v1 = json::array(), v2 = json::array();
    for (const Rect& r : p.patches1.in_image_coords()) v1.push_back(rect_json(r));
    for (const Rect& r : p.patches2.in_image_coords()) v2.push_back(rect_json(r));
    pairs.push_back({{"pair_id", p.pair_id},
                     {"config", p.config},
                     {"kind", std::string(to_string(p.pair.config_kind))},
                     {"image_id_1", p.pair.image_ids.first},
                     {"image_id_2", p.pair.image_ids.second},
                     {"v1", rect_json(p.pair.v1)},
                     {"v2", rect_json(p.pair.v2)},
                     {"seed", p.pair.seed},
                     {"patches", {{"view1", v1}, {"view2", v2}}}});
  }
  json skipped = json::array();
  for (const auto& s : plan.skipped) {
    skipped.push_back({{"image_id", s.image_id}, {"config", s.config}, {"pair_index", s.pair_index},
                       {"reason", s.reason}});
  }
  return json{{"strategy", to_string(spec.strategy)},
              {"target_side", spec.strategy.target_side},
              {"seed", spec.seed},
              {"pairs", pairs},
              {"skipped", skipped}}
             .dump(2) +
         "\n";
}

void write_run_outputs(const std::filesystem::path& dir, const RunResult& result) {
  std::filesystem::create_directories(dir);
  write_text(dir / "report.json", report_to_json(result.report));
  write_text(dir / "pairs.csv", pairs_to_csv(result.pairs));
  write_text(dir / "plotdata.json", plotdata_to_json(result.report));
  write_text(dir / "timing.json", timing_to_json(result.timing));
}

// ---------------------------------------------------------------------------
// Range rule

std::string_view to_string(RangeVerdict v) {
  switch (v) {
    case RangeVerdict::Inside: return "inside";
    case RangeVerdict::Above: return "above";
    case RangeVerdict::Below: return "below";
  }
  return "?";
}

RangeRule range_rule(const SimilarityReport& report) {
  const ConfigStats* upper = nullptr;
  const ConfigStats* lower = nullptr;
  for (const auto& c : report.configs) {
    if (c.kind == ConfigKind::Baseline && !upper) upper = &c;
    if (c.kind == ConfigKind::SmallerCropZeroOverlap && !lower) lower = &c;
  }
  VIEWDIV_ENFORCE(upper && upper->count > 0, ErrorKind::MissingAnchor,
                  "report has no scored Baseline pairs");
  VIEWDIV_ENFORCE(lower && lower->count > 0, ErrorKind::MissingAnchor,
                  "report has no scored SmallerCropZeroOverlap pairs");
  RangeRule rule;
  rule.upper = upper->mean;
  rule.lower = lower->mean;
  const double lo = std::min(rule.lower, rule.upper);
  const double hi = std::max(rule.lower, rule.upper);
  for (const auto& c : report.configs) {
    if (c.count == 0) continue;
    RangeVerdict v = RangeVerdict::Inside;
    if (c.mean > hi) v = RangeVerdict::Above;
    else if (c.mean < lo) v = RangeVerdict::Below;
    rule.verdicts.emplace_back(c.label, v);
  }
  return rule;
}

std::string range_rule_to_json(const RangeRule& rule) {
  json verdicts = json::array();
  for (const auto& [label, v] : rule.verdicts) {
    std::string note;
    if (v == RangeVerdict::Above) note = "excessive redundancy";
    if (v == RangeVerdict::Below) note = "excessive diversity";
    verdicts.push_back({{"config", label}, {"verdict", std::string(to_string(v))}, {"note", note}});
  }
  return json{{"upper", rule.upper}, {"lower", rule.lower}, {"verdicts", verdicts}}.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Fraction study

FractionTable fraction_study(const RunSpec& spec, const Corpus& corpus,
                             const std::vector<double>& fractions) {
  VIEWDIV_ENFORCE(!fractions.empty(), ErrorKind::InvalidConfig, "no fractions given");
  for (double f : fractions) {
    VIEWDIV_ENFORCE(f > 0.0 && f <= 1.0, ErrorKind::InvalidConfig, "fractions must lie in (0, 1]");
  }
  std::vector<double> sorted = fractions;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  auto run_at = [&](double f) {
    RunSpec s = spec;
    s.data_fraction = f;
    const auto t0 = Clock::now();
    RunResult r = run(s, corpus);
    FractionRow row;
    row.fraction = f;
    row.images = r.report.subset_images;
    row.wall_ms = elapsed_ms(t0);
    for (const auto& c : r.report.configs) row.means.push_back({c.label, {c.mean, c.count}});
    return row;
  };

  FractionTable table;
  for (double f : sorted) table.rows.push_back(run_at(f));
  const FractionRow reference = sorted.front() == 1.0 ? table.rows.front() : run_at(1.0);

  for (std::size_t c = 0; c < reference.means.size(); ++c) {
    const auto& [label, ref] = reference.means[c];
    double worst = 0.0;
    for (const auto& row : table.rows) {
      const auto& m = row.means[c].second;
      if (m.second > 0 && ref.second > 0) worst = std::max(worst, std::abs(m.first - ref.first));
    }
    table.stability.emplace_back(label, worst);
    table.max_stability = std::max(table.max_stability, worst);
  }
  return table;
}

FractionTable fraction_study(const RunSpec& spec, const std::vector<double>& fractions) {
  return fraction_study(spec, load_corpus(spec.corpus_manifest), fractions);
}

std::string fraction_table_to_json(const FractionTable& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json means = json::object();
    for (const auto& [label, m] : row.means) {
      means[label] = {{"mean", m.second > 0 ? json(m.first) : json(nullptr)}, {"count", m.second}};
    }
    rows.push_back({{"fraction", row.fraction}, {"images", row.images}, {"wall_ms", row.wall_ms},
                    {"configs", means}});
  }
  json stability = json::object();
  for (const auto& [label, s] : t.stability) stability[label] = s;
  return json{{"rows", rows}, {"stability", stability}, {"max_stability", t.max_stability}}.dump(2) +
         "\n";
}

}  // namespace viewdiv
