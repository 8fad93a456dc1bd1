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
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "test_util.hpp"
#include "viewdiv/error.hpp"
#include "viewdiv/pipeline.hpp"
#include "viewdiv/synth.hpp"

using namespace viewdiv;
using json = nlohmann::json;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::InvalidInput;
}

/// Small synthetic corpus shared by the tests in this file.
const std::filesystem::path& corpus_manifest() {
  static const std::filesystem::path manifest = [] {
    SynthOptions opts;
    opts.images = 16;
    opts.width = 96;
    opts.height = 96;
    opts.seed = 5;
    return write_synthetic_corpus(test::scratch("corpus"), opts);
  }();
  return manifest;
}

RunSpec make_spec(json extra = json::object()) {
  json doc = {{"corpus_manifest", corpus_manifest().string()},
              {"configs", {"Baseline", "ZeroOverlap", "LowerBound", "SmallerCropZeroOverlap", "OnlyBg"}},
              {"seed", 11}};
  doc.update(extra);
  return parse_run_spec(doc.dump());
}

std::size_t csv_rows(const std::string& csv) {
  return static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) - 1;
}

ConfigStats stats(const std::string& label, ConfigKind kind, double mean, std::int64_t count = 10) {
  ConfigStats s;
  s.label = label;
  s.kind = kind;
  s.mean = mean;
  s.count = count;
  s.requested = count;
  return s;
}

}  // namespace

TEST_CASE("run spec parsing") {
  const RunSpec s = make_spec({{"strategy", "grid2"},
                               {"solver", "exact"},
                               {"sinkhorn", {{"lambda", 20.0}}},
                               {"configs", json::array({"Baseline", json{{"kind", "ZeroOverlap"},
                                                                         {"label", "zo_small"},
                                                                         {"scale", {0.1, 0.3}}}})}});
  CHECK(s.strategy == PatchStrategy::grid(2));
  CHECK(s.solver == Solver::Exact);
  CHECK(s.sinkhorn.lambda == 20.0);
  CHECK(s.sinkhorn.iterations == 10);
  REQUIRE(s.configs.size() == 2);
  CHECK(s.configs[1].label == "zo_small");
  CHECK(s.configs[1].config.scale == CropScale{0.1, 0.3});

  const RunSpec in = make_spec({{"corpus_profile", "imagenet"}, {"configs", {"SmallerCrop"}}});
  CHECK(in.configs[0].config.scale == CropScale{0.18, 0.9});

  const RunSpec rel = parse_run_spec(R"({"corpus_manifest": "c/m.json", "configs": ["Baseline"]})", "/base");
  CHECK(rel.corpus_manifest == std::filesystem::path("/base/c/m.json"));
}

TEST_CASE("run spec errors") {
  CHECK(kind_of([] { make_spec({{"configs", {"Baseline", "Baseline"}}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { make_spec({{"configs", json::array()}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { make_spec({{"configs", {"Bogus"}}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { make_spec({{"strategy", "grid4"}}); }) == ErrorKind::BadFactor);
  CHECK(kind_of([] { make_spec({{"data_fraction", 0.0}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { make_spec({{"workers", 0}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { make_spec({{"encoder", "resnet"}}); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_run_spec("{"); }) == ErrorKind::InvalidConfig);
  CHECK(kind_of([] { parse_run_spec(R"({"configs": ["Baseline"]})"); }) == ErrorKind::InvalidConfig);
}

TEST_CASE("fraction subsets are sorted, sized by ceiling and nested") {
  const auto full = select_subset(200, 1.0, 3);
  CHECK(full.size() == 200);
  const auto half = select_subset(200, 0.5, 3);
  const auto tenth = select_subset(200, 0.1, 3);
  const auto odd = select_subset(7, 0.5, 3);
  CHECK(half.size() == 100);
  CHECK(tenth.size() == 20);
  CHECK(odd.size() == 4);
  CHECK(std::is_sorted(half.begin(), half.end()));
  CHECK(std::includes(half.begin(), half.end(), tenth.begin(), tenth.end()));
  CHECK(select_subset(200, 0.5, 3) == half);
  CHECK(select_subset(200, 0.5, 4) != half);
  CHECK(select_subset(3, 0.01, 1).size() == 1);
}

TEST_CASE("pair ids") {
  CHECK(make_pair_id("img_0001", "Baseline", 2) == "img_0001/Baseline/2");
}

TEST_CASE("empty corpus is a manifest error") {
  CHECK(kind_of([] { run(make_spec(), Corpus{}); }) == ErrorKind::ManifestError);
  const auto dir = test::scratch("empty");
  test::spit(dir / "m.json", R"({"images": []})");
  CHECK(kind_of([&] { run(make_spec({{"corpus_manifest", (dir / "m.json").string()}})); }) ==
        ErrorKind::ManifestError);
}

TEST_CASE("one-image Baseline run reports a single pair") {
  const Corpus full = load_corpus(corpus_manifest());
  Corpus one;
  one.add(full.images[0]);
  const RunResult r = run(make_spec({{"configs", {"Baseline", "LowerBound"}}}), one);
  REQUIRE(r.report.configs.size() == 2);
  const ConfigStats& b = r.report.configs[0];
  CHECK(b.count == 1);
  CHECK(b.requested == 1);
  std::int64_t mass = 0;
  for (auto h : b.histogram) mass += h;
  CHECK(mass == 1);
  CHECK(b.mean == r.pairs[0].score);
  CHECK(b.stddev == 0.0);
  const ConfigStats& lb = r.report.configs[1];
  CHECK(lb.count == 0);
  CHECK(lb.skipped == 1);
  CHECK(lb.skip_reasons.at("MissingPartner") == 1);
}

TEST_CASE("skip accounting, csv rows and score range") {
  const RunResult r = run(make_spec());
  std::int64_t total = 0;
  for (const auto& c : r.report.configs) {
    CHECK(c.count + c.skipped == c.requested);
    CHECK(c.requested == 16);
    std::int64_t reasons = 0;
    for (const auto& [k, v] : c.skip_reasons) reasons += v;
    CHECK(reasons == c.skipped);
    std::int64_t mass = 0;
    for (auto h : c.histogram) mass += h;
    CHECK(mass == c.count);
    total += c.count;
  }
  const std::string csv = pairs_to_csv(r.pairs);
  CHECK(csv_rows(csv) == static_cast<std::size_t>(total));
  for (const auto& p : r.pairs) {
    CHECK(p.score >= -1.0);
    CHECK(p.score <= 1.0);
  }
  const ConfigStats* lb = r.report.find("LowerBound");
  REQUIRE(lb);
  CHECK(lb->count == 16);
  for (const auto& p : r.pairs) {
    if (p.config == "LowerBound") CHECK(p.image_id_1 != p.image_id_2);
    else CHECK(p.image_id_1 == p.image_id_2);
  }
}

TEST_CASE("sample plan matches scored pairs") {
  const RunSpec spec = make_spec();
  const SamplePlan plan = sample_pairs(spec);
  const RunResult r = run(spec);
  REQUIRE(plan.pairs.size() == r.pairs.size());
  for (std::size_t i = 0; i < plan.pairs.size(); ++i) {
    CHECK(plan.pairs[i].pair_id == r.pairs[i].pair_id);
    CHECK(plan.pairs[i].pair.v1 == r.pairs[i].v1);
    CHECK(plan.pairs[i].pair.v2 == r.pairs[i].v2);
    CHECK(plan.pairs[i].patches1.patches.size() == 9);
  }
  const json doc = json::parse(sample_plan_to_json(plan, spec));
  CHECK(doc["strategy"] == "grid3");
  CHECK(doc["pairs"].size() == plan.pairs.size());
  CHECK(doc["pairs"][0]["patches"]["view1"].size() == 9);
}

TEST_CASE("worker count does not change output bytes") {
  RunSpec a = make_spec({{"strategy", "sampled"}});
  RunSpec b = a;
  b.workers = 4;
  const RunResult ra = run(a), rb = run(b);
  CHECK(report_to_json(ra.report) == report_to_json(rb.report));
  CHECK(pairs_to_csv(ra.pairs) == pairs_to_csv(rb.pairs));
  CHECK(plotdata_to_json(ra.report) == plotdata_to_json(rb.report));
}

TEST_CASE("seed changes the pairs") {
  const RunResult a = run(make_spec());
  const RunResult b = run(make_spec({{"seed", 12}}));
  CHECK(pairs_to_csv(a.pairs) != pairs_to_csv(b.pairs));
}

TEST_CASE("report json round trip") {
  const RunResult r = run(make_spec());
  const std::string text = report_to_json(r.report);
  CHECK(report_to_json(report_from_json(text)) == text);
  CHECK(kind_of([] { report_from_json("{}"); }) == ErrorKind::InvalidInput);
}

TEST_CASE("plot data scales means by ten") {
  const RunResult r = run(make_spec());
  const json doc = json::parse(plotdata_to_json(r.report));
  CHECK(doc["display_scale"] == 10.0);
  for (std::size_t i = 0; i < r.report.configs.size(); ++i) {
    const auto& c = r.report.configs[i];
    if (c.count == 0) continue;
    CHECK(doc["series"][i]["emd_x10"].get<double>() == doctest::Approx(10.0 * c.mean));
  }
  CHECK(doc["band_x10"].is_array());
}

TEST_CASE("written outputs") {
  const auto dir = test::scratch("outputs");
  const RunResult r = run(make_spec());
  write_run_outputs(dir, r);
  for (const char* f : {"report.json", "pairs.csv", "plotdata.json", "timing.json"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(test::slurp(dir / "report.json") == report_to_json(r.report));
  CHECK(test::slurp(dir / "report.json").find("wall_ms") == std::string::npos);
  CHECK(json::parse(test::slurp(dir / "timing.json")).contains("wall_ms"));
}

TEST_CASE("range rule examples") {
  SimilarityReport rep;
  rep.configs = {stats("Baseline", ConfigKind::Baseline, 0.69),
                 stats("SmallerCropZeroOverlap", ConfigKind::SmallerCropZeroOverlap, 0.35),
                 stats("ZeroOverlap", ConfigKind::ZeroOverlap, 0.43),
                 stats("LargerCrop", ConfigKind::LargerCrop, 0.75),
                 stats("LowerBound", ConfigKind::LowerBound, 0.2),
                 stats("OnlyBg", ConfigKind::OnlyBg, 0.5, 0)};
  const RangeRule rule = range_rule(rep);
  CHECK(rule.upper == 0.69);
  CHECK(rule.lower == 0.35);
  REQUIRE(rule.verdicts.size() == 5);
  CHECK(rule.verdicts[2] == std::pair<std::string, RangeVerdict>{"ZeroOverlap", RangeVerdict::Inside});
  CHECK(rule.verdicts[3].second == RangeVerdict::Above);
  CHECK(rule.verdicts[4].second == RangeVerdict::Below);
  CHECK(rule.verdicts[0].second == RangeVerdict::Inside);
  const json doc = json::parse(range_rule_to_json(rule));
  CHECK(doc["verdicts"][3]["note"] == "excessive redundancy");
  CHECK(doc["verdicts"][4]["note"] == "excessive diversity");
}

TEST_CASE("range rule needs both anchors") {
  SimilarityReport rep;
  rep.configs = {stats("Baseline", ConfigKind::Baseline, 0.69)};
  CHECK(kind_of([&] { range_rule(rep); }) == ErrorKind::MissingAnchor);
  rep.configs.push_back(stats("SmallerCropZeroOverlap", ConfigKind::SmallerCropZeroOverlap, 0.3, 0));
  CHECK(kind_of([&] { range_rule(rep); }) == ErrorKind::MissingAnchor);
}

TEST_CASE("fraction study at 1.0 reproduces the run") {
  const RunSpec spec = make_spec();
  const RunResult r = run(spec);
  const FractionTable t = fraction_study(spec, {1.0});
  REQUIRE(t.rows.size() == 1);
  for (std::size_t i = 0; i < r.report.configs.size(); ++i) {
    CHECK(t.rows[0].means[i].second.first == r.report.configs[i].mean);
    CHECK(t.rows[0].means[i].second.second == r.report.configs[i].count);
  }
  CHECK(t.max_stability == 0.0);
}

TEST_CASE("fraction study rows are descending and nested in size") {
  const FractionTable t = fraction_study(make_spec(), {0.25, 1.0, 0.5});
  REQUIRE(t.rows.size() == 3);
  CHECK(t.rows[0].fraction == 1.0);
  CHECK(t.rows[1].images == 8);
  CHECK(t.rows[2].images == 4);
  CHECK(t.max_stability >= 0.0);
  CHECK(kind_of([] { fraction_study(make_spec(), {1.5}); }) == ErrorKind::InvalidConfig);
  const json doc = json::parse(fraction_table_to_json(t));
  CHECK(doc["rows"].size() == 3);
}

TEST_CASE("external embeddings reproduce the toy encoder scores") {
  const auto dir = test::scratch("external");
  const RunSpec spec = make_spec({{"configs", {"Baseline", "ZeroOverlap"}}});
  const SamplePlan plan = sample_pairs(spec);
  const Corpus corpus = load_corpus(spec.corpus_manifest);

  json manifest = json::object();
  int k = 0;
  for (const auto& p : plan.pairs) {
    const Image px = read_ppm(corpus.at(p.pair.image_ids.first).pixel_path);
    for (const auto* set : {&p.patches1, &p.patches2}) {
      std::vector<double> values;
      for (const Rect& r : set->in_image_coords()) {
        const auto v = toy_encode(crop_pixels(px, r));
        values.insert(values.end(), v.begin(), v.end());
      }
      write_embeddings(dir / (std::to_string(k++) + ".femb"), FeatureMap(9, kToyDim, values));
    }
    manifest[p.pair_id] = {{"view1", std::to_string(k - 2) + ".femb"},
                           {"view2", std::to_string(k - 1) + ".femb"},
                           {"strategy", "grid3"}};
  }
  test::spit(dir / "manifest.json", manifest.dump());

  RunSpec ext = spec;
  ext.encoder = {EncoderSpec::Kind::External, dir / "manifest.json"};
  const RunResult a = run(spec), b = run(ext);
  REQUIRE(a.pairs.size() == b.pairs.size());
  for (std::size_t i = 0; i < a.pairs.size(); ++i) {
    CHECK(b.pairs[i].score == doctest::Approx(a.pairs[i].score).epsilon(1e-6));
  }
  CHECK(b.report.encoder == "external");

  RunSpec wrong = ext;
  wrong.strategy = PatchStrategy::grid(2);
  CHECK(kind_of([&] { run(wrong); }) == ErrorKind::EncoderMismatch);

  manifest.erase(plan.pairs.front().pair_id);
  test::spit(dir / "manifest.json", manifest.dump());
  CHECK(kind_of([&] { run(ext); }) == ErrorKind::EncoderMismatch);
}

TEST_CASE("pixel files must match the manifest extent") {
  const auto dir = test::scratch("extent");
  write_ppm(dir / "a.ppm", Image{4, 4, std::vector<std::uint8_t>(48, 9)});
  test::spit(dir / "m.json", R"({"images": [{"id": "a", "width": 5, "height": 4, "path": "a.ppm"}]})");
  CHECK(kind_of([&] { run(make_spec({{"corpus_manifest", (dir / "m.json").string()}, {"configs", {"Baseline"}}})); }) ==
        ErrorKind::ManifestError);
}
