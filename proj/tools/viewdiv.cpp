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

// viewdiv: positive-pair sampling and EMD view-diversity scoring.
//
// Exit codes: 0 success, 2 input error, 3 numerical error (including a
// failed oracle verification).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "viewdiv/error.hpp"
#include "viewdiv/losses.hpp"
#include "viewdiv/pipeline.hpp"
#include "viewdiv/synth.hpp"
#include "viewdiv/transport.hpp"

namespace {

using json = nlohmann::json;
using namespace viewdiv;

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::IoError, "cannot write " + out_path);
  out << text;
}

struct SpecArgs {
  std::string spec_path;
  int workers = 0;
  std::optional<std::uint64_t> seed;
};

void add_spec_options(CLI::App* cmd, SpecArgs& a) {
  cmd->add_option("--spec", a.spec_path, "Run specification JSON")->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", a.workers, "Override the worker count");
  cmd->add_option("--seed", a.seed, "Override the seed");
}

RunSpec resolve_spec(const SpecArgs& a) {
  RunSpec spec = load_run_spec(a.spec_path);
  if (a.workers > 0) spec.workers = a.workers;
  if (a.seed) spec.seed = *a.seed;
  return spec;
}

// ---------------------------------------------------------------------------
// oracle: exact assignment vs Sinkhorn on random cosine costs.

double brute_force_cost(const CostMatrix& c, std::vector<int>& best) {
  const std::size_t n = c.n();
  std::vector<int> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<int>(i);
  double best_cost = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) cost += c(i, static_cast<std::size_t>(perm[i]));
    if (cost < best_cost - kTieTolerance) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best_cost;
}

int run_oracle(int instances, std::uint64_t seed, int dim) {
  Rng rng(seed);
  int failures = 0;
  double worst_gap = 0.0, worst_excess = -INFINITY;
  for (int k = 0; k < instances; ++k) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.below(7));
    std::vector<double> xv(n * dim), yv(n * dim);
    for (auto& v : xv) v = rng.uniform(-1.0, 1.0);
    for (auto& v : yv) v = rng.uniform(-1.0, 1.0);
    const FeatureMap x(n, dim, xv), y(n, dim, yv);
    const CostMatrix c = cost_matrix(x, y);

    const TransportPlan exact = exact_plan(c);
    std::vector<int> brute;
    brute_force_cost(c, brute);
    const double s_exact = plan_similarity(exact, c);
    const double s_default = plan_similarity(sinkhorn(c, Marginals::uniform(n), SinkhornParams{}), c);
    const double s_sharp =
        plan_similarity(sinkhorn(c, Marginals::uniform(n), SinkhornParams{200.0, 500, 1e-30}), c);

    worst_excess = std::max(worst_excess, s_default - s_exact);
    worst_gap = std::max(worst_gap, std::abs(s_sharp - s_exact));
    const bool ok = exact.assignment == brute && s_default <= s_exact + 1e-9 &&
                    std::abs(s_sharp - s_exact) <= 1e-2;
    if (!ok) {
      ++failures;
      std::printf("FAIL instance %d (n=%zu): S_exact=%.12f S_default=%.12f S_sharp=%.12f\n", k, n,
                  s_exact, s_default, s_sharp);
    }
  }
  std::printf("oracle: %d instances, %d failures, max(S_default - S_exact) = %.3e, "
              "max |S_sharp - S_exact| = %.3e\n",
              instances, failures, worst_excess, worst_gap);
  return failures == 0 ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------
// loss: {"info_nce": {"q": [...], "k_pos": [...], "k_negs": [[...], ...], "tau": t}}
//       {"dino": {"p_teacher": [...], "log_p_student": [...]}} or "student_logits"

std::string evaluate_losses(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::InvalidInput, e.what());
  }
  json out = json::object();
  try {
    if (doc.contains("info_nce")) {
      const auto& in = doc["info_nce"];
      ContrastiveBatch b;
      b.q = in.at("q").get<std::vector<double>>();
      b.k_pos = in.at("k_pos").get<std::vector<double>>();
      for (const auto& row : in.value("k_negs", json::array())) {
        const auto r = row.get<std::vector<double>>();
        if (r.size() != b.q.size()) throw Error(ErrorKind::InvalidInput, "negative key dimension differs from query");
        b.k_negs.insert(b.k_negs.end(), r.begin(), r.end());
      }
      b.tau = in.value("tau", b.tau);
      const InfoNceResult r = info_nce(b);
      out["info_nce"] = {{"loss", r.loss}, {"grad_q", r.grad_q}};
    }
    if (doc.contains("dino")) {
      const auto& in = doc["dino"];
      DistillPair p;
      p.p_teacher = in.at("p_teacher").get<std::vector<double>>();
      if (in.contains("log_p_student")) {
        p.log_p_student = in["log_p_student"].get<std::vector<double>>();
      } else {
        p.log_p_student = log_softmax(in.at("student_logits").get<std::vector<double>>());
      }
      out["dino"] = {{"loss", dino_ce(p)}, {"teacher_entropy", entropy(p.p_teacher)}};
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidInput, e.what());
  }
  if (out.empty()) throw Error(ErrorKind::InvalidInput, "input has neither \"info_nce\" nor \"dino\"");
  return out.dump(2) + "\n";
}

std::vector<double> parse_fractions(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::InvalidConfig, "bad fraction '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"viewdiv: positive-pair view sampling and EMD diversity scoring"};
  app.require_subcommand(1);

  SpecArgs sample_args;
  std::string sample_out;
  auto* sample = app.add_subcommand("sample", "Emit generated view pairs and patch geometry as JSON");
  add_spec_options(sample, sample_args);
  sample->add_option("--out", sample_out, "Output file (default stdout)");

  SpecArgs score_args;
  std::string score_out = "viewdiv_out";
  auto* score = app.add_subcommand("score", "Score a corpus: report.json, pairs.csv, plotdata.json");
  add_spec_options(score, score_args);
  score->add_option("--out", score_out, "Output directory");

  SpecArgs frac_args;
  std::string frac_list = "1.0,0.5,0.1";
  std::string frac_out;
  auto* fractions = app.add_subcommand("fractions", "Data-fraction stability study");
  add_spec_options(fractions, frac_args);
  fractions->add_option("--fractions", frac_list, "Comma-separated fractions in (0,1]");
  fractions->add_option("--out", frac_out, "Output file (default stdout)");

  std::string range_report, range_out;
  auto* range = app.add_subcommand("range", "Classify configs against the Baseline/SmallerCropZeroOverlap band");
  range->add_option("--report", range_report, "report.json from `score`")->required()->check(CLI::ExistingFile);
  range->add_option("--out", range_out, "Output file (default stdout)");

  int oracle_instances = 100;
  std::uint64_t oracle_seed = 0;
  int oracle_dim = 16;
  auto* oracle = app.add_subcommand("oracle", "Verify Sinkhorn against exact assignment");
  oracle->add_option("--instances", oracle_instances, "Random instances");
  oracle->add_option("--seed", oracle_seed, "Seed");
  oracle->add_option("--dim", oracle_dim, "Feature dimension");

  std::string loss_input, loss_out;
  auto* loss = app.add_subcommand("loss", "Evaluate InfoNCE / DINO cross-entropy on a JSON input");
  loss->add_option("--input", loss_input, "Input JSON")->required()->check(CLI::ExistingFile);
  loss->add_option("--out", loss_out, "Output file (default stdout)");

  SynthOptions synth_opts;
  std::string synth_dir;
  auto* synth = app.add_subcommand("synth", "Write a synthetic annotated corpus (PPM + manifest.json)");
  synth->add_option("--out", synth_dir, "Output directory")->required();
  synth->add_option("--images", synth_opts.images, "Image count");
  synth->add_option("--width", synth_opts.width, "Image width");
  synth->add_option("--height", synth_opts.height, "Image height");
  synth->add_option("--seed", synth_opts.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*sample) {
      const RunSpec spec = resolve_spec(sample_args);
      emit(sample_plan_to_json(sample_pairs(spec), spec), sample_out);
    } else if (*score) {
      const RunResult r = run(resolve_spec(score_args));
      write_run_outputs(score_out, r);
      for (const auto& c : r.report.configs) {
        std::fprintf(stderr, "%-24s count=%lld skipped=%lld mean=%.6f\n", c.label.c_str(),
                     static_cast<long long>(c.count), static_cast<long long>(c.skipped), c.mean);
      }
    } else if (*fractions) {
      const FractionTable t = fraction_study(resolve_spec(frac_args), parse_fractions(frac_list));
      emit(fraction_table_to_json(t), frac_out);
    } else if (*range) {
      emit(range_rule_to_json(range_rule(report_from_json(slurp(range_report)))), range_out);
    } else if (*oracle) {
      if (oracle_instances < 1 || oracle_dim < 1) throw Error(ErrorKind::InvalidInput, "instances and dim must be positive");
      return run_oracle(oracle_instances, oracle_seed, oracle_dim);
    } else if (*loss) {
      emit(evaluate_losses(slurp(loss_input)), loss_out);
    } else if (*synth) {
      std::cout << write_synthetic_corpus(synth_dir, synth_opts).string() << "\n";
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "viewdiv: %s\n", e.what());
    return is_numerical(e.kind()) ? kExitNumerical : kExitInput;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "viewdiv: %s\n", e.what());
    return kExitInput;
  }
  return kExitOk;
}
