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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "viewdiv/error.hpp"
#include "viewdiv/features.hpp"
#include "viewdiv/geometry.hpp"
#include "viewdiv/losses.hpp"
#include "viewdiv/pairgen.hpp"
#include "viewdiv/patches.hpp"
#include "viewdiv/pipeline.hpp"
#include "viewdiv/transport.hpp"

namespace py = pybind11;
using namespace viewdiv;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

FeatureMap to_feature_map(const Array& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::DimMismatch, "expected a 2-D array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  const auto d = static_cast<std::size_t>(a.shape(1));
  return FeatureMap(n, d, std::vector<double>(a.data(), a.data() + n * d));
}

SquareMatrix to_square(const Array& a) {
  if (a.ndim() != 2 || a.shape(0) != a.shape(1)) throw Error(ErrorKind::NotSquare, "expected an N x N array");
  const auto n = static_cast<std::size_t>(a.shape(0));
  return SquareMatrix(n, std::vector<double>(a.data(), a.data() + n * n));
}

Array to_array(const SquareMatrix& m) {
  const auto n = static_cast<py::ssize_t>(m.n());
  Array out({n, n});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

Array to_array(const FeatureMap& f) {
  Array out({static_cast<py::ssize_t>(f.n()), static_cast<py::ssize_t>(f.d())});
  std::copy(f.values().begin(), f.values().end(), out.mutable_data());
  return out;
}

std::vector<double> flatten_rows(const Array& a, std::size_t dim) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || static_cast<std::size_t>(a.shape(1)) != dim) {
    throw Error(ErrorKind::InvalidInput, "negative keys must be a K x D array");
  }
  return std::vector<double>(a.data(), a.data() + a.size());
}

}  // namespace

PYBIND11_MODULE(_viewdiv, m) {
  m.doc() = "Positive-pair view sampling and EMD view-diversity scoring";

  py::register_exception<Error>(m, "ViewdivError", PyExc_ValueError);

  py::class_<Rect>(m, "Rect")
      .def(py::init<double, double, double, double>(), py::arg("x_min"), py::arg("y_min"),
           py::arg("x_max"), py::arg("y_max"))
      .def_readwrite("x_min", &Rect::x_min)
      .def_readwrite("y_min", &Rect::y_min)
      .def_readwrite("x_max", &Rect::x_max)
      .def_readwrite("y_max", &Rect::y_max)
      .def_property_readonly("area", &Rect::area)
      .def("as_tuple", [](const Rect& r) { return py::make_tuple(r.x_min, r.y_min, r.x_max, r.y_max); })
      .def("__eq__", [](const Rect& a, const Rect& b) { return a == b; })
      .def("__repr__", [](const Rect& r) { return "Rect" + to_string(r); });

  py::class_<CropScale>(m, "CropScale")
      .def(py::init<double, double, double, double>(), py::arg("s_min") = 0.2, py::arg("s_max") = 1.0,
           py::arg("ratio_min") = 3.0 / 4.0, py::arg("ratio_max") = 4.0 / 3.0)
      .def_readwrite("s_min", &CropScale::s_min)
      .def_readwrite("s_max", &CropScale::s_max)
      .def_readwrite("ratio_min", &CropScale::ratio_min)
      .def_readwrite("ratio_max", &CropScale::ratio_max);

  m.def("iou", &iou, py::arg("a"), py::arg("b"));
  m.def("contains", &contains, py::arg("outer"), py::arg("inner"));
  m.def(
      "sample_rrc",
      [](std::int64_t width, std::int64_t height, const CropScale& scale, std::uint64_t seed) {
        Rng rng(seed);
        return sample_rrc({width, height}, scale, rng);
      },
      py::arg("width"), py::arg("height"), py::arg("scale"), py::arg("seed"));

  py::enum_<ConfigKind> kind(m, "ConfigKind");
  for (ConfigKind k : kAllConfigKinds) kind.value(std::string(to_string(k)).c_str(), k);

  py::class_<PairConfig>(m, "PairConfig")
      .def(py::init([](const std::string& kind, const std::string& profile) {
             return PairConfig::make(parse_config_kind(kind), parse_corpus_profile(profile));
           }),
           py::arg("kind"), py::arg("profile") = "coco")
      .def_readwrite("kind", &PairConfig::kind)
      .def_readwrite("scale", &PairConfig::scale)
      .def_readwrite("iou_fg_min", &PairConfig::iou_fg_min)
      .def_readwrite("iou_bg_max", &PairConfig::iou_bg_max)
      .def_readwrite("max_attempts", &PairConfig::max_attempts);

  py::class_<AnnotatedImage>(m, "AnnotatedImage")
      .def(py::init([](std::string id, std::int64_t w, std::int64_t h, std::vector<Rect> boxes) {
             return AnnotatedImage{std::move(id), {w, h}, std::move(boxes), {}};
           }),
           py::arg("id"), py::arg("width"), py::arg("height"), py::arg("boxes") = std::vector<Rect>{})
      .def_readonly("id", &AnnotatedImage::id)
      .def_readonly("boxes", &AnnotatedImage::boxes);

  py::class_<ViewPair>(m, "ViewPair")
      .def_readonly("image_ids", &ViewPair::image_ids)
      .def_readonly("v1", &ViewPair::v1)
      .def_readonly("v2", &ViewPair::v2)
      .def_readonly("config_kind", &ViewPair::config_kind)
      .def_readonly("seed", &ViewPair::seed);

  m.def(
      "generate_pair",
      [](const AnnotatedImage& img, const PairConfig& cfg, std::uint64_t seed,
         const AnnotatedImage* partner) { return generate_pair(img, partner, cfg, seed); },
      py::arg("image"), py::arg("config"), py::arg("seed"), py::arg("partner") = nullptr);
  m.def(
      "satisfies_config",
      [](const ViewPair& pair, const std::vector<AnnotatedImage>& images, const PairConfig& cfg) {
        Corpus corpus;
        for (const auto& img : images) corpus.add(img);
        return satisfies_config(pair, corpus, cfg);
      },
      py::arg("pair"), py::arg("images"), py::arg("config"));

  m.def(
      "grid_patches",
      [](const Rect& view, int factor) { return grid_patches(view, factor).patches; },
      py::arg("view"), py::arg("factor"));
  m.def(
      "sampled_patches",
      [](const Rect& view, std::uint64_t seed) {
        Rng rng(seed);
        return sampled_patches(view, rng).patches;
      },
      py::arg("view"), py::arg("seed"));

  m.def(
      "toy_encode",
      [](py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> pixels) {
        if (pixels.ndim() != 3 || pixels.shape(2) != 3) {
          throw Error(ErrorKind::EmptyPatch, "expected an H x W x 3 uint8 array");
        }
        PixelPatch p;
        p.height = pixels.shape(0);
        p.width = pixels.shape(1);
        p.data.assign(pixels.data(), pixels.data() + pixels.size());
        return toy_encode(p);
      },
      py::arg("pixels"));

  m.def("cost_matrix", [](const Array& x, const Array& y) {
    return to_array(cost_matrix(to_feature_map(x), to_feature_map(y)));
  });
  m.def(
      "sinkhorn",
      [](const Array& cost, double lambda, int iterations, double epsilon) {
        const SquareMatrix c = to_square(cost);
        return to_array(sinkhorn(c, Marginals::uniform(c.n()), {lambda, iterations, epsilon}).p);
      },
      py::arg("cost"), py::arg("lam") = 10.0, py::arg("iterations") = 10, py::arg("epsilon") = 1e-30);
  m.def(
      "exact_plan", [](const Array& cost) { return to_array(exact_plan(to_square(cost)).p); },
      py::arg("cost"));
  m.def(
      "similarity",
      [](const Array& x, const Array& y, double lambda, int iterations, const std::string& solver) {
        return similarity(to_feature_map(x), to_feature_map(y), {lambda, iterations, 1e-30},
                          parse_solver(solver));
      },
      py::arg("x"), py::arg("y"), py::arg("lam") = 10.0, py::arg("iterations") = 10,
      py::arg("solver") = "sinkhorn");

  m.def(
      "info_nce",
      [](std::vector<double> q, std::vector<double> k_pos, const Array& k_negs, double tau) {
        ContrastiveBatch b;
        b.k_negs = flatten_rows(k_negs, q.size());
        b.q = std::move(q);
        b.k_pos = std::move(k_pos);
        b.tau = tau;
        const InfoNceResult r = info_nce(b);
        return py::make_tuple(r.loss, r.grad_q);
      },
      py::arg("q"), py::arg("k_pos"), py::arg("k_negs"), py::arg("tau"));
  m.def(
      "dino_ce",
      [](std::vector<double> p_teacher, std::vector<double> log_p_student) {
        return dino_ce({std::move(p_teacher), std::move(log_p_student)});
      },
      py::arg("p_teacher"), py::arg("log_p_student"));

  m.def(
      "write_embeddings",
      [](const std::filesystem::path& path, const Array& f) { write_embeddings(path, to_feature_map(f)); },
      py::arg("path"), py::arg("features"));
  m.def(
      "load_embeddings",
      [](const std::filesystem::path& path, bool renormalize) {
        return to_array(load_embeddings(path, renormalize));
      },
      py::arg("path"), py::arg("renormalize") = false);

  m.def(
      "score",
      [](const std::filesystem::path& spec_path, const std::filesystem::path& out_dir, int workers) {
        RunSpec spec = load_run_spec(spec_path);
        if (workers > 0) spec.workers = workers;
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run(spec);
        }
        if (!out_dir.empty()) write_run_outputs(out_dir, r);
        return report_to_json(r.report);
      },
      py::arg("spec"), py::arg("out_dir") = std::filesystem::path{}, py::arg("workers") = 0,
      "Runs a scoring job and returns report.json as a string.");
  m.def(
      "range_rule",
      [](const std::string& report_json) {
        return range_rule_to_json(range_rule(report_from_json(report_json)));
      },
      py::arg("report_json"));
}
