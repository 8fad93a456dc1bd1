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
#include <numeric>

#include "doctest.h"
#include "viewdiv/error.hpp"
#include "viewdiv/transport.hpp"

using namespace viewdiv;

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

FeatureMap random_features(Rng& rng, std::size_t n, std::size_t d) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return FeatureMap(n, d, v);
}

CostMatrix random_cost(Rng& rng, std::size_t n) {
  CostMatrix c(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) c(i, j) = rng.uniform(0.0, 2.0);
  return c;
}

// Independent Sinkhorn in extended precision log space, same schedule.
std::vector<long double> reference_sinkhorn(const CostMatrix& c, double lambda, int iterations) {
  const std::size_t n = c.n();
  const long double log_w = -std::log(static_cast<long double>(n));
  std::vector<long double> f(n, 0), g(n, 0);
  auto lse = [](const std::vector<long double>& a) {
    const long double m = *std::max_element(a.begin(), a.end());
    long double s = 0;
    for (auto v : a) s += std::exp(v - m);
    return m + std::log(s);
  };
  std::vector<long double> tmp(n);
  for (int t = 0; t < iterations; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) tmp[j] = -lambda * static_cast<long double>(c(i, j)) + g[j];
      f[i] = log_w - lse(tmp);
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = -lambda * static_cast<long double>(c(i, j)) + f[i];
      g[j] = log_w - lse(tmp);
    }
  }
  std::vector<long double> p(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      p[i * n + j] = std::exp(f[i] - lambda * static_cast<long double>(c(i, j)) + g[j]);
  return p;
}

double brute_force_min(const CostMatrix& c, std::vector<int>& best) {
  std::vector<int> perm(c.n());
  std::iota(perm.begin(), perm.end(), 0);
  double best_cost = INFINITY;
  do {
    double cost = 0.0;
    for (std::size_t i = 0; i < c.n(); ++i) cost += c(i, static_cast<std::size_t>(perm[i]));
    if (cost < best_cost - kTieTolerance) {
      best_cost = cost;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best_cost;
}

struct MarginalError {
  double rows = 0.0;
  double cols = 0.0;
  double mass = 0.0;
};

MarginalError marginal_error(const TransportPlan& plan) {
  const std::size_t n = plan.n();
  const double w = 1.0 / static_cast<double>(n);
  MarginalError e;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0.0, c = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      r += plan.p(i, j);
      c += plan.p(j, i);
    }
    total += r;
    e.rows = std::max(e.rows, std::abs(r - w));
    e.cols = std::max(e.cols, std::abs(c - w));
  }
  e.mass = std::abs(total - 1.0);
  return e;
}

}  // namespace

TEST_CASE("cost of orthonormal identity rows is 1 - I") {
  const FeatureMap x(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const CostMatrix c = cost_matrix(x, x);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(c(i, j) == (i == j ? 0.0 : 1.0));
}

TEST_CASE("orthogonal sets give a constant unit cost") {
  const FeatureMap x(2, 4, {1, 0, 0, 0, 0, 1, 0, 0});
  const FeatureMap y(2, 4, {0, 0, 1, 0, 0, 0, 0, 3});
  const CostMatrix c = cost_matrix(x, y);
  for (double v : c.values()) CHECK(v == 1.0);
  CHECK(similarity(x, y, {}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(similarity(x, y, {}, Solver::Exact) == 0.0);
}

TEST_CASE("cost of (1,0) against the diagonal unit vector") {
  const FeatureMap x(1, 2, {1, 0});
  const FeatureMap y(1, 2, {1 / std::sqrt(2.0), 1 / std::sqrt(2.0)});
  CHECK(cost_matrix(x, y)(0, 0) == doctest::Approx(1 - std::sqrt(2.0) / 2).epsilon(1e-15));
  CHECK(cost_matrix(x, y)(0, 0) == doctest::Approx(0.29289).epsilon(1e-5));
}

TEST_CASE("cost_matrix normalizes rows and rejects shape mismatches") {
  const FeatureMap x(1, 2, {3, 4});
  const FeatureMap y(1, 2, {6, 8});
  CHECK(cost_matrix(x, y)(0, 0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(kind_of([] { cost_matrix(FeatureMap(2, 2, {1, 0, 0, 1}), FeatureMap(1, 2, {1, 0})); }) ==
        ErrorKind::ShapeMismatch);
  CHECK(kind_of([] { cost_matrix(FeatureMap(1, 3, {1, 0, 0}), FeatureMap(1, 2, {1, 0})); }) ==
        ErrorKind::ShapeMismatch);
}

TEST_CASE("constant cost yields the uniform plan") {
  for (std::size_t n : {1, 2, 5, 9}) {
    for (double lambda : {0.5, 10.0, 200.0}) {
      const TransportPlan plan = sinkhorn(CostMatrix(n, 1.0), Marginals::uniform(n), {lambda, 7, 1e-30});
      const double w = 1.0 / static_cast<double>(n * n);
      for (double v : plan.p.values()) CHECK(v == doctest::Approx(w).epsilon(1e-14));
    }
  }
}

TEST_CASE("single patch plan is [[1]]") {
  for (double lambda : {0.1, 10.0, 500.0}) {
    const TransportPlan plan = sinkhorn(CostMatrix(1, 0.7), Marginals::uniform(1), {lambda, 3, 1e-30});
    CHECK(plan.p(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("two-by-two swap cost: golden plan") {
  const CostMatrix c(2, {0, 1, 1, 0});
  const TransportPlan plan = sinkhorn(c, Marginals::uniform(2), {10.0, 10, 1e-30});
  // Symmetric kernel: one row scaling reaches the fixed point.
  const double diag = 0.5 / (1.0 + std::exp(-10.0));
  const double off = 0.5 * std::exp(-10.0) / (1.0 + std::exp(-10.0));
  CHECK(diag == doctest::Approx(0.49997730).epsilon(1e-8));
  CHECK(plan.p(0, 0) == doctest::Approx(diag).epsilon(1e-14));
  CHECK(plan.p(1, 1) == doctest::Approx(diag).epsilon(1e-14));
  CHECK(plan.p(0, 1) == doctest::Approx(off).epsilon(1e-12));
  const auto ref = reference_sinkhorn(c, 10.0, 10);
  for (std::size_t k = 0; k < 4; ++k) CHECK(plan.p.values()[k] == doctest::Approx(double(ref[k])).epsilon(1e-12));
}

TEST_CASE("scaling and log-domain paths agree with an independent reference") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    const CostMatrix c = random_cost(rng, n);
    const double lambda = rng.uniform(0.5, 20.0);
    const int iters = 1 + static_cast<int>(rng.below(60));
    const auto ref = reference_sinkhorn(c, lambda, iters);
    const TransportPlan a = sinkhorn_scaling(c, Marginals::uniform(n), {lambda, iters, 0.0});
    const TransportPlan b = sinkhorn_log(c, Marginals::uniform(n), {lambda, iters, 0.0});
    for (std::size_t k = 0; k < n * n; ++k) {
      CHECK(std::abs(a.p.values()[k] - double(ref[k])) <= 1e-12);
      CHECK(std::abs(b.p.values()[k] - double(ref[k])) <= 1e-12);
    }
  }
}

TEST_CASE("sinkhorn marginals: columns exact after a default run, both converged at T=500") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    const CostMatrix c = random_cost(rng, n);
    const TransportPlan quick = sinkhorn(c, Marginals::uniform(n), {});
    const MarginalError q = marginal_error(quick);
    CHECK(quick.converged_axis == Axis::Columns);
    CHECK(q.cols <= 1e-12);
    CHECK(q.mass <= 1e-9);
    // Well-conditioned costs from high-dimensional features converge within 500 iterations.
    const CostMatrix wide = cost_matrix(random_features(rng, n, 192), random_features(rng, n, 192));
    const TransportPlan slow = sinkhorn(wide, Marginals::uniform(n), {10.0, 500, 1e-30});
    const MarginalError s = marginal_error(slow);
    CHECK(s.rows <= 1e-6);
    CHECK(s.cols <= 1e-6);
  }
}

TEST_CASE("sinkhorn honours non-uniform marginals") {
  const CostMatrix c(3, {0.1, 0.5, 0.9, 0.4, 0.2, 0.7, 0.8, 0.6, 0.3});
  const Marginals m{{0.5, 0.3, 0.2}, {0.2, 0.2, 0.6}};
  const TransportPlan plan = sinkhorn(c, m, {10.0, 500, 1e-30});
  for (std::size_t i = 0; i < 3; ++i) {
    double r = 0.0, col = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      r += plan.p(i, j);
      col += plan.p(j, i);
    }
    CHECK(r == doctest::Approx(m.s[i]).epsilon(1e-9));
    CHECK(col == doctest::Approx(m.d[i]).epsilon(1e-12));
  }
}

TEST_CASE("sinkhorn input validation") {
  const CostMatrix c(2, 0.5);
  CHECK(kind_of([&] { sinkhorn(c, Marginals::uniform(3), {}); }) == ErrorKind::ShapeMismatch);
  CHECK(kind_of([&] { sinkhorn(c, {{0.7, 0.7}, {0.5, 0.5}}, {}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { sinkhorn(c, {{1.0, 0.0}, {0.5, 0.5}}, {}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { sinkhorn(c, Marginals::uniform(2), {-1.0, 10, 1e-30}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([&] { sinkhorn(c, Marginals::uniform(2), {10.0, 0, 1e-30}); }) == ErrorKind::InvalidInput);
  CHECK(kind_of([] { SquareMatrix(2, std::vector<double>(3)); }) == ErrorKind::NotSquare);
  CHECK(kind_of([] { sinkhorn(CostMatrix(2, {0, NAN, 0, 0}), Marginals::uniform(2), {}); }) ==
        ErrorKind::InvalidInput);
}

TEST_CASE("unfloored scaling underflows on extreme costs") {
  const CostMatrix c(2, {100, 100, 100, 100});
  CHECK(kind_of([&] { sinkhorn_scaling(c, Marginals::uniform(2), {10.0, 5, 0.0}); }) ==
        ErrorKind::NumericalUnderflow);
  CHECK(is_numerical(ErrorKind::NumericalUnderflow));
  // The floored kernel and the log path both survive.
  CHECK_NOTHROW(sinkhorn_scaling(c, Marginals::uniform(2), {10.0, 5, 1e-30}));
  CHECK_NOTHROW(sinkhorn_log(c, Marginals::uniform(2), {10.0, 5, 0.0}));
}

TEST_CASE("exact plan on 1 - I is the scaled identity") {
  CostMatrix c(3, 1.0);
  for (std::size_t i = 0; i < 3; ++i) c(i, i) = 0.0;
  const TransportPlan plan = exact_plan(c);
  CHECK(plan.assignment == std::vector<int>{0, 1, 2});
  CHECK(plan_cost(plan, c) == 0.0);
  CHECK(plan.p(1, 1) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("exact plan on a constant cost picks the identity permutation") {
  const TransportPlan plan = exact_plan(CostMatrix(5, 1.0));
  CHECK(plan.assignment == std::vector<int>{0, 1, 2, 3, 4});
  CHECK(plan_cost(plan, CostMatrix(5, 1.0)) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("exact plan breaks ties lexicographically") {
  // Assignments (1, 0, 2) and (2, 0, 1) both cost zero.
  const CostMatrix c(3, {1, 0, 0, 0, 1, 1, 1, 0, 0});
  const TransportPlan plan = exact_plan(c);
  std::vector<int> brute;
  const double best = brute_force_min(c, brute);
  CHECK(plan_cost(plan, c) * 3 == doctest::Approx(best));
  CHECK(plan.assignment == brute);
  CHECK(plan.assignment == std::vector<int>{1, 0, 2});
}

TEST_CASE("exact plan equals factorial brute force") {
  Rng rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    CostMatrix c = random_cost(rng, n);
    if (trial % 3 == 0) {
      // Quantized costs force many ties.
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) c(i, j) = std::round(c(i, j) * 2.0) / 2.0;
    }
    std::vector<int> brute;
    const double best = brute_force_min(c, brute);
    const TransportPlan plan = exact_plan(c);
    CHECK(plan.assignment == brute);
    CHECK(plan_cost(plan, c) * static_cast<double>(n) == doctest::Approx(best).epsilon(1e-12));
    std::vector<int> hung = min_cost_assignment(c);
    double hc = 0.0;
    for (std::size_t i = 0; i < n; ++i) hc += c(i, static_cast<std::size_t>(hung[i]));
    CHECK(hc == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("sinkhorn never beats the exact optimum at default parameters") {
  Rng rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const FeatureMap x = random_features(rng, n, 16), y = random_features(rng, n, 16);
    const double s_exact = similarity(x, y, {}, Solver::Exact);
    const double s_sink = similarity(x, y, {});
    CHECK(s_sink <= s_exact + 1e-9);
  }
}

TEST_CASE("sharp sinkhorn approaches the exact similarity") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(7);
    const FeatureMap x = random_features(rng, n, 16), y = random_features(rng, n, 16);
    const double s_exact = similarity(x, y, {}, Solver::Exact);
    const double s_sharp = similarity(x, y, {200.0, 500, 1e-30});
    CHECK(std::abs(s_sharp - s_exact) <= 1e-2);
  }
}

TEST_CASE("converged similarity is symmetric and identical orthonormal sets score one") {
  Rng rng(23);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(9);
    const FeatureMap x = random_features(rng, n, 8), y = random_features(rng, n, 8);
    const FeatureMap wx = random_features(rng, n, 192), wy = random_features(rng, n, 192);
    CHECK(std::abs(similarity(wx, wy, {10.0, 500, 1e-30}) - similarity(wy, wx, {10.0, 500, 1e-30})) <= 1e-9);
    CHECK(std::abs(similarity(x, y, {}, Solver::Exact) - similarity(y, x, {}, Solver::Exact)) <= 1e-9);
  }
  const FeatureMap e(4, 4, {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1});
  CHECK(similarity(e, e, {}, Solver::Exact) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("solver names") {
  CHECK(parse_solver("exact") == Solver::Exact);
  CHECK(to_string(Solver::Sinkhorn) == "sinkhorn");
  CHECK(kind_of([] { parse_solver("lp"); }) == ErrorKind::InvalidConfig);
}
