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

#include "viewdiv/transport.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "viewdiv/error.hpp"

namespace viewdiv {

SquareMatrix::SquareMatrix(std::size_t n, std::vector<double> values)
    : n_(n), values_(std::move(values)) {
  VIEWDIV_ENFORCE(values_.size() == n_ * n_, ErrorKind::NotSquare,
                  std::to_string(values_.size()) + " values for n = " + std::to_string(n_));
}

Marginals Marginals::uniform(std::size_t n) {
  const double w = 1.0 / static_cast<double>(n);
  return {std::vector<double>(n, w), std::vector<double>(n, w)};
}

void Marginals::validate(std::size_t n) const {
  VIEWDIV_ENFORCE(s.size() == n && d.size() == n, ErrorKind::ShapeMismatch,
                  "marginals must have length " + std::to_string(n));
  for (const auto* v : {&s, &d}) {
    double total = 0.0;
    for (double x : *v) {
      VIEWDIV_ENFORCE(x > 0.0 && std::isfinite(x), ErrorKind::InvalidInput,
                      "marginal entries must be strictly positive");
      total += x;
    }
    VIEWDIV_ENFORCE(std::abs(total - 1.0) <= 1e-9, ErrorKind::InvalidInput,
                    "marginals must carry unit mass");
  }
}

void SinkhornParams::validate() const {
  VIEWDIV_ENFORCE(lambda > 0.0 && std::isfinite(lambda), ErrorKind::InvalidInput,
                  "lambda must be positive");
  VIEWDIV_ENFORCE(iterations >= 1, ErrorKind::InvalidInput, "iterations must be >= 1");
  VIEWDIV_ENFORCE(epsilon >= 0.0, ErrorKind::InvalidInput, "epsilon must be >= 0");
}

CostMatrix cost_matrix(const FeatureMap& x, const FeatureMap& y) {
  VIEWDIV_ENFORCE(x.n() == y.n() && x.d() == y.d(), ErrorKind::ShapeMismatch,
                  "X is " + std::to_string(x.n()) + "x" + std::to_string(x.d()) + ", Y is " +
                      std::to_string(y.n()) + "x" + std::to_string(y.d()));
  const FeatureMap xn = normalize_rows(x).map;
  const FeatureMap yn = normalize_rows(y).map;
  const std::size_t n = x.n();
  CostMatrix c(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto xi = xn.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      const auto yj = yn.row(j);
      const double cos = std::inner_product(xi.begin(), xi.end(), yj.begin(), 0.0);
      c(i, j) = 1.0 - std::clamp(cos, -1.0, 1.0);
    }
  }
  return c;
}

namespace {

void check_inputs(const CostMatrix& c, const Marginals& m, const SinkhornParams& p) {
  VIEWDIV_ENFORCE(c.n() > 0, ErrorKind::ShapeMismatch, "empty cost matrix");
  m.validate(c.n());
  p.validate();
  for (double v : c.values()) {
    VIEWDIV_ENFORCE(std::isfinite(v), ErrorKind::InvalidInput, "cost matrix has non-finite entries");
  }
}

[[noreturn]] void underflow(const CostMatrix& c, const SinkhornParams& p, const char* where) {
  const double cmax = *std::max_element(c.values().begin(), c.values().end());
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%s scaling vanished (lambda*max C = %.6g)", where,
                p.lambda * cmax);
  throw Error(ErrorKind::NumericalUnderflow, buf);
}

double log_sum_exp(std::span<const double> a) {
  const double hi = *std::max_element(a.begin(), a.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : a) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

}  // namespace

TransportPlan sinkhorn_scaling(const CostMatrix& c, const Marginals& m, const SinkhornParams& p) {
  check_inputs(c, m, p);
  const std::size_t n = c.n();
  SquareMatrix k(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) k(i, j) = std::max(std::exp(-p.lambda * c(i, j)), p.epsilon);

  std::vector<double> u(n, 1.0), v(n, 1.0);
  for (int t = 0; t < p.iterations; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      double kv = 0.0;
      for (std::size_t j = 0; j < n; ++j) kv += k(i, j) * v[j];
      if (!(kv > 0.0) || !std::isfinite(kv)) underflow(c, p, "row");
      u[i] = m.s[i] / kv;
      if (!std::isfinite(u[i])) underflow(c, p, "row");
    }
    for (std::size_t j = 0; j < n; ++j) {
      double ku = 0.0;
      for (std::size_t i = 0; i < n; ++i) ku += k(i, j) * u[i];
      if (!(ku > 0.0) || !std::isfinite(ku)) underflow(c, p, "column");
      v[j] = m.d[j] / ku;
      if (!std::isfinite(v[j])) underflow(c, p, "column");
    }
  }

  TransportPlan plan;
  plan.p = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) plan.p(i, j) = u[i] * k(i, j) * v[j];
  plan.converged_axis = Axis::Columns;
  plan.iterations_used = p.iterations;
  return plan;
}

TransportPlan sinkhorn_log(const CostMatrix& c, const Marginals& m, const SinkhornParams& p) {
  check_inputs(c, m, p);
  const std::size_t n = c.n();
  SquareMatrix log_k(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) log_k(i, j) = -p.lambda * c(i, j);

  std::vector<double> f(n, 0.0), g(n, 0.0), scratch(n);
  for (int t = 0; t < p.iterations; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) scratch[j] = log_k(i, j) + g[j];
      f[i] = std::log(m.s[i]) - log_sum_exp(scratch);
      if (!std::isfinite(f[i])) underflow(c, p, "row");
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) scratch[i] = log_k(i, j) + f[i];
      g[j] = std::log(m.d[j]) - log_sum_exp(scratch);
      if (!std::isfinite(g[j])) underflow(c, p, "column");
    }
  }

  TransportPlan plan;
  plan.p = SquareMatrix(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) plan.p(i, j) = std::exp(f[i] + log_k(i, j) + g[j]);
  plan.converged_axis = Axis::Columns;
  plan.iterations_used = p.iterations;
  return plan;
}

TransportPlan sinkhorn(const CostMatrix& c, const Marginals& m, const SinkhornParams& p) {
  if (p.lambda > kLogDomainLambda) return sinkhorn_log(c, m, p);
  return sinkhorn_scaling(c, m, p);
}

// ---------------------------------------------------------------------------
// Exact assignment

namespace {

/// Shortest augmenting path Hungarian on a dense n x m (n <= m) matrix view.
/// Returns the optimal cost and writes row -> column into `rowsol`.
double hungarian(std::size_t n, std::size_t m, const std::vector<double>& cost,
                 std::vector<int>& rowsol) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  rowsol.assign(n, -1);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) rowsol[p[j] - 1] = static_cast<int>(j - 1);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += cost[i * m + static_cast<std::size_t>(rowsol[i])];
  return total;
}

/// Optimal cost of matching rows [first, n) to the columns not in `taken`.
double residual_optimum(const CostMatrix& c, std::size_t first, const std::vector<char>& taken) {
  const std::size_t n = c.n();
  const std::size_t rows = n - first;
  if (rows == 0) return 0.0;
  std::vector<std::size_t> cols;
  for (std::size_t j = 0; j < n; ++j)
    if (!taken[j]) cols.push_back(j);
  std::vector<double> sub(rows * cols.size());
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t k = 0; k < cols.size(); ++k) sub[i * cols.size() + k] = c(first + i, cols[k]);
  std::vector<int> sol;
  return hungarian(rows, cols.size(), sub, sol);
}

}  // namespace

std::vector<int> min_cost_assignment(const CostMatrix& c) {
  std::vector<int> sol;
  if (c.n() == 0) return sol;
  std::vector<double> values(c.values().begin(), c.values().end());
  hungarian(c.n(), c.n(), values, sol);
  return sol;
}

TransportPlan exact_plan(const CostMatrix& c) {
  const std::size_t n = c.n();
  VIEWDIV_ENFORCE(n > 0 && c.values().size() == n * n, ErrorKind::NotSquare,
                  "exact_plan needs a non-empty square cost matrix");
  for (double v : c.values()) {
    VIEWDIV_ENFORCE(std::isfinite(v), ErrorKind::InvalidInput, "cost matrix has non-finite entries");
  }
  const std::vector<char> none(n, 0);
  const double optimum = residual_optimum(c, 0, none);

  // Fix rows in order, each to the smallest column that still admits an
  // optimal completion.
  std::vector<int> assignment(n, -1);
  std::vector<char> taken(n, 0);
  double prefix = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (taken[j]) continue;
      taken[j] = 1;
      const double total = prefix + c(i, j) + residual_optimum(c, i + 1, taken);
      if (total <= optimum + kTieTolerance) {
        assignment[i] = static_cast<int>(j);
        prefix += c(i, j);
        break;
      }
      taken[j] = 0;
    }
    VIEWDIV_ENFORCE(assignment[i] >= 0, ErrorKind::NumericalUnderflow,
                    "tie-breaking lost the optimal completion");
  }

  TransportPlan plan;
  plan.p = SquareMatrix(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) plan.p(i, static_cast<std::size_t>(assignment[i])) = w;
  plan.converged_axis = Axis::Columns;
  plan.iterations_used = 0;
  plan.assignment = std::move(assignment);
  return plan;
}

double plan_cost(const TransportPlan& plan, const CostMatrix& c) {
  VIEWDIV_ENFORCE(plan.n() == c.n(), ErrorKind::ShapeMismatch, "plan and cost differ in size");
  double acc = 0.0;
  for (std::size_t k = 0; k < c.values().size(); ++k) acc += plan.p.values()[k] * c.values()[k];
  return acc;
}

double plan_similarity(const TransportPlan& plan, const CostMatrix& c) {
  VIEWDIV_ENFORCE(plan.n() == c.n(), ErrorKind::ShapeMismatch, "plan and cost differ in size");
  double acc = 0.0;
  for (std::size_t k = 0; k < c.values().size(); ++k)
    acc += plan.p.values()[k] * (1.0 - c.values()[k]);
  return acc;
}

std::string_view to_string(Solver s) { return s == Solver::Sinkhorn ? "sinkhorn" : "exact"; }

Solver parse_solver(std::string_view name) {
  if (name == "sinkhorn") return Solver::Sinkhorn;
  if (name == "exact") return Solver::Exact;
  throw Error(ErrorKind::InvalidConfig, "unknown solver '" + std::string(name) + "'");
}

double similarity(const FeatureMap& x, const FeatureMap& y, const SinkhornParams& p,
                  Solver solver) {
  const CostMatrix c = cost_matrix(x, y);
  const TransportPlan plan =
      solver == Solver::Exact ? exact_plan(c) : sinkhorn(c, Marginals::uniform(c.n()), p);
  return plan_similarity(plan, c);
}

}  // namespace viewdiv
