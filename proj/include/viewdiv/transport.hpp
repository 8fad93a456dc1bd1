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

#ifndef VIEWDIV_TRANSPORT_HPP_
#define VIEWDIV_TRANSPORT_HPP_

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "viewdiv/features.hpp"

namespace viewdiv {

/// Square N x N matrix of reals, row-major.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0) : n_(n), values_(n * n, fill) {}
  /// Throws NotSquare when values.size() != n * n.
  SquareMatrix(std::size_t n, std::vector<double> values);

  std::size_t n() const { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[i * n_ + j]; }
  std::span<const double> values() const { return values_; }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> values_;
};

/// C[i][j] = 1 - cos(x_i, y_j).
using CostMatrix = SquareMatrix;

/// Supply (row) and demand (column) masses.
struct Marginals {
  std::vector<double> s;
  std::vector<double> d;

  static Marginals uniform(std::size_t n);
  /// Throws ShapeMismatch / InvalidInput unless both have length n, strictly
  /// positive entries, and unit total mass.
  void validate(std::size_t n) const;
};

struct SinkhornParams {
  double lambda = 10.0;
  int iterations = 10;
  double epsilon = 1e-30;

  void validate() const;
};

/// Above this lambda sinkhorn() iterates on log-scalings.
inline constexpr double kLogDomainLambda = 50.0;

enum class Axis { Rows, Columns };

struct TransportPlan {
  SquareMatrix p;
  /// Marginal that holds exactly; the last scaling was applied along it.
  Axis converged_axis = Axis::Columns;
  int iterations_used = 0;
  /// Row -> column matching; filled by exact_plan only.
  std::vector<int> assignment;

  std::size_t n() const { return p.n(); }
};

/// Throws ShapeMismatch unless x and y have the same n and d. Rows are
/// normalized internally; zero rows count as e1.
CostMatrix cost_matrix(const FeatureMap& x, const FeatureMap& y);

/**
 * Entropic optimal transport by Sinkhorn-Knopp scaling.
 *
 * Runs exactly p.iterations rounds of row then column scaling of the kernel
 * K = max(exp(-lambda * C), epsilon), so the column marginal of the result is
 * exact. For lambda above kLogDomainLambda the same iteration runs on log
 * scalings without the floor.
 *
 * Throws NumericalUnderflow if a scaling denominator vanishes or overflows.
 */
TransportPlan sinkhorn(const CostMatrix& c, const Marginals& m, const SinkhornParams& p);

/// The plain scaling iteration regardless of lambda.
TransportPlan sinkhorn_scaling(const CostMatrix& c, const Marginals& m, const SinkhornParams& p);
/// The log-domain iteration regardless of lambda.
TransportPlan sinkhorn_log(const CostMatrix& c, const Marginals& m, const SinkhornParams& p);

/// Minimum-cost perfect matching (Hungarian, O(n^3)). Returns row -> column.
std::vector<int> min_cost_assignment(const CostMatrix& c);

/// Costs within this absolute distance of the optimum are treated as ties.
inline constexpr double kTieTolerance = 1e-10;

/**
 * Exact OT plan for uniform marginals: P* = Pi / N for the minimum-cost
 * permutation Pi. Among optimal permutations the lexicographically smallest
 * is returned.
 */
TransportPlan exact_plan(const CostMatrix& c);

/// <P, C>
double plan_cost(const TransportPlan& plan, const CostMatrix& c);
/// <P, 1 - C>
double plan_similarity(const TransportPlan& plan, const CostMatrix& c);

enum class Solver { Sinkhorn, Exact };

std::string_view to_string(Solver s);
Solver parse_solver(std::string_view name);

/// Earth Mover's similarity S(X, Y) = <P, 1 - C> under uniform marginals.
double similarity(const FeatureMap& x, const FeatureMap& y, const SinkhornParams& p,
                  Solver solver = Solver::Sinkhorn);

}  // namespace viewdiv

#endif  // VIEWDIV_TRANSPORT_HPP_
