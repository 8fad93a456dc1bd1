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

#include "viewdiv/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "viewdiv/error.hpp"

namespace viewdiv {

void ContrastiveBatch::validate() const {
  VIEWDIV_ENFORCE(tau > 0.0 && std::isfinite(tau), ErrorKind::InvalidInput, "tau must be positive");
  VIEWDIV_ENFORCE(!q.empty(), ErrorKind::InvalidInput, "empty query");
  VIEWDIV_ENFORCE(k_pos.size() == q.size(), ErrorKind::InvalidInput,
                  "positive key dimension differs from query");
  VIEWDIV_ENFORCE(k_negs.size() % q.size() == 0, ErrorKind::InvalidInput,
                  "negative keys are not a multiple of the query dimension");
  for (const auto* v : {&q, &k_pos, &k_negs}) {
    VIEWDIV_ENFORCE(std::all_of(v->begin(), v->end(), [](double x) { return std::isfinite(x); }),
                    ErrorKind::InvalidInput, "non-finite vector entry");
  }
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

std::vector<double> log_softmax(std::span<const double> logits) {
  const double z = log_sum_exp(logits);
  std::vector<double> out(logits.begin(), logits.end());
  for (double& x : out) x -= z;
  return out;
}

InfoNceResult info_nce(const ContrastiveBatch& b) {
  b.validate();
  const std::size_t dim = b.dim();
  const std::size_t k = b.negatives();
  auto key = [&](std::size_t i) -> std::span<const double> {
    if (i == 0) return b.k_pos;
    return std::span<const double>(b.k_negs).subspan((i - 1) * dim, dim);
  };

  std::vector<double> logits(k + 1);
  for (std::size_t i = 0; i <= k; ++i) {
    const auto ki = key(i);
    const double dot = std::inner_product(b.q.begin(), b.q.end(), ki.begin(), 0.0);
    logits[i] = dot / b.tau;
    VIEWDIV_ENFORCE(std::isfinite(logits[i]) && std::abs(logits[i]) <= kMaxLogit,
                    ErrorKind::NonFinite, "logit magnitude exceeds 1e8");
  }

  // Loss and gradient are computed from logit differences against the positive.
  std::vector<double> d(k);
  for (std::size_t i = 1; i <= k; ++i) {
    const auto ki = key(i);
    double dot = 0.0;
    for (std::size_t t = 0; t < dim; ++t) dot += b.q[t] * (ki[t] - b.k_pos[t]);
    d[i - 1] = dot / b.tau;
  }
  const double m = std::max(0.0, d.empty() ? 0.0 : *std::max_element(d.begin(), d.end()));
  double tail = 0.0;
  for (double di : d) tail += std::exp(di - m);
  const double s = std::exp(-m) + tail;

  InfoNceResult r;
  r.loss = m == 0.0 ? std::log1p(tail) : m + std::log(s);
  r.grad_q.assign(dim, 0.0);
  for (std::size_t i = 1; i <= k; ++i) {
    const double w = std::exp(d[i - 1] - m) / s;
    const auto ki = key(i);
    for (std::size_t t = 0; t < dim; ++t) r.grad_q[t] += w * (ki[t] - b.k_pos[t]);
  }
  for (double& g : r.grad_q) g /= b.tau;
  VIEWDIV_ENFORCE(std::isfinite(r.loss), ErrorKind::NonFinite, "loss is not finite");
  return r;
}

void DistillPair::validate() const {
  VIEWDIV_ENFORCE(!p_teacher.empty() && p_teacher.size() == log_p_student.size(),
                  ErrorKind::InvalidInput, "teacher and student must cover the same classes");
  double total = 0.0;
  for (double p : p_teacher) {
    VIEWDIV_ENFORCE(p >= 0.0 && std::isfinite(p), ErrorKind::InvalidInput,
                    "teacher probabilities must be finite and non-negative");
    total += p;
  }
  VIEWDIV_ENFORCE(std::abs(total - 1.0) <= 1e-9, ErrorKind::InvalidInput,
                  "teacher probabilities must sum to 1");
  for (double l : log_p_student) {
    VIEWDIV_ENFORCE(l <= 0.0 && !std::isnan(l), ErrorKind::InvalidInput,
                    "student log-probabilities must be <= 0");
  }
  VIEWDIV_ENFORCE(std::abs(log_sum_exp(log_p_student)) <= 1e-6, ErrorKind::InvalidInput,
                  "student log-probabilities must normalize");
}

double dino_ce(const DistillPair& p) {
  p.validate();
  double loss = 0.0;
  for (std::size_t k = 0; k < p.p_teacher.size(); ++k) {
    if (p.p_teacher[k] == 0.0) continue;
    loss -= p.p_teacher[k] * p.log_p_student[k];
  }
  return loss;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return h;
}

}  // namespace viewdiv
