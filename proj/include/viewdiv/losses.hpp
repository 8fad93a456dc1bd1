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

#ifndef VIEWDIV_LOSSES_HPP_
#define VIEWDIV_LOSSES_HPP_

#include <cstddef>
#include <span>
#include <vector>

namespace viewdiv {

/// One query against a positive key and K negative keys (row-major K x D).
struct ContrastiveBatch {
  std::vector<double> q;
  std::vector<double> k_pos;
  std::vector<double> k_negs;
  double tau = 0.2;

  std::size_t dim() const { return q.size(); }
  std::size_t negatives() const { return q.empty() ? 0 : k_negs.size() / q.size(); }
  /// Throws InvalidInput.
  void validate() const;
};

struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> grad_q;
};

/// Logit magnitudes above this are rejected as NonFinite.
inline constexpr double kMaxLogit = 1e8;

/**
 * Contrastive log-softmax loss of the positive logit,
 *   loss = logsumexp(l) - l_+,  l = (q.k_+, q.k_-1, ..., q.k_-K) / tau,
 * with grad_q = (sum_i softmax(l)_i k_i - k_+) / tau.
 */
InfoNceResult info_nce(const ContrastiveBatch& b);

/// Teacher probabilities and student log-probabilities over the same classes.
struct DistillPair {
  std::vector<double> p_teacher;
  std::vector<double> log_p_student;

  void validate() const;
};

/// Cross-entropy -sum_k p_teacher[k] * log_p_student[k]. Classes with zero
/// teacher mass contribute nothing, even when the student assigns -inf.
double dino_ce(const DistillPair& p);

/// Shannon entropy in nats; 0 log 0 = 0.
double entropy(std::span<const double> p);

double log_sum_exp(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> logits);

}  // namespace viewdiv

#endif  // VIEWDIV_LOSSES_HPP_
