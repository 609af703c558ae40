// Copyright 2026 The POPE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef POPE_ESTIMATORS_HPP_
#define POPE_ESTIMATORS_HPP_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pope/core.hpp"

namespace pope {

inline constexpr double kDefaultClip = 10.0;

// Importance-weight truncation threshold; std::nullopt disables clipping.
using Clip = std::optional<double>;

struct EstimatorOptions {
  Clip clip = kDefaultClip;
  // Used as pi_0 for slates that carry no logging_probs. Not owned.
  const Policy* logging_policy = nullptr;
};

// Everything the estimators need from one slate under a (target, logging)
// policy pair.
struct SlateTerms {
  std::vector<double> target_pool;     // pi(a_j | x) over the pool
  std::vector<std::size_t> logged;     // pool positions of logged responses
  std::vector<double> target_logged;   // pi(a_i | x)
  std::vector<double> logging_logged;  // pi_0(a_i | x), floored at kProbFloor
  std::vector<double> feedback;        // eta_i
  double target_slate = 0.0;           // pi(S | x)
  double logging_slate = 0.0;          // pi_0(S | x), floored at kProbFloor
};

SlateTerms ComputeSlateTerms(const LoggedSlate& slate, const Policy& target,
                             const Policy* logging_policy = nullptr);

// min(clip, ratio); unclipped when clip is empty.
double ClipWeight(double ratio, const Clip& clip);

// Collaborative-utility reward: sum of feedback over the slate.
double RewardCu(std::span<const double> feedbacks);

// Sum over logged positions of p * log p. Non-positive by construction.
double RewardDiv(std::span<const double> pool_probs,
                 std::span<const std::size_t> logged_indices);

// Slate-weighted collaborative-utility IPS estimate.
double IpsCu(std::span<const LoggedSlate> slates, const Policy& target,
             const EstimatorOptions& options = {});

// Per-response weighted -log pi estimate.
double IpsDiv(std::span<const LoggedSlate> slates, const Policy& target,
              const EstimatorOptions& options = {});

// Per-response decomposed form: mean over slates of
// sum_i w_i * (eta_i - log pi(a_i | x)).
double PopeLowerBound(std::span<const LoggedSlate> slates,
                      const Policy& target,
                      const EstimatorOptions& options = {});

struct WeightStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double effective_sample_size = 0.0;
  std::size_t count = 0;          // per-response weights
  std::size_t clipped = 0;        // per-response weights where the clip bound
  std::size_t slate_clipped = 0;  // slate-level weights where the clip bound
};

struct EstimateReport {
  double v_cu = 0.0;
  double v_div = 0.0;
  double v_pope = 0.0;
  double v_lower_bound = 0.0;
  std::size_t n_slates = 0;
  WeightStats weight_stats;
};

// Throws ValidationError("no slates") on an empty dataset and RuntimeError if
// any estimate is non-finite.
EstimateReport Evaluate(std::span<const LoggedSlate> slates,
                        const Policy& target,
                        const EstimatorOptions& options = {});

enum class OracleObjective { kCu, kDiv, kBound };

inline constexpr std::size_t kEnumerationLimit = 12;

// A pool small enough to enumerate: target probabilities, per-response
// feedback and the slate size.
struct EnumerableInstance {
  std::vector<double> probs;
  std::vector<double> feedback;
  std::size_t k = 1;
};

// Exact K * sum_a pi(a) g(a) with g = eta, -log pi, or eta - log pi.
double OracleValue(const EnumerableInstance& instance,
                   OracleObjective objective);
double OracleValue(const LoggedSlate& slate, const Policy& target,
                   OracleObjective objective);
// Mean of the per-slate oracle over a dataset.
double OracleValue(std::span<const LoggedSlate> slates, const Policy& target,
                   OracleObjective objective);

struct AuditRow {
  std::string query_id;
  double lhs = 0.0;  // slate-weighted CU term + per-response diversity term
  double rhs = 0.0;  // per-response decomposed sum
  bool satisfied = false;
  bool equality = false;
};

struct AuditReport {
  std::vector<AuditRow> rows;
  double satisfied_fraction = 0.0;
  std::size_t equality_count = 0;
};

// Compares both sides of the decomposed lower bound slate by slate with
// clipping disabled. Reports; never asserts that the bound holds.
AuditReport InequalityAudit(std::span<const LoggedSlate> slates,
                            const Policy& target,
                            const Policy* logging_policy = nullptr);

}  // namespace pope

#endif  // POPE_ESTIMATORS_HPP_
