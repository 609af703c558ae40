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

#include "pope/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pope/error.hpp"
#include "pope/numeric.hpp"

namespace pope {

namespace {

void RequireSlates(std::span<const LoggedSlate> slates) {
  if (slates.empty()) throw ValidationError("no slates");
}

bool Binds(double ratio, const Clip& clip) { return clip && ratio > *clip; }

}  // namespace

double ClipWeight(double ratio, const Clip& clip) {
  return clip ? std::min(*clip, ratio) : ratio;
}

SlateTerms ComputeSlateTerms(const LoggedSlate& slate, const Policy& target,
                             const Policy* logging_policy) {
  SlateTerms terms;
  terms.target_pool = target.PoolDistribution(slate);
  terms.logged = slate.LoggedIndices();
  const bool full = terms.logged.size() == slate.pool.size();

  for (std::size_t idx : terms.logged) {
    terms.target_logged.push_back(terms.target_pool[idx]);
    terms.feedback.push_back(slate.pool[idx].feedback);
  }
  terms.target_slate = (full && target.normalized())
                           ? 1.0
                           : SlateProbability(terms.target_pool, terms.logged);

  if (slate.logging_probs) {
    if (slate.logging_probs->size() != terms.logged.size()) {
      throw ValidationError("query " + slate.query_id +
                            ": logging_probs length mismatch");
    }
    terms.logging_logged = *slate.logging_probs;
    double total = 0.0;
    for (double p : terms.logging_logged) total += p;
    terms.logging_slate = total;
  } else if (logging_policy != nullptr) {
    const auto pool = logging_policy->PoolDistribution(slate);
    for (std::size_t idx : terms.logged) {
      terms.logging_logged.push_back(pool[idx]);
    }
    terms.logging_slate = (full && logging_policy->normalized())
                              ? 1.0
                              : SlateProbability(pool, terms.logged);
  } else {
    throw ValidationError("query " + slate.query_id + ": no propensities");
  }
  for (double& p : terms.logging_logged) p = std::max(p, kProbFloor);
  terms.logging_slate = std::max(terms.logging_slate, kProbFloor);
  return terms;
}

double RewardCu(std::span<const double> feedbacks) {
  if (feedbacks.empty()) {
    Warn("collaborative-utility reward of an empty slate is 0");
    return 0.0;
  }
  return Sum(feedbacks);
}

double RewardDiv(std::span<const double> pool_probs,
                 std::span<const std::size_t> logged_indices) {
  CompensatedSum acc;
  for (std::size_t idx : logged_indices) {
    if (idx >= pool_probs.size()) throw ValidationError("bad logged index");
    const double p = pool_probs[idx];
    if (p > 0.0) acc.Add(p * std::log(p));
  }
  return acc.value();
}

double IpsCu(std::span<const LoggedSlate> slates, const Policy& target,
             const EstimatorOptions& options) {
  RequireSlates(slates);
  CompensatedSum acc;
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, target, options.logging_policy);
    const double w = ClipWeight(t.target_slate / t.logging_slate, options.clip);
    acc.Add(w * RewardCu(t.feedback));
  }
  return acc.value() / static_cast<double>(slates.size());
}

double IpsDiv(std::span<const LoggedSlate> slates, const Policy& target,
              const EstimatorOptions& options) {
  RequireSlates(slates);
  CompensatedSum acc;
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, target, options.logging_policy);
    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double w =
          ClipWeight(t.target_logged[i] / t.logging_logged[i], options.clip);
      acc.Add(w * -std::log(t.target_logged[i]));
    }
  }
  return acc.value() / static_cast<double>(slates.size());
}

double PopeLowerBound(std::span<const LoggedSlate> slates,
                      const Policy& target, const EstimatorOptions& options) {
  RequireSlates(slates);
  CompensatedSum acc;
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, target, options.logging_policy);
    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double w =
          ClipWeight(t.target_logged[i] / t.logging_logged[i], options.clip);
      acc.Add(w * (t.feedback[i] - std::log(t.target_logged[i])));
    }
  }
  return acc.value() / static_cast<double>(slates.size());
}

EstimateReport Evaluate(std::span<const LoggedSlate> slates,
                        const Policy& target, const EstimatorOptions& options) {
  RequireSlates(slates);
  CompensatedSum cu, div, bound, w_sum, w_sq;
  WeightStats stats;
  stats.min = std::numeric_limits<double>::infinity();
  stats.max = -std::numeric_limits<double>::infinity();

  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, target, options.logging_policy);
    const double slate_ratio = t.target_slate / t.logging_slate;
    if (Binds(slate_ratio, options.clip)) ++stats.slate_clipped;
    cu.Add(ClipWeight(slate_ratio, options.clip) * RewardCu(t.feedback));

    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double ratio = t.target_logged[i] / t.logging_logged[i];
      if (Binds(ratio, options.clip)) ++stats.clipped;
      const double w = ClipWeight(ratio, options.clip);
      const double neg_log = -std::log(t.target_logged[i]);
      div.Add(w * neg_log);
      bound.Add(w * (t.feedback[i] + neg_log));
      w_sum.Add(w);
      w_sq.Add(w * w);
      stats.min = std::min(stats.min, w);
      stats.max = std::max(stats.max, w);
      ++stats.count;
    }
  }

  const double n = static_cast<double>(slates.size());
  EstimateReport report;
  report.n_slates = slates.size();
  report.v_cu = cu.value() / n;
  report.v_div = div.value() / n;
  report.v_pope = report.v_cu + report.v_div;
  report.v_lower_bound = bound.value() / n;
  stats.mean = w_sum.value() / static_cast<double>(stats.count);
  const double sq = w_sq.value();
  stats.effective_sample_size =
      sq > 0.0 ? w_sum.value() * w_sum.value() / sq : 0.0;
  report.weight_stats = stats;

  for (double v : {report.v_cu, report.v_div, report.v_pope,
                   report.v_lower_bound, stats.effective_sample_size}) {
    if (!std::isfinite(v)) throw RuntimeError("non-finite estimate");
  }
  return report;
}

double OracleValue(const EnumerableInstance& instance,
                   OracleObjective objective) {
  if (instance.probs.size() > kEnumerationLimit) {
    throw ValidationError("enumeration limit: pool of " +
                          std::to_string(instance.probs.size()) +
                          " exceeds " + std::to_string(kEnumerationLimit));
  }
  if (instance.probs.empty()) throw ValidationError("empty pool");
  if (instance.feedback.size() != instance.probs.size()) {
    throw ValidationError("feedback/pool size mismatch");
  }
  CompensatedSum acc;
  for (std::size_t a = 0; a < instance.probs.size(); ++a) {
    const double p = instance.probs[a];
    if (p <= 0.0) continue;
    double g = 0.0;
    switch (objective) {
      case OracleObjective::kCu:
        g = instance.feedback[a];
        break;
      case OracleObjective::kDiv:
        g = -std::log(p);
        break;
      case OracleObjective::kBound:
        g = instance.feedback[a] - std::log(p);
        break;
    }
    acc.Add(p * g);
  }
  return static_cast<double>(instance.k) * acc.value();
}

double OracleValue(const LoggedSlate& slate, const Policy& target,
                   OracleObjective objective) {
  if (slate.pool.size() > kEnumerationLimit) {
    throw ValidationError("enumeration limit: query " + slate.query_id +
                          " has a pool of " +
                          std::to_string(slate.pool.size()));
  }
  EnumerableInstance instance{target.PoolDistribution(slate),
                              slate.PoolFeedback(), slate.logged_ids.size()};
  return OracleValue(instance, objective);
}

double OracleValue(std::span<const LoggedSlate> slates, const Policy& target,
                   OracleObjective objective) {
  RequireSlates(slates);
  CompensatedSum acc;
  for (const auto& slate : slates) {
    acc.Add(OracleValue(slate, target, objective));
  }
  return acc.value() / static_cast<double>(slates.size());
}

AuditReport InequalityAudit(std::span<const LoggedSlate> slates,
                            const Policy& target,
                            const Policy* logging_policy) {
  RequireSlates(slates);
  AuditReport report;
  std::size_t satisfied = 0;
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, target, logging_policy);
    const double slate_weight = t.target_slate / t.logging_slate;
    CompensatedSum div, rhs;
    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double w = t.target_logged[i] / t.logging_logged[i];
      const double neg_log = -std::log(t.target_logged[i]);
      div.Add(w * neg_log);
      rhs.Add(w * (t.feedback[i] + neg_log));
    }
    AuditRow row;
    row.query_id = slate.query_id;
    row.lhs = slate_weight * RewardCu(t.feedback) + div.value();
    row.rhs = rhs.value();
    const double tol = 1e-12 * std::max(1.0, std::fabs(row.rhs));
    row.equality = std::fabs(row.lhs - row.rhs) <= tol;
    row.satisfied = row.lhs >= row.rhs - tol;
    if (row.satisfied) ++satisfied;
    if (row.equality) ++report.equality_count;
    report.rows.push_back(std::move(row));
  }
  report.satisfied_fraction =
      static_cast<double>(satisfied) / static_cast<double>(slates.size());
  return report;
}

}  // namespace pope
