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

#include "pope/optim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "pope/error.hpp"
#include "pope/numeric.hpp"
#include "pope/rng.hpp"

namespace pope {

namespace {

bool AllFinite(const Gradient& gradient) {
  for (const auto& [_, row] : gradient) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

std::vector<LoggedSlate> DrawBatch(std::span<const LoggedSlate> slates,
                                   std::size_t batch_size, Rng& rng) {
  std::vector<std::size_t> order(slates.size());
  std::iota(order.begin(), order.end(), 0);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < batch_size; ++i) {
    const std::size_t j = i + rng.Index(order.size() - i);
    std::swap(order[i], order[j]);
  }
  std::vector<LoggedSlate> batch;
  batch.reserve(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    batch.push_back(slates[order[i]]);
  }
  return batch;
}

}  // namespace

void WriteTraceCsv(const TrainTrace& trace, std::ostream& out) {
  out << "step,objective,v_cu,v_div,grad_norm,entropy\n";
  char buf[256];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  row.step, row.objective, row.v_cu, row.v_div, row.grad_norm,
                  row.entropy);
    out << buf;
  }
}

void TrainConfig::Validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ValidationError("learning_rate must be a finite number >= 0");
  }
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (!(lambda_div >= 0.0) || !std::isfinite(lambda_div)) {
    throw ValidationError("lambda_div must be a finite number >= 0");
  }
  if (clip && !(*clip > 0.0)) throw ValidationError("clip must be > 0");
  if (trace_every < 1) throw ValidationError("trace_every must be >= 1");
}

ObjectiveValue PopeObjective(std::span<const LoggedSlate> slates,
                             const TabularSoftmaxPolicy& policy,
                             double lambda_div, const Clip& clip,
                             const Policy* logging_policy) {
  if (slates.empty()) throw ValidationError("no slates");
  CompensatedSum cu, div;
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, policy, logging_policy);
    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double w =
          ClipWeight(t.target_logged[i] / t.logging_logged[i], clip);
      cu.Add(w * t.feedback[i]);
      div.Add(w * -std::log(t.target_logged[i]));
    }
  }
  const double n = static_cast<double>(slates.size());
  ObjectiveValue out;
  out.v_cu = cu.value() / n;
  out.v_div = div.value() / n;
  out.objective = out.v_cu + lambda_div * out.v_div;
  return out;
}

Gradient PopeGradient(std::span<const LoggedSlate> slates,
                      const TabularSoftmaxPolicy& policy, double lambda_div,
                      const Clip& clip, const Policy* logging_policy) {
  if (slates.empty()) throw ValidationError("no slates");
  Gradient grad;
  const double n = static_cast<double>(slates.size());
  const double inv_temp = 1.0 / policy.temperature();
  for (const auto& slate : slates) {
    const auto t = ComputeSlateTerms(slate, policy, logging_policy);
    auto& row = grad[slate.query_id];
    row.resize(t.target_pool.size(), 0.0);
    for (std::size_t i = 0; i < t.logged.size(); ++i) {
      const double pi = t.target_logged[i];
      const double w = ClipWeight(pi / t.logging_logged[i], clip);
      const double coeff =
          w * (t.feedback[i] - lambda_div * std::log(pi) - lambda_div) / n;
      // d log softmax_a / d theta_j = (1[j == a] - p_j) / T
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double indicator = (j == t.logged[i]) ? 1.0 : 0.0;
        row[j] += coeff * (indicator - t.target_pool[j]) * inv_temp;
      }
    }
  }
  return grad;
}

double GradientNorm(const Gradient& gradient) {
  CompensatedSum acc;
  for (const auto& [_, row] : gradient) {
    for (double v : row) acc.Add(v * v);
  }
  return std::sqrt(acc.value());
}

GradCheckReport GradCheck(std::span<const LoggedSlate> slates,
                          const TabularSoftmaxPolicy& policy, double epsilon,
                          double lambda_div, const Policy* logging_policy) {
  if (!(epsilon >= 1e-8 && epsilon <= 1e-2)) {
    throw ValidationError("epsilon must lie in [1e-8, 1e-2]");
  }
  const Clip unclipped;
  const Gradient analytic =
      PopeGradient(slates, policy, lambda_div, unclipped, logging_policy);

  GradCheckReport report;
  TabularSoftmaxPolicy probe = policy;
  for (const auto& [query_id, row] : analytic) {
    auto& logits = probe.mutable_theta().at(query_id);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const double saved = logits[j];
      logits[j] = saved + epsilon;
      const double up =
          PopeObjective(slates, probe, lambda_div, unclipped, logging_policy)
              .objective;
      logits[j] = saved - epsilon;
      const double down =
          PopeObjective(slates, probe, lambda_div, unclipped, logging_policy)
              .objective;
      logits[j] = saved;

      const double numeric = (up - down) / (2.0 * epsilon);
      const double abs_err = std::fabs(row[j] - numeric);
      const double scale =
          std::max({std::fabs(row[j]), std::fabs(numeric), kGradCheckFloor});
      const double rel_err = abs_err / scale;
      ++report.coordinates;
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (report.coordinates == 1 || rel_err > report.max_rel_error) {
        report.max_rel_error = rel_err;
        report.worst_query = query_id;
        report.worst_index = j;
        report.worst_analytic = row[j];
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

double MeanEntropy(const Policy& policy, std::span<const LoggedSlate> slates) {
  if (slates.empty()) throw ValidationError("no slates");
  CompensatedSum acc;
  for (const auto& slate : slates) {
    acc.Add(Entropy(policy.PoolDistribution(slate)));
  }
  return acc.value() / static_cast<double>(slates.size());
}

double ExpectedFeedback(const Policy& policy,
                        std::span<const LoggedSlate> slates) {
  if (slates.empty()) throw ValidationError("no slates");
  CompensatedSum acc;
  for (const auto& slate : slates) {
    const auto probs = policy.PoolDistribution(slate);
    for (std::size_t j = 0; j < probs.size(); ++j) {
      acc.Add(probs[j] * slate.pool[j].feedback);
    }
  }
  return acc.value() / static_cast<double>(slates.size());
}

TabularSoftmaxPolicy ArgmaxFeedbackPolicy(std::span<const LoggedSlate> slates,
                                          double margin) {
  TabularSoftmaxPolicy::Table theta;
  for (const auto& slate : slates) {
    if (slate.pool.empty()) throw ValidationError("empty pool");
    std::vector<double> logits(slate.pool.size(), 0.0);
    auto best = std::max_element(
        slate.pool.begin(), slate.pool.end(),
        [](const ResponseRecord& a, const ResponseRecord& b) {
          return a.feedback < b.feedback;
        });
    logits[static_cast<std::size_t>(best - slate.pool.begin())] = margin;
    theta[slate.query_id] = std::move(logits);
  }
  return TabularSoftmaxPolicy(std::move(theta));
}

TrainResult Train(std::span<const LoggedSlate> slates,
                  const TabularSoftmaxPolicy& init, const TrainConfig& config,
                  const Policy* logging_policy) {
  config.Validate();
  if (slates.empty()) throw ValidationError("no slates");
  const bool minibatch =
      config.batch_size > 0 && config.batch_size < slates.size();
  Rng rng(config.seed);

  TrainResult result{init, {}, false, {}};
  TabularSoftmaxPolicy& policy = result.policy;
  for (int step = 0; step <= config.steps; ++step) {
    const ObjectiveValue value = PopeObjective(
        slates, policy, config.lambda_div, config.clip, logging_policy);
    Gradient grad;
    if (minibatch) {
      const auto batch = DrawBatch(slates, config.batch_size, rng);
      grad = PopeGradient(batch, policy, config.lambda_div, config.clip,
                          logging_policy);
    } else {
      grad = PopeGradient(slates, policy, config.lambda_div, config.clip,
                          logging_policy);
    }
    const double norm = GradientNorm(grad);
    const double entropy = MeanEntropy(policy, slates);

    if (!std::isfinite(value.objective) || !AllFinite(grad) ||
        !std::isfinite(entropy)) {
      result.diverged = true;
      result.message = "diverged at step " + std::to_string(step);
      return result;
    }
    if (step % config.trace_every == 0 || step == config.steps) {
      result.trace.push_back(
          {step, value.objective, value.v_cu, value.v_div, norm, entropy});
    }
    if (step == config.steps) break;

    for (const auto& [query_id, row] : grad) {
      auto& logits = policy.mutable_theta().at(query_id);
      for (std::size_t j = 0; j < row.size(); ++j) {
        logits[j] += config.learning_rate * row[j];
      }
    }
  }
  return result;
}

std::vector<std::size_t> ParetoFront(std::span<const ParetoPoint> points) {
  std::vector<std::size_t> front;
  for (std::size_t i = 0; i < points.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < points.size() && keep; ++j) {
      if (i == j) continue;
      const bool geq = points[j].utility >= points[i].utility &&
                       points[j].entropy >= points[i].entropy;
      const bool strict = points[j].utility > points[i].utility ||
                          points[j].entropy > points[i].entropy;
      if (geq && strict) keep = false;
      // Exact duplicates: the earliest one represents the group.
      if (geq && !strict && j < i) keep = false;
    }
    if (keep) front.push_back(i);
  }
  return front;
}

ParetoResult ParetoSweep(std::span<const LoggedSlate> slates,
                         const TabularSoftmaxPolicy& init,
                         const TrainConfig& config,
                         std::span<const double> lambdas,
                         const Policy* logging_policy) {
  if (lambdas.empty()) throw ValidationError("lambdas must be non-empty");
  ParetoResult result;
  for (double lambda : lambdas) {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw ValidationError("lambda values must be finite and >= 0");
    }
    TrainConfig run = config;
    run.lambda_div = lambda;
    TrainResult trained = Train(slates, init, run, logging_policy);
    if (trained.diverged) {
      throw RuntimeError("lambda " + std::to_string(lambda) + ": " +
                         trained.message);
    }
    result.points.push_back({lambda, ExpectedFeedback(trained.policy, slates),
                             MeanEntropy(trained.policy, slates)});
  }
  result.front = ParetoFront(result.points);
  return result;
}

}  // namespace pope
