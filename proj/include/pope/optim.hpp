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

#ifndef POPE_OPTIM_HPP_
#define POPE_OPTIM_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pope/core.hpp"
#include "pope/estimators.hpp"

namespace pope {

struct TrainConfig {
  double learning_rate = 0.1;
  int steps = 200;
  // Scales both the diversity reward and its derivative term.
  double lambda_div = 1.0;
  Clip clip = kDefaultClip;
  std::uint64_t seed = 0;
  int trace_every = 1;
  // 0 means full batch. Otherwise each step draws this many slates without
  // replacement from the seeded stream.
  std::size_t batch_size = 0;

  void Validate() const;
};

struct TraceRow {
  int step = 0;
  double objective = 0.0;
  double v_cu = 0.0;
  double v_div = 0.0;
  double grad_norm = 0.0;
  double entropy = 0.0;
};

using TrainTrace = std::vector<TraceRow>;

// Header "step,objective,v_cu,v_div,grad_norm,entropy", values at %.17g.
void WriteTraceCsv(const TrainTrace& trace, std::ostream& out);

// Same shape as TabularSoftmaxPolicy::Table.
using Gradient = std::map<std::string, std::vector<double>>;

// Decomposed objective: objective = v_cu + lambda * v_div where
// v_cu = mean_t sum_i w_i eta_i and v_div = mean_t sum_i w_i (-log pi_i).
struct ObjectiveValue {
  double objective = 0.0;
  double v_cu = 0.0;
  double v_div = 0.0;
};

ObjectiveValue PopeObjective(std::span<const LoggedSlate> slates,
                             const TabularSoftmaxPolicy& policy,
                             double lambda_div, const Clip& clip,
                             const Policy* logging_policy = nullptr);

// Score-function gradient
//   mean_t sum_i w_i grad log pi(a_i) [eta_i - lambda log pi(a_i) - lambda]
// with w_i = min(clip, pi / pi_0) held constant.
Gradient PopeGradient(std::span<const LoggedSlate> slates,
                      const TabularSoftmaxPolicy& policy, double lambda_div,
                      const Clip& clip,
                      const Policy* logging_policy = nullptr);

double GradientNorm(const Gradient& gradient);

struct GradCheckReport {
  double max_abs_error = 0.0;
  double max_rel_error = 0.0;
  std::string worst_query;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates = 0;
};

// Relative error is |a - n| / max(|a|, |n|, kGradCheckFloor).
inline constexpr double kGradCheckFloor = 1e-6;

// Central differences of the unclipped objective against PopeGradient.
GradCheckReport GradCheck(std::span<const LoggedSlate> slates,
                          const TabularSoftmaxPolicy& policy, double epsilon,
                          double lambda_div,
                          const Policy* logging_policy = nullptr);

struct TrainResult {
  TabularSoftmaxPolicy policy;
  TrainTrace trace;
  bool diverged = false;
  std::string message;
};

// Plain gradient ascent theta += lr * grad. On a non-finite objective or
// gradient the run stops, diverged is set and the trace so far is returned.
TrainResult Train(std::span<const LoggedSlate> slates,
                  const TabularSoftmaxPolicy& init, const TrainConfig& config,
                  const Policy* logging_policy = nullptr);

// Mean over slates of the pool entropy (nats).
double MeanEntropy(const Policy& policy, std::span<const LoggedSlate> slates);

// Mean over slates of sum_a pi(a) eta(a) over the whole pool.
double ExpectedFeedback(const Policy& policy,
                        std::span<const LoggedSlate> slates);

// Baseline: logit `margin` on each query's highest-feedback response, 0
// elsewhere.
TabularSoftmaxPolicy ArgmaxFeedbackPolicy(std::span<const LoggedSlate> slates,
                                          double margin = 10.0);

struct ParetoPoint {
  double lambda = 0.0;
  double utility = 0.0;
  double entropy = 0.0;
};

struct ParetoResult {
  std::vector<ParetoPoint> points;
  // Indices into points of the nondominated set, duplicates removed.
  std::vector<std::size_t> front;
};

// Nondominated indices, maximizing both utility and entropy. Identical
// points keep only their first occurrence.
std::vector<std::size_t> ParetoFront(std::span<const ParetoPoint> points);

// Trains one policy per lambda from the same init. Throws RuntimeError when
// a run diverges.
ParetoResult ParetoSweep(std::span<const LoggedSlate> slates,
                         const TabularSoftmaxPolicy& init,
                         const TrainConfig& config,
                         std::span<const double> lambdas,
                         const Policy* logging_policy = nullptr);

}  // namespace pope

#endif  // POPE_OPTIM_HPP_
