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

#ifndef POPE_DATA_HPP_
#define POPE_DATA_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pope/core.hpp"
#include "pope/metrics.hpp"
#include "pope/rng.hpp"

namespace pope {

// ---- Logged datasets (JSONL, one LoggedSlate per line) ----

// Validates every slate; errors carry "line N: <field path>: <problem>".
std::vector<LoggedSlate> ParseDataset(std::string_view text);
std::vector<LoggedSlate> LoadDataset(const std::filesystem::path& path);

std::string SerializeSlate(const LoggedSlate& slate);
std::string SerializeDataset(std::span<const LoggedSlate> slates);
void SaveDataset(std::span<const LoggedSlate> slates,
                 const std::filesystem::path& path);

// Token log-likelihood table read from any dataset-format file; only the
// query_id, pool[].id and pool[].token_logps keys are consulted.
ExternalLogprobPolicy LoadLogprobPolicy(
    const std::filesystem::path& path,
    ExternalLogprobPolicy::Mode mode =
        ExternalLogprobPolicy::Mode::kPoolNormalized);

// ---- Tabular policy checkpoints ----
// { "temperature": t, "theta": { "<query_id>": [logits...] } }
// Numbers are written with 17 significant digits so reloading is exact.

std::string SerializePolicy(const TabularSoftmaxPolicy& policy);
TabularSoftmaxPolicy ParsePolicy(std::string_view text);
void SavePolicy(const TabularSoftmaxPolicy& policy,
                const std::filesystem::path& path);
TabularSoftmaxPolicy LoadPolicy(const std::filesystem::path& path);

// Throws "policy/pool size mismatch" or "unparameterized query".
void CheckPolicyCovers(const TabularSoftmaxPolicy& policy,
                       std::span<const LoggedSlate> slates);

// ---- Generation/reference files for metrics (JSONL) ----

std::vector<GenerationSet> ParseGenerations(std::string_view text);
std::vector<GenerationSet> LoadGenerations(const std::filesystem::path& path);

// ---- Plackett-Luce sampling and simulation ----

// Ranking prefix of length k: each stage picks j among the remaining indices
// with probability w_j / sum(remaining w).
std::vector<std::size_t> PlSample(std::span<const double> weights,
                                  std::size_t k, Rng& rng);

enum class FeedbackModel { kPlackettLuce, kLinear };

struct SimConfig {
  std::size_t n_queries = 50;
  std::size_t pool_size = 6;
  std::size_t slate_size = 3;
  double logging_temperature = 1.0;
  FeedbackModel feedback_model = FeedbackModel::kPlackettLuce;
  double pl_scale = 1.5;
  std::size_t annotators = 20;
  // Each annotator upvotes the top entries of a full PL ranking; 0 means
  // ceil(pool_size / 2).
  std::size_t upvote_depth = 0;
  // Standard deviation of additive noise in the linear feedback model.
  double linear_noise = 0.1;
  std::uint64_t seed = 7;

  void Validate() const;
  std::size_t ResolvedUpvoteDepth() const;
};

inline constexpr const char* kSlateSampler =
    "iid-from-logging-policy-with-duplicate-redraw";

// Per query t (stream Rng::Stream(seed, t)): latent quality q ~ N(0, 1) per
// pool response; pi_0 = softmax(q / logging_temperature), floored; K
// distinct logged responses by iid draws from pi_0 with duplicate re-draw;
// feedback from the configured model. Every response carries token_logps
// whose sequence score equals its pi_0 probability, so the dataset doubles
// as a logprob file for the logging policy.
std::vector<LoggedSlate> Simulate(const SimConfig& config);

// Latent qualities used by Simulate for query t, for tests and diagnostics.
std::vector<double> SimulatedQuality(const SimConfig& config, std::size_t t);

}  // namespace pope

#endif  // POPE_DATA_HPP_
