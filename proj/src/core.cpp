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

#include "pope/core.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>
#include <unordered_set>

#include "pope/error.hpp"
#include "pope/numeric.hpp"

namespace pope {

namespace {

std::mutex& WarningMutex() {
  static std::mutex mu;
  return mu;
}

WarningHandler& Handler() {
  static WarningHandler handler = [](const std::string& msg) {
    std::cerr << "warning: " << msg << "\n";
  };
  return handler;
}

}  // namespace

void SetWarningHandler(WarningHandler handler) {
  std::lock_guard<std::mutex> lock(WarningMutex());
  Handler() = std::move(handler);
}

void Warn(const std::string& message) {
  std::lock_guard<std::mutex> lock(WarningMutex());
  if (Handler()) Handler()(message);
}

std::vector<std::size_t> LoggedSlate::LoggedIndices() const {
  std::vector<std::size_t> out;
  out.reserve(logged_ids.size());
  for (const auto& id : logged_ids) {
    auto it = std::find_if(pool.begin(), pool.end(),
                           [&](const ResponseRecord& r) { return r.id == id; });
    if (it == pool.end()) {
      throw ValidationError("query " + query_id + ": logged id \"" + id +
                            "\" not in pool");
    }
    out.push_back(static_cast<std::size_t>(it - pool.begin()));
  }
  return out;
}

std::vector<double> LoggedSlate::LoggedFeedback() const {
  std::vector<double> out;
  for (std::size_t idx : LoggedIndices()) out.push_back(pool[idx].feedback);
  return out;
}

std::vector<double> LoggedSlate::PoolFeedback() const {
  std::vector<double> out;
  out.reserve(pool.size());
  for (const auto& r : pool) out.push_back(r.feedback);
  return out;
}

void Validate(const ResponseRecord& record, const std::string& path) {
  const std::string at = path.empty() ? std::string("response") : path;
  if (record.id.empty()) throw ValidationError(at + ".id: empty id");
  if (record.token_logps) {
    if (record.token_logps->empty()) {
      throw ValidationError(at + ".token_logps: empty response");
    }
    for (std::size_t h = 0; h < record.token_logps->size(); ++h) {
      const double v = (*record.token_logps)[h];
      if (!std::isfinite(v) || v > 0.0) {
        throw ValidationError(at + ".token_logps[" + std::to_string(h) +
                              "]: invalid log-likelihood");
      }
    }
  }
  if (!std::isfinite(record.feedback) || record.feedback < 0.0) {
    throw ValidationError(at + ".feedback: negative or non-finite feedback");
  }
  if (record.embedding) {
    double sq = 0.0;
    for (double v : *record.embedding) {
      if (!std::isfinite(v)) {
        throw ValidationError(at + ".embedding: non-finite entry");
      }
      sq += v * v;
    }
    if (std::fabs(std::sqrt(sq) - 1.0) > 1e-6) {
      throw ValidationError(at + ".embedding: not unit norm");
    }
  }
}

void Validate(const LoggedSlate& slate) {
  if (slate.pool.empty()) throw ValidationError("pool: empty pool");
  std::unordered_set<std::string> ids;
  for (std::size_t j = 0; j < slate.pool.size(); ++j) {
    const std::string path = "pool[" + std::to_string(j) + "]";
    Validate(slate.pool[j], path);
    if (!ids.insert(slate.pool[j].id).second) {
      throw ValidationError(path + ".id: duplicate pool id \"" +
                            slate.pool[j].id + "\"");
    }
  }
  if (slate.logged_ids.empty()) {
    throw ValidationError("logged_ids: no logged responses");
  }
  if (slate.logged_ids.size() > slate.pool.size()) {
    throw ValidationError("logged_ids: more logged responses than pool size");
  }
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < slate.logged_ids.size(); ++i) {
    const auto& id = slate.logged_ids[i];
    const std::string path = "logged_ids[" + std::to_string(i) + "]";
    if (!ids.count(id)) {
      throw ValidationError(path + ": logged id \"" + id + "\" not in pool");
    }
    if (!seen.insert(id).second) {
      throw ValidationError(path + ": duplicate logged id \"" + id + "\"");
    }
  }
  if (slate.logging_probs) {
    const auto& probs = *slate.logging_probs;
    if (probs.size() != slate.logged_ids.size()) {
      throw ValidationError(
          "logging_probs: length must equal the number of logged ids");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!std::isfinite(probs[i]) || probs[i] <= 0.0 || probs[i] > 1.0) {
        throw ValidationError("logging_probs[" + std::to_string(i) +
                              "]: probability outside (0, 1]");
      }
      total += probs[i];
    }
    if (total > 1.0 + 1e-9) {
      throw ValidationError("logging_probs: probabilities sum above 1");
    }
  }
}

double SeqScore(std::span<const double> token_logps) {
  if (token_logps.empty()) throw ValidationError("empty response");
  CompensatedSum acc;
  for (double v : token_logps) {
    if (!std::isfinite(v) || v > 0.0) throw ValidationError("invalid log-likelihood");
    acc.Add(v);
  }
  return std::exp(acc.value() / static_cast<double>(token_logps.size()));
}

std::vector<double> Softmax(std::span<const double> logits,
                            double temperature) {
  if (logits.empty()) throw ValidationError("empty pool");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
  const double peak = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    out[j] = std::exp((logits[j] - peak) / temperature);
    total += out[j];
  }
  for (double& v : out) v /= total;
  return out;
}

void FloorAndRenormalize(std::vector<double>& probs) {
  double total = 0.0;
  for (double& v : probs) {
    v = std::max(v, kProbFloor);
    total += v;
  }
  for (double& v : probs) v /= total;
}

double SlateProbability(std::span<const double> pool_probs,
                        std::span<const std::size_t> logged) {
  if (logged.empty()) throw ValidationError("no logged responses");
  double total = 0.0;
  for (std::size_t idx : logged) {
    if (idx >= pool_probs.size()) throw ValidationError("bad logged index");
    total += pool_probs[idx];
  }
  return total;
}

double SlateProbability(const Policy& policy, const LoggedSlate& slate) {
  const auto probs = policy.PoolDistribution(slate);
  const auto logged = slate.LoggedIndices();
  // Full-pool slates carry all of a normalized distribution's mass.
  if (policy.normalized() && logged.size() == slate.pool.size()) return 1.0;
  return SlateProbability(probs, logged);
}

TabularSoftmaxPolicy::TabularSoftmaxPolicy(double temperature)
    : TabularSoftmaxPolicy(Table{}, temperature) {}

TabularSoftmaxPolicy::TabularSoftmaxPolicy(Table theta, double temperature)
    : theta_(std::move(theta)), temperature_(temperature) {
  if (!(temperature_ > 0.0) || !std::isfinite(temperature_)) {
    throw ValidationError("temperature must be a positive finite number");
  }
}

TabularSoftmaxPolicy TabularSoftmaxPolicy::Uniform(
    std::span<const LoggedSlate> slates, double temperature) {
  Table theta;
  for (const auto& slate : slates) {
    auto [it, inserted] =
        theta.emplace(slate.query_id, std::vector<double>(slate.pool.size()));
    if (!inserted && it->second.size() != slate.pool.size()) {
      throw ValidationError("query " + slate.query_id +
                            ": policy/pool size mismatch");
    }
  }
  return TabularSoftmaxPolicy(std::move(theta), temperature);
}

const std::vector<double>& TabularSoftmaxPolicy::Logits(
    const std::string& query_id) const {
  auto it = theta_.find(query_id);
  if (it == theta_.end()) {
    throw ValidationError("unparameterized query \"" + query_id + "\"");
  }
  return it->second;
}

std::vector<double> TabularSoftmaxPolicy::PoolDistribution(
    const LoggedSlate& slate) const {
  if (slate.pool.empty()) throw ValidationError("empty pool");
  const auto& logits = Logits(slate.query_id);
  if (logits.size() != slate.pool.size()) {
    throw ValidationError("query " + slate.query_id +
                          ": policy/pool size mismatch");
  }
  return Softmax(logits, temperature_);
}

ExternalLogprobPolicy::ExternalLogprobPolicy(Table table, Mode mode)
    : table_(std::move(table)), mode_(mode) {}

ExternalLogprobPolicy ExternalLogprobPolicy::FromSlates(
    std::span<const LoggedSlate> slates, Mode mode) {
  Table table;
  for (const auto& slate : slates) {
    auto& row = table[slate.query_id];
    for (const auto& r : slate.pool) {
      if (r.token_logps) row[r.id] = *r.token_logps;
    }
  }
  return ExternalLogprobPolicy(std::move(table), mode);
}

std::vector<double> ExternalLogprobPolicy::PoolDistribution(
    const LoggedSlate& slate) const {
  if (slate.pool.empty()) throw ValidationError("empty pool");
  auto q = table_.find(slate.query_id);
  std::vector<double> scores;
  scores.reserve(slate.pool.size());
  for (const auto& r : slate.pool) {
    const std::vector<double>* logps = nullptr;
    if (q != table_.end()) {
      auto it = q->second.find(r.id);
      if (it != q->second.end()) logps = &it->second;
    }
    if (logps == nullptr) {
      throw ValidationError("missing policy score for query \"" +
                            slate.query_id + "\" response \"" + r.id + "\"");
    }
    scores.push_back(SeqScore(*logps));
  }
  if (mode_ == Mode::kRaw) {
    for (double& v : scores) v = std::max(v, kProbFloor);
    return scores;
  }
  double total = 0.0;
  for (double v : scores) total += v;
  for (double& v : scores) v /= total;
  FloorAndRenormalize(scores);
  return scores;
}

}  // namespace pope
