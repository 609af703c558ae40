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

#ifndef POPE_CORE_HPP_
#define POPE_CORE_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pope {

struct ResponseRecord {
  std::string id;
  std::string text;
  // Per-token natural-log likelihoods under the logging policy.
  std::optional<std::vector<double>> token_logps;
  // Human feedback (upvotes, relevance); finite and >= 0.
  double feedback = 0.0;
  // Precomputed unit-norm embedding.
  std::optional<std::vector<double>> embedding;

  bool operator==(const ResponseRecord&) const = default;
};

// One query, its full candidate pool, and the K responses that were shown.
struct LoggedSlate {
  std::string query_id;
  std::string query_text;
  std::vector<ResponseRecord> pool;
  std::vector<std::string> logged_ids;
  // pi_0 probability of each logged response, normalized over the pool.
  std::optional<std::vector<double>> logging_probs;

  // Pool positions of logged_ids, in logged order.
  std::vector<std::size_t> LoggedIndices() const;
  std::vector<double> LoggedFeedback() const;
  std::vector<double> PoolFeedback() const;

  bool operator==(const LoggedSlate&) const = default;
};

// Throw ValidationError naming the offending field path.
void Validate(const ResponseRecord& record, const std::string& path = "");
void Validate(const LoggedSlate& slate);

// Length-normalized sequence probability: exp(mean token log-likelihood).
double SeqScore(std::span<const double> token_logps);

// Numerically stable softmax of logits / temperature.
std::vector<double> Softmax(std::span<const double> logits,
                            double temperature = 1.0);

// Applies the kProbFloor floor and renormalizes in place.
void FloorAndRenormalize(std::vector<double>& probs);

class Policy {
 public:
  virtual ~Policy() = default;

  // p(a_j | x) for every pool member, in pool order.
  virtual std::vector<double> PoolDistribution(
      const LoggedSlate& slate) const = 0;

  // False only for comparison modes whose output is not a distribution.
  virtual bool normalized() const { return true; }
};

// Sum of pool probabilities over the logged responses.
double SlateProbability(const Policy& policy, const LoggedSlate& slate);
double SlateProbability(std::span<const double> pool_probs,
                        std::span<const std::size_t> logged);

class TabularSoftmaxPolicy : public Policy {
 public:
  using Table = std::map<std::string, std::vector<double>>;

  explicit TabularSoftmaxPolicy(double temperature = 1.0);
  TabularSoftmaxPolicy(Table theta, double temperature = 1.0);

  // All-zero logits sized to each query's pool.
  static TabularSoftmaxPolicy Uniform(std::span<const LoggedSlate> slates,
                                      double temperature = 1.0);

  double temperature() const { return temperature_; }
  const Table& theta() const { return theta_; }
  Table& mutable_theta() { return theta_; }

  // Throws "unparameterized query" when absent.
  const std::vector<double>& Logits(const std::string& query_id) const;

  std::vector<double> PoolDistribution(
      const LoggedSlate& slate) const override;

 private:
  Table theta_;
  double temperature_;
};

// Scores each response by SeqScore over externally supplied token
// log-likelihoods. In kPoolNormalized mode (the default) scores are divided by
// the pool sum, floored and renormalized. kRaw returns the floored raw
// sequence scores untouched, for comparison only.
class ExternalLogprobPolicy : public Policy {
 public:
  enum class Mode { kPoolNormalized, kRaw };
  // query_id -> response id -> token log-likelihoods
  using Table =
      std::map<std::string, std::map<std::string, std::vector<double>>>;

  explicit ExternalLogprobPolicy(Table table,
                                 Mode mode = Mode::kPoolNormalized);

  // Collects token_logps from every pool member; members without them are
  // simply absent from the table.
  static ExternalLogprobPolicy FromSlates(std::span<const LoggedSlate> slates,
                                          Mode mode = Mode::kPoolNormalized);

  const Table& table() const { return table_; }
  Mode mode() const { return mode_; }

  std::vector<double> PoolDistribution(
      const LoggedSlate& slate) const override;
  bool normalized() const override { return mode_ == Mode::kPoolNormalized; }

 private:
  Table table_;
  Mode mode_;
};

}  // namespace pope

#endif  // POPE_CORE_HPP_
