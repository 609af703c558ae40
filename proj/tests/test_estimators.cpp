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

#include <cmath>
#include <limits>
#include <vector>

#include "gtest/gtest.h"
#include "pope/core.hpp"
#include "pope/data.hpp"
#include "pope/error.hpp"
#include "pope/estimators.hpp"
#include "pope/numeric.hpp"
#include "pope/rng.hpp"
#include "test_util.hpp"

namespace pope {
namespace {

using testing::LogitsFor;
using testing::MakeSlate;

const std::vector<double> kLogging{0.5, 0.3, 0.2};
const std::vector<double> kTarget{0.2, 0.3, 0.5};
const std::vector<double> kFeedback{1.0, 0.0, 2.0};

// Hand arithmetic: 0.2*1 + 0.3*0 + 0.5*2.
constexpr double kCuValue = 1.2;
// -(0.2 ln 0.2 + 0.3 ln 0.3 + 0.5 ln 0.5).
constexpr double kEntropy = 1.0296530140645735;
constexpr double kBoundValue = kCuValue + kEntropy;

// Audit of the uniform policy on 200 simulated queries (seed 7).
constexpr double kRecordedAuditFraction = 0.245;

TabularSoftmaxPolicy TargetPolicy(const std::string& qid = "e") {
  return TabularSoftmaxPolicy({{qid, LogitsFor(kTarget)}});
}

EstimatorOptions Unclipped() { return EstimatorOptions{std::nullopt, nullptr}; }

TEST(RewardTest, CollaborativeUtility) {
  EXPECT_EQ(RewardCu(std::vector<double>{1.0, 2.0, 0.5}), 3.5);
  EXPECT_EQ(RewardCu(std::vector<double>{0, 0, 0}), 0.0);
  EXPECT_EQ(RewardCu(std::vector<double>{7.0}), 7.0);
  int warnings = 0;
  SetWarningHandler([&](const std::string&) { ++warnings; });
  EXPECT_EQ(RewardCu(std::vector<double>{}), 0.0);
  SetWarningHandler(nullptr);
  EXPECT_EQ(warnings, 1);
}

TEST(RewardTest, Diversity) {
  const std::vector<std::size_t> both{0, 1};
  EXPECT_NEAR(RewardDiv(std::vector<double>{0.5, 0.5}, both),
              -0.69314718055994531, 1e-15);
  std::vector<double> certain{1.0 - kProbFloor, kProbFloor};
  EXPECT_NEAR(RewardDiv(certain, std::vector<std::size_t>{0}), 0.0, 1e-7);
  const std::vector<std::size_t> all{0, 1, 2};
  EXPECT_NEAR(RewardDiv(kTarget, all), -kEntropy, 1e-15);
  EXPECT_THROW(RewardDiv(kTarget, std::vector<std::size_t>{3}), Error);
}

TEST(IpsCuTest, SingleSlateDirectFormula) {
  // pi(S) = 0.5 + 0.3 = 0.8, pi0(S) = 0.4, sum of feedback = 2.
  auto slate = MakeSlate("q", {1.5, 0.5, 9.0}, {0, 1});
  slate.logging_probs = std::vector<double>{0.2, 0.2};
  const TabularSoftmaxPolicy policy({{"q", LogitsFor({0.5, 0.3, 0.2})}});
  const std::vector<LoggedSlate> data{slate};
  EXPECT_NEAR(IpsCu(data, policy, Unclipped()), 4.0, 1e-12);
  EXPECT_NEAR(IpsCu(data, policy), 4.0, 1e-12);
}

TEST(IpsCuTest, MissingPropensities) {
  const std::vector<LoggedSlate> data{MakeSlate("q", {1, 2}, {0})};
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  try {
    IpsCu(data, policy);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("no propensities"), std::string::npos);
  }
}

TEST(IpsCuTest, LoggingPolicyFillsPropensities) {
  // Propensities come from the external policy when slates carry none.
  std::vector<LoggedSlate> data{MakeSlate("q", {1, 2, 3}, {2}, kLogging)};
  data[0].logging_probs.reset();
  const auto logging = ExternalLogprobPolicy::FromSlates(data);
  const TabularSoftmaxPolicy policy({{"q", LogitsFor(kTarget)}});
  EstimatorOptions options{std::nullopt, &logging};
  EXPECT_NEAR(IpsCu(data, policy, options), 0.5 / 0.2 * 3.0, 1e-12);
}

TEST(IpsDivTest, DirectFormula) {
  auto slate = MakeSlate("q", {1, 1}, {0});
  slate.logging_probs = std::vector<double>{0.25};
  const auto policy =
      TabularSoftmaxPolicy::Uniform(std::span<const LoggedSlate>(&slate, 1));
  const std::vector<LoggedSlate> data{slate};
  EXPECT_NEAR(IpsDiv(data, policy), 2.0 * std::log(2.0), 1e-12);
}

TEST(IpsDivTest, UnitWeightUniform) {
  const std::vector<LoggedSlate> data{
      MakeSlate("q", {0, 0, 0, 0}, {2}, {0.25, 0.25, 0.25, 0.25})};
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  EXPECT_NEAR(IpsDiv(data, policy), std::log(4.0), 1e-12);
}

TEST(LowerBoundTest, UnitWeight) {
  const std::vector<LoggedSlate> data{MakeSlate("q", {1.0, 0.0}, {0}, {0.5, 0.5})};
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  EXPECT_NEAR(PopeLowerBound(data, policy), 1.0 + std::log(2.0), 1e-12);
}

TEST(LowerBoundTest, ZeroFeedbackEqualsDiversityEstimate) {
  Rng rng(11);
  std::vector<LoggedSlate> data;
  TabularSoftmaxPolicy::Table theta;
  for (int t = 0; t < 6; ++t) {
    const std::string qid = "z" + std::to_string(t);
    data.push_back(MakeSlate(qid, {0, 0, 0, 0}, {1, 3},
                             testing::RandomSimplex(4, rng)));
    theta[qid] = {rng.Normal(), rng.Normal(), rng.Normal(), rng.Normal()};
  }
  const TabularSoftmaxPolicy policy(theta);
  EXPECT_EQ(PopeLowerBound(data, policy), IpsDiv(data, policy));
  EXPECT_EQ(PopeLowerBound(data, policy, Unclipped()),
            IpsDiv(data, policy, Unclipped()));
}

// Every single-response log of the enumerable instance, weighted by its
// logging probability.
double EnumerateExpectation(double (*estimator)(std::span<const LoggedSlate>,
                                                const Policy&,
                                                const EstimatorOptions&)) {
  const auto policy = TargetPolicy();
  CompensatedSum acc;
  for (std::size_t a = 0; a < 3; ++a) {
    const std::vector<LoggedSlate> log{MakeSlate("e", kFeedback, {a}, kLogging)};
    acc.Add(kLogging[a] * estimator(log, policy, Unclipped()));
  }
  return acc.value();
}

TEST(EnumerationTest, ExpectationsMatchHandValues) {
  EXPECT_NEAR(EnumerateExpectation(&IpsCu), kCuValue, 1e-12);
  EXPECT_NEAR(EnumerateExpectation(&IpsDiv), kEntropy, 1e-12);
  EXPECT_NEAR(EnumerateExpectation(&PopeLowerBound), kBoundValue, 1e-12);
}

TEST(EnumerationTest, OracleMatchesHandValues) {
  const EnumerableInstance inst{kTarget, kFeedback, 1};
  EXPECT_NEAR(OracleValue(inst, OracleObjective::kCu), kCuValue, 1e-15);
  EXPECT_NEAR(OracleValue(inst, OracleObjective::kDiv), kEntropy, 1e-15);
  EXPECT_NEAR(OracleValue(inst, OracleObjective::kBound), kBoundValue, 1e-15);
  const EnumerableInstance twice{kTarget, kFeedback, 2};
  EXPECT_NEAR(OracleValue(twice, OracleObjective::kBound), 2 * kBoundValue,
              1e-14);
}

TEST(EnumerationTest, MultiResponseLogsWithReplacement) {
  // K = 2 draws i.i.d. from pi0; per-response terms add up, so the
  // expectation over all 9 ordered pairs is K times the single-draw value.
  const auto policy = TargetPolicy();
  CompensatedSum acc;
  for (std::size_t a = 0; a < 3; ++a) {
    for (std::size_t b = 0; b < 3; ++b) {
      double term = 0.0;
      for (std::size_t x : {a, b}) {
        const std::vector<LoggedSlate> log{
            MakeSlate("e", kFeedback, {x}, kLogging)};
        term += PopeLowerBound(log, policy, Unclipped());
      }
      acc.Add(kLogging[a] * kLogging[b] * term);
    }
  }
  const EnumerableInstance inst{kTarget, kFeedback, 2};
  EXPECT_NEAR(acc.value(), OracleValue(inst, OracleObjective::kBound), 1e-12);
}

TEST(EnumerationTest, OracleFromSlateAndPolicy) {
  const std::vector<LoggedSlate> data{MakeSlate("e", kFeedback, {0}, kLogging)};
  const auto policy = TargetPolicy();
  EXPECT_NEAR(OracleValue(data[0], policy, OracleObjective::kCu), kCuValue,
              1e-15);
  EXPECT_NEAR(OracleValue(data, policy, OracleObjective::kBound), kBoundValue,
              1e-14);
}

TEST(OracleTest, ConstantFeedbackUnderUniform) {
  const EnumerableInstance inst{{0.25, 0.25, 0.25, 0.25}, {3, 3, 3, 3}, 1};
  EXPECT_NEAR(OracleValue(inst, OracleObjective::kCu), 3.0, 1e-15);
}

TEST(OracleTest, DeterministicPolicyHasNoDiversity) {
  const EnumerableInstance inst{
      {1.0 - 2 * kProbFloor, kProbFloor, kProbFloor}, {0, 0, 0}, 1};
  EXPECT_NEAR(OracleValue(inst, OracleObjective::kDiv), 0.0, 1e-6);
}

TEST(OracleTest, EnumerationLimit) {
  const EnumerableInstance inst{std::vector<double>(13, 1.0 / 13),
                                std::vector<double>(13, 0.0), 1};
  EXPECT_THROW(OracleValue(inst, OracleObjective::kCu), Error);
}

TEST(MonteCarloTest, EstimatorsConvergeToOracle) {
  constexpr int kDraws = 100000;
  Rng rng = Rng::Stream(2026, 1);
  std::vector<LoggedSlate> data;
  data.reserve(kDraws);
  const std::vector<LoggedSlate> templates{
      MakeSlate("e", kFeedback, {0}, kLogging),
      MakeSlate("e", kFeedback, {1}, kLogging),
      MakeSlate("e", kFeedback, {2}, kLogging)};
  for (int n = 0; n < kDraws; ++n) {
    const double u = rng.Uniform();
    data.push_back(templates[u < 0.5 ? 0 : (u < 0.8 ? 1 : 2)]);
  }
  const auto policy = TargetPolicy();
  EXPECT_NEAR(IpsCu(data, policy, Unclipped()) / kCuValue, 1.0, 0.01);
  EXPECT_NEAR(IpsDiv(data, policy, Unclipped()) / kEntropy, 1.0, 0.01);
  EXPECT_NEAR(PopeLowerBound(data, policy, Unclipped()) / kBoundValue, 1.0,
              0.01);
}

std::vector<LoggedSlate> RandomDataset(std::uint64_t seed,
                                       TabularSoftmaxPolicy::Table* theta) {
  Rng rng(seed);
  std::vector<LoggedSlate> data;
  for (int t = 0; t < 12; ++t) {
    const std::string qid = "r" + std::to_string(t);
    const std::size_t L = 2 + rng.Index(4);
    const std::size_t K = 1 + rng.Index(L);
    std::vector<double> feedback(L);
    for (auto& v : feedback) v = 5.0 * rng.Uniform();
    std::vector<std::size_t> logged(L);
    for (std::size_t j = 0; j < L; ++j) logged[j] = j;
    for (std::size_t j = L; j > 1; --j) std::swap(logged[j - 1], logged[rng.Index(j)]);
    logged.resize(K);
    data.push_back(MakeSlate(qid, feedback, logged, testing::RandomSimplex(L, rng)));
    auto& logits = (*theta)[qid];
    for (std::size_t j = 0; j < L; ++j) logits.push_back(2.0 * rng.Normal());
  }
  return data;
}

TEST(ClipTest, SmallerClipNeverIncreasesEstimates) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    TabularSoftmaxPolicy::Table theta;
    const auto data = RandomDataset(seed, &theta);
    const TabularSoftmaxPolicy policy(theta);
    double prev_cu = std::numeric_limits<double>::infinity();
    double prev_div = prev_cu, prev_bound = prev_cu;
    for (Clip clip : {Clip{}, Clip{100.0}, Clip{10.0}, Clip{3.0}, Clip{1.0},
                      Clip{0.5}, Clip{0.1}}) {
      const EstimatorOptions options{clip, nullptr};
      const double cu = IpsCu(data, policy, options);
      const double div = IpsDiv(data, policy, options);
      const double bound = PopeLowerBound(data, policy, options);
      EXPECT_LE(cu, prev_cu);
      EXPECT_LE(div, prev_div);
      EXPECT_LE(bound, prev_bound);
      prev_cu = cu;
      prev_div = div;
      prev_bound = bound;
    }
  }
}

TEST(EvaluateTest, IdentityWeightsGiveEmpiricalMeans) {
  Rng rng(5);
  std::vector<LoggedSlate> data;
  CompensatedSum feedback_sum, neglog_sum;
  for (int t = 0; t < 20; ++t) {
    const auto probs = testing::RandomSimplex(5, rng);
    std::vector<double> feedback(5);
    for (auto& v : feedback) v = std::floor(10 * rng.Uniform());
    data.push_back(MakeSlate("i" + std::to_string(t), feedback, {0, 2, 4}, probs));
    for (std::size_t j : {0, 2, 4}) {
      feedback_sum.Add(feedback[j]);
      neglog_sum.Add(-std::log(probs[j]));
    }
  }
  const auto policy = ExternalLogprobPolicy::FromSlates(data);
  const auto report = Evaluate(data, policy);
  EXPECT_NEAR(report.v_cu, feedback_sum.value() / 20, 1e-12);
  EXPECT_NEAR(report.v_div, neglog_sum.value() / 20, 1e-12);
  EXPECT_NEAR(report.weight_stats.min, 1.0, 1e-12);
  EXPECT_NEAR(report.weight_stats.max, 1.0, 1e-12);
  EXPECT_NEAR(report.weight_stats.effective_sample_size, 60.0, 1e-9);
  EXPECT_EQ(report.weight_stats.count, 60u);
  EXPECT_EQ(report.weight_stats.clipped, 0u);
  EXPECT_EQ(report.n_slates, 20u);
  EXPECT_EQ(report.v_pope, report.v_cu + report.v_div);
}

TEST(EvaluateTest, CountsClippedWeights) {
  auto slate = MakeSlate("q", {1, 1}, {0});
  slate.logging_probs = std::vector<double>{0.01};
  const std::vector<LoggedSlate> data{slate};
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  const auto report = Evaluate(data, policy);
  EXPECT_EQ(report.weight_stats.clipped, 1u);
  EXPECT_EQ(report.weight_stats.slate_clipped, 1u);
  EXPECT_EQ(report.weight_stats.max, kDefaultClip);
  EXPECT_NEAR(report.v_cu, kDefaultClip, 1e-12);
}

TEST(EvaluateTest, EmptyDataset) {
  const TabularSoftmaxPolicy policy;
  EXPECT_THROW(Evaluate({}, policy), Error);
}

TEST(EvaluateTest, SimulatedRunIsReproducible) {
  SimConfig config;
  const auto data = Simulate(config);
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  const auto a = Evaluate(data, policy);
  const auto b = Evaluate(Simulate(config), policy);
  EXPECT_EQ(a.v_cu, b.v_cu);
  EXPECT_EQ(a.v_div, b.v_div);
  EXPECT_EQ(a.v_lower_bound, b.v_lower_bound);
  EXPECT_EQ(a.weight_stats.effective_sample_size,
            b.weight_stats.effective_sample_size);
  // First recorded run.
  EXPECT_DOUBLE_EQ(a.v_cu, 28.214151283455003);
  EXPECT_DOUBLE_EQ(a.v_lower_bound, 39.347039135866716);
}

TEST(AuditTest, DegenerateCaseIsEquality) {
  std::vector<LoggedSlate> data;
  Rng rng(9);
  for (int t = 0; t < 8; ++t) {
    const std::size_t L = 2 + t % 4;
    data.push_back(MakeSlate("d" + std::to_string(t),
                             std::vector<double>(L, 0.0), {t % L},
                             testing::RandomSimplex(L, rng)));
  }
  const auto policy = ExternalLogprobPolicy::FromSlates(data);
  const auto report = InequalityAudit(data, policy);
  EXPECT_EQ(report.satisfied_fraction, 1.0);
  EXPECT_EQ(report.equality_count, data.size());
  for (const auto& row : report.rows) EXPECT_NEAR(row.lhs, row.rhs, 1e-12);
}

TEST(AuditTest, FullSlateHasUnitSlateWeight) {
  // With K = L and pi = pi0 the slate weight is 1, so LHS - RHS reduces to
  // sum(eta) - sum(w_i eta_i) = 0 for unit response weights.
  const std::vector<double> probs{0.1, 0.6, 0.3};
  const std::vector<LoggedSlate> data{MakeSlate("f", {2, 5, 1}, {0, 1, 2}, probs)};
  const auto policy = ExternalLogprobPolicy::FromSlates(data);
  const auto report = InequalityAudit(data, policy);
  ASSERT_EQ(report.rows.size(), 1u);
  const double neglog = -std::log(0.1) - std::log(0.6) - std::log(0.3);
  EXPECT_NEAR(report.rows[0].lhs, 8.0 + neglog, 1e-12);
  EXPECT_NEAR(report.rows[0].rhs, 8.0 + neglog, 1e-12);
}

TEST(AuditTest, SimulatedFractionRegression) {
  SimConfig config;
  config.n_queries = 200;
  const auto data = Simulate(config);
  const auto policy = TabularSoftmaxPolicy::Uniform(data);
  const auto report = InequalityAudit(data, policy);
  EXPECT_EQ(report.rows.size(), 200u);
  // First recorded run.
  EXPECT_DOUBLE_EQ(report.satisfied_fraction, kRecordedAuditFraction);
}

}  // namespace
}  // namespace pope
