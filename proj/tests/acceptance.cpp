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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "pope/core.hpp"
#include "pope/data.hpp"
#include "pope/error.hpp"
#include "pope/estimators.hpp"
#include "pope/metrics.hpp"
#include "pope/numeric.hpp"
#include "pope/optim.hpp"
#include "pope/rng.hpp"
#include "test_util.hpp"

namespace pope {
namespace {

namespace fs = std::filesystem;
using testing::LogitsFor;
using testing::MakeSlate;

struct Outcome {
  bool pass = true;
  std::string detail;
  // Wall-clock budget in seconds; 0 means none.
  double budget = 0.0;
};

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

void Note(Outcome& o, bool ok, const std::string& text) {
  o.pass = o.pass && ok;
  if (!o.detail.empty()) o.detail += "; ";
  o.detail += text + (ok ? "" : " [fail]");
}

// ---- 1 ----

Outcome Unbiasedness() {
  Outcome o{true, "", 10.0};
  const std::vector<double> pi0{0.5, 0.3, 0.2};
  const std::vector<double> pi{0.2, 0.3, 0.5};
  const std::vector<double> eta{1.0, 0.0, 2.0};
  const TabularSoftmaxPolicy target({{"e", LogitsFor(pi)}});
  const EstimatorOptions unclipped{std::nullopt, nullptr};
  const double oracle = OracleValue(EnumerableInstance{pi, eta, 1},
                                    OracleObjective::kBound);

  std::vector<LoggedSlate> singles;
  CompensatedSum exact;
  for (std::size_t a = 0; a < 3; ++a) {
    singles.push_back(MakeSlate("e", eta, {a}, pi0));
    exact.Add(pi0[a] * PopeLowerBound(std::span(&singles[a], 1), target, unclipped));
  }
  const double enum_err = std::fabs(exact.value() - oracle);
  Note(o, enum_err <= 1e-12, "enumeration |diff| " + Num(enum_err));

  Rng rng = Rng::Stream(1, 0);
  std::vector<LoggedSlate> log;
  log.reserve(100000);
  for (int n = 0; n < 100000; ++n) {
    const double u = rng.Uniform();
    log.push_back(singles[u < 0.5 ? 0 : (u < 0.8 ? 1 : 2)]);
  }
  const double mc = PopeLowerBound(log, target, unclipped);
  const double rel = std::fabs(mc - oracle) / std::fabs(oracle);
  Note(o, rel < 0.01, "monte-carlo rel err " + Num(rel) + " (oracle " +
                          Num(oracle) + ")");
  return o;
}

// ---- 2 ----

Outcome GradientCorrectness() {
  Outcome o{true, "", 5.0};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng = Rng::Stream(2, seed);
    std::vector<LoggedSlate> slates;
    TabularSoftmaxPolicy::Table theta;
    const std::size_t queries = 1 + rng.Index(4);
    for (std::size_t t = 0; t < queries; ++t) {
      const std::string qid = "g" + std::to_string(t);
      const std::size_t L = 2 + rng.Index(4);
      const std::size_t K = 1 + rng.Index(L);
      std::vector<double> feedback(L);
      for (auto& v : feedback) v = 5.0 * rng.Uniform();
      std::vector<std::size_t> logged;
      for (std::size_t j = 0; j < K; ++j) logged.push_back(j);
      slates.push_back(MakeSlate(qid, feedback, logged, testing::RandomSimplex(L, rng)));
      for (std::size_t j = 0; j < L; ++j) theta[qid].push_back(rng.Normal());
    }
    TabularSoftmaxPolicy policy(theta);
    const auto analytic = PopeGradient(slates, policy, 1.0, std::nullopt);
    for (auto& [qid, logits] : policy.mutable_theta()) {
      for (std::size_t j = 0; j < logits.size(); ++j) {
        const double saved = logits[j];
        logits[j] = saved + 1e-4;
        const double up = PopeObjective(slates, policy, 1.0, std::nullopt).objective;
        logits[j] = saved - 1e-4;
        const double down = PopeObjective(slates, policy, 1.0, std::nullopt).objective;
        logits[j] = saved;
        const double numeric = (up - down) / 2e-4;
        const double a = analytic.at(qid)[j];
        worst = std::max(worst, std::fabs(a - numeric) /
                                    std::max({std::fabs(a), std::fabs(numeric), 1e-6}));
      }
    }
  }
  Note(o, worst < 1e-5, "max rel err " + Num(worst) + " over 20 instances");
  return o;
}

// ---- 3 ----

Outcome IdentityWeights() {
  Outcome o;
  const auto slates = Simulate(SimConfig{});
  const auto logging = ExternalLogprobPolicy::FromSlates(slates);
  const auto report = Evaluate(slates, logging);
  CompensatedSum feedback, neglog;
  for (const auto& s : slates) {
    const auto p = logging.PoolDistribution(s);
    for (std::size_t i : s.LoggedIndices()) {
      feedback.Add(s.pool[i].feedback);
      neglog.Add(-std::log(p[i]));
    }
  }
  const double n = static_cast<double>(slates.size());
  const double cu_err = std::fabs(report.v_cu - feedback.value() / n);
  const double div_err = std::fabs(report.v_div - neglog.value() / n);
  Note(o, cu_err <= 1e-12, "v_cu |diff| " + Num(cu_err));
  Note(o, div_err <= 1e-12, "v_div |diff| " + Num(div_err));
  return o;
}

// ---- 4 ----

Outcome DirectionOfEffect() {
  Outcome o{true, "", 60.0};
  const auto slates = Simulate(SimConfig{});
  const auto uniform = TabularSoftmaxPolicy::Uniform(slates);
  TrainConfig config;
  config.lambda_div = 1.0;
  const auto pope = Train(slates, uniform, config);
  config.lambda_div = 0.0;
  const auto utility_only = Train(slates, uniform, config);
  const double h1 = MeanEntropy(pope.policy, slates);
  const double h0 = MeanEntropy(utility_only.policy, slates);
  const double f1 = ExpectedFeedback(pope.policy, slates);
  const double fu = ExpectedFeedback(uniform, slates);
  Note(o, !pope.diverged && !utility_only.diverged, "training finished");
  Note(o, h1 - h0 >= 0.05, "entropy gain " + Num(h1 - h0) + " nats (" + Num(h1) +
                                " vs " + Num(h0) + ")");
  const double lift = f1 / fu - 1.0;
  Note(o, lift >= 0.05, "feedback lift over uniform " + Num(100 * lift) + "%");
  return o;
}

// ---- 5 ----

Outcome MonotoneAscent() {
  Outcome o;
  const auto slates = Simulate(SimConfig{});
  const auto uniform = TabularSoftmaxPolicy::Uniform(slates);
  TrainConfig config;
  config.learning_rate = 1e-3;
  config.steps = 50;
  const auto slow = Train(slates, uniform, config);
  int drops = 0;
  for (std::size_t i = 1; i < slow.trace.size(); ++i) {
    drops += slow.trace[i].objective < slow.trace[i - 1].objective;
  }
  Note(o, drops == 0 && !slow.diverged,
       "lr 1e-3: " + std::to_string(drops) + " decreases in 50 steps");

  config.learning_rate = 100.0;
  config.steps = 200;
  const auto fast = Train(slates, uniform, config);
  Note(o, fast.diverged,
       fast.diverged ? "lr 100: " + fast.message
                     : "lr 100: no divergence detected, objective stayed finite (" +
                           Num(fast.trace.back().objective) + " at step " +
                           std::to_string(fast.trace.back().step) + ")");
  return o;
}

// ---- 6 ----

Outcome MetricFixtures() {
  Outcome o;
  constexpr double kTol = 1e-9;
  int failures = 0, checks = 0;
  auto check = [&](double got, double want) {
    ++checks;
    if (!(std::fabs(got - want) <= kTol)) ++failures;
  };
  auto angle = [](double cosine) -> Embedding {
    return {cosine, std::sqrt(1.0 - cosine * cosine)};
  };

  // pl_score
  check(PlScore(Matrix::FromRows({{0.8, 0.4}}), std::vector<double>{3, 1}), 0.7);
  check(PlScore(Matrix::FromRows({{0.4, 0.4}, {0.4, 0.4}}), std::vector<double>{5, 2}), 0.4);
  check(PlScore(Matrix::FromRows({{0.2}, {0.6}}), std::vector<double>{3}), 0.4);
  // coverage
  check(Coverage(Matrix::FromRows({{0.9, 0.7, 0.85}}), 0.8), 2.0 / 3.0);
  check(Coverage(Matrix::FromRows({{0.99, 0.9}}), 0.999), 0.0);
  const HashingEmbeddingProvider provider;
  const std::vector<std::string> refs{"one answer", "another reply", "third view"};
  check(Coverage(SimilarityMatrix(refs, refs, provider)), 1.0);
  // distributional alignment
  check(DistributionalAlignment(Matrix::FromRows({{0.5, 0.5}, {0.25, 0.25}})), 1.0);
  check(DistributionalAlignment(Matrix::FromRows({{1.0, -1.0}}), 0.01), 0.0);
  check(DistributionalAlignment(Matrix::FromRows({{1.0, 0.5}}), 0.5),
        0.8399415379831692);
  // diversity
  const std::vector<Embedding> same{{1, 0}, {1, 0}, {1, 0}};
  const std::vector<Embedding> orth{{1, 0}, {0, 1}};
  const double half = std::acos(0.5);
  const std::vector<Embedding> mixed{{1, 0}, {std::cos(half), std::sin(half)},
                                     {std::cos(half), std::sin(half)}};
  check(Diversity(same), 0.0);
  check(Diversity(orth), 1.0);
  check(Diversity(mixed), 1.0 - 2.0 / 3.0);
  // helpfulness
  const Embedding resp{1.0, 0.0};
  const std::vector<Embedding> r1{angle(0.2), angle(0.9)};
  const std::vector<Embedding> r2{angle(0.4), angle(0.6)};
  const std::vector<Embedding> r3{angle(1.0), angle(0.0)};
  check(Helpfulness(resp, r1, std::vector<double>{0, 10}), 0.9);
  check(Helpfulness(resp, r2, std::vector<double>{4, 4}), 0.5);
  check(Helpfulness(resp, r3, std::vector<double>{1, 3}), 0.0);
  // relevance
  check(Relevance(std::vector<double>{0.6, 0.8}, std::vector<double>{0.6, 0.8}), 1.0);
  check(Relevance(std::vector<double>{0.6, 0.8}, std::vector<double>{-0.6, -0.8}), -1.0);
  check(Relevance(std::vector<double>{1, 0}, std::vector<double>{0, 1}), 0.0);
  // distinct_n
  auto toks = [](std::vector<std::string> texts) {
    std::vector<std::vector<std::string>> out;
    for (auto& t : texts) out.push_back(Tokenize(t));
    return out;
  };
  check(DistinctN(toks({"a b a"}), 1), 2.0 / 3.0);
  check(DistinctN(toks({"a b c d"}), 1), 1.0);
  check(DistinctN(toks({"the cat sat", "the cat sat"}), 2), 0.5);
  Note(o, failures == 0, std::to_string(checks - failures) + "/" +
                             std::to_string(checks) + " worked examples");

  const double bleu = SelfBleu(toks({"a cat on the mat", "a cat on the mat"}));
  Note(o, std::fabs(bleu - 1.0) <= kTol, "self-BLEU of identical texts " + Num(bleu));

  const auto sets = LoadGenerations(POPE_FIXTURE_DIR "/generations.jsonl");
  double prev = std::numeric_limits<double>::infinity();
  bool monotone = true;
  std::string values;
  for (double delta : {0.5, 0.8, 0.99}) {
    const auto report = BuildMetricReport(sets, MetricParams{delta, 0.5}, provider);
    const double c = *report.corpus[1];
    monotone = monotone && c <= prev;
    prev = c;
    values += (values.empty() ? "" : ", ") + Num(c);
  }
  Note(o, monotone, "coverage at delta 0.5/0.8/0.99: " + values);
  return o;
}

// ---- 7 ----

Outcome PlackettLuce() {
  Outcome o;
  Rng rng = Rng::Stream(7, 0);
  const std::vector<double> w{2.0, 1.0, 1.0};
  const std::vector<double> want{0.5, 0.25, 0.25};
  std::vector<int> counts(3, 0);
  for (int n = 0; n < 100000; ++n) ++counts[PlSample(w, 1, rng)[0]];
  double worst = 0.0;
  for (int j = 0; j < 3; ++j) worst = std::max(worst, std::fabs(counts[j] / 1e5 - want[j]));
  Note(o, worst <= 0.01, "max |freq - prob| " + Num(worst));
  return o;
}

// ---- 8 ----

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int RunCli(const fs::path& dir, const std::string& args) {
  const std::string cmd = "cd '" + dir.string() + "' && '" POPE_CLI "' " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome Determinism() {
  Outcome o;
  const fs::path root = fs::temp_directory_path() / "pope_acceptance";
  fs::remove_all(root);
  const std::vector<fs::path> dirs{root / "a", root / "b"};
  for (const auto& dir : dirs) {
    fs::create_directories(dir);
    fs::copy_file(POPE_FIXTURE_DIR "/generations.jsonl", dir / "generations.jsonl");
  }
  const std::vector<std::pair<std::string, std::vector<std::string>>> runs{
      {"simulate --seed 7 --out sim.jsonl", {"sim.jsonl", "sim.jsonl.meta.json"}},
      {"evaluate --data sim.jsonl --out eval.json", {"eval.json"}},
      {"optimize --data sim.jsonl --batch-size 10 --seed 3 --out pol.json "
       "--trace trace.csv --report opt.json",
       {"pol.json", "trace.csv", "opt.json"}},
      {"metrics --generations generations.jsonl --out met.json --csv met.csv",
       {"met.json", "met.csv"}}};
  int identical = 0, total = 0;
  bool ok = true;
  for (const auto& [args, outputs] : runs) {
    for (const auto& dir : dirs) {
      if (RunCli(dir, args) != 0) ok = false;
    }
    for (const auto& out : outputs) {
      ++total;
      const std::string a = ReadFile(dirs[0] / out);
      if (!a.empty() && a == ReadFile(dirs[1] / out)) ++identical;
    }
  }
  ok = ok && identical == total;
  Note(o, ok, std::to_string(identical) + "/" + std::to_string(total) +
                  " CLI outputs byte-identical across reruns");

  SimConfig config;
  const auto slates = Simulate(config);
  const bool data_ok = ParseDataset(SerializeDataset(slates)) == slates;
  Rng rng(8);
  TabularSoftmaxPolicy::Table theta;
  for (const auto& s : slates) {
    for (std::size_t j = 0; j < s.pool.size(); ++j) theta[s.query_id].push_back(50 * rng.Normal());
  }
  const TabularSoftmaxPolicy policy(theta);
  const bool policy_ok = ParsePolicy(SerializePolicy(policy)).theta() == policy.theta();
  Note(o, data_ok, "dataset round-trip exact");
  Note(o, policy_ok, "policy round-trip exact");
  fs::remove_all(root);
  return o;
}

// ---- 9 ----

Outcome Audit() {
  Outcome o;
  std::vector<LoggedSlate> degenerate;
  Rng rng(9);
  for (int t = 0; t < 20; ++t) {
    const std::size_t L = 2 + rng.Index(5);
    degenerate.push_back(MakeSlate("d" + std::to_string(t), std::vector<double>(L, 0.0),
                                   {rng.Index(L)}, testing::RandomSimplex(L, rng)));
  }
  const auto pi0 = ExternalLogprobPolicy::FromSlates(degenerate);
  const auto deg = InequalityAudit(degenerate, pi0);
  double gap = 0.0;
  for (const auto& row : deg.rows) gap = std::max(gap, std::fabs(row.lhs - row.rhs));
  Note(o, deg.satisfied_fraction == 1.0 && deg.equality_count == degenerate.size(),
       "degenerate fraction " + Num(deg.satisfied_fraction) + ", max |lhs-rhs| " + Num(gap));

  const auto slates = Simulate(SimConfig{});
  const auto standard = InequalityAudit(slates, TabularSoftmaxPolicy::Uniform(slates));
  bool finite = standard.rows.size() == slates.size();
  for (const auto& row : standard.rows) {
    finite = finite && std::isfinite(row.lhs) && std::isfinite(row.rhs);
  }
  Note(o, finite, "standard dataset: " + std::to_string(standard.rows.size()) +
                      " slates audited, fraction " + Num(standard.satisfied_fraction));
  return o;
}

}  // namespace
}  // namespace pope

int main() {
  using Clock = std::chrono::steady_clock;
  const std::vector<std::pair<std::string, std::function<pope::Outcome()>>> criteria{
      {"unbiasedness of the decomposed estimator", pope::Unbiasedness},
      {"gradient vs finite differences", pope::GradientCorrectness},
      {"identity-weight exactness", pope::IdentityWeights},
      {"diversity weight raises entropy and beats uniform", pope::DirectionOfEffect},
      {"monotone ascent and divergence detection", pope::MonotoneAscent},
      {"metric fixtures", pope::MetricFixtures},
      {"Plackett-Luce first-choice frequencies", pope::PlackettLuce},
      {"determinism and round-trips", pope::Determinism},
      {"inequality audit", pope::Audit}};
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    pope::Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome.pass = false;
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (outcome.budget > 0.0 && seconds >= outcome.budget) {
      outcome.pass = false;
      outcome.detail += "; over the " + pope::Num(outcome.budget) + " s budget";
    }
    failed += !outcome.pass;
    std::printf("%s %zu %s: %s (%.2f s)\n", outcome.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first.c_str(), outcome.detail.c_str(), seconds);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
