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

#include "pope/pope.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "pope/core.hpp"
#include "pope/data.hpp"
#include "pope/error.hpp"
#include "pope/estimators.hpp"
#include "pope/metrics.hpp"
#include "pope/numeric.hpp"
#include "pope/optim.hpp"

struct pope_dataset {
  std::vector<pope::LoggedSlate> slates;
};

struct pope_policy {
  std::shared_ptr<const pope::Policy> policy;
  // Set when policy is a TabularSoftmaxPolicy; aliases `policy`.
  const pope::TabularSoftmaxPolicy* tabular = nullptr;
};

struct pope_trace {
  pope::TrainTrace rows;
};

struct pope_audit {
  pope::AuditReport report;
};

struct pope_pareto {
  pope::ParetoResult result;
};

struct pope_generations {
  std::vector<pope::GenerationSet> sets;
};

struct pope_metric_report {
  pope::MetricReport report;
};

namespace {

thread_local std::string g_last_error;

pope_status Fail(pope_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <typename Fn>
pope_status Guard(Fn&& fn) {
  try {
    g_last_error.clear();
    return fn();
  } catch (const pope::Error& e) {
    return Fail(e.kind() == pope::ErrorKind::kValidation ? POPE_ERR_VALIDATION
                                                         : POPE_ERR_RUNTIME,
                e.what());
  } catch (const std::bad_alloc&) {
    return Fail(POPE_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(POPE_ERR_INTERNAL, e.what());
  }
}

void Require(const void* ptr, const char* name) {
  if (ptr == nullptr) {
    throw pope::ValidationError(std::string(name) + " must not be NULL");
  }
}

pope::Clip ToClip(double clip) {
  if (clip > 0.0 && std::isfinite(clip)) return clip;
  return std::nullopt;
}

const pope::Policy* Logging(const pope_policy* logging) {
  return logging ? logging->policy.get() : nullptr;
}

const pope::TabularSoftmaxPolicy& RequireTabular(const pope_policy* policy) {
  Require(policy, "policy");
  if (policy->tabular == nullptr) {
    throw pope::ValidationError("a tabular policy is required");
  }
  return *policy->tabular;
}

pope_policy* WrapTabular(pope::TabularSoftmaxPolicy policy) {
  auto owned =
      std::make_shared<const pope::TabularSoftmaxPolicy>(std::move(policy));
  auto* handle = new pope_policy;
  handle->tabular = owned.get();
  handle->policy = std::move(owned);
  return handle;
}

pope_policy* WrapPolicy(std::shared_ptr<const pope::Policy> policy) {
  auto* handle = new pope_policy;
  handle->policy = std::move(policy);
  return handle;
}

pope::TrainConfig ToTrainConfig(const pope_train_config* config) {
  Require(config, "config");
  pope::TrainConfig out;
  out.learning_rate = config->learning_rate;
  out.steps = config->steps;
  out.lambda_div = config->lambda_div;
  out.clip = ToClip(config->clip);
  out.seed = config->seed;
  out.trace_every = config->trace_every;
  out.batch_size = config->batch_size;
  return out;
}

constexpr const char* kMetricLabels[pope::kMetricCount] = {
    "PL-Score",    "Coverage",  "DistAlign",  "Diversity", "Helpfulness",
    "Relevance",   "Distinct-1", "Distinct-2", "Self-BLEU"};

struct WarningSink {
  pope_warning_fn fn = nullptr;
  void* user = nullptr;
};

}  // namespace

extern "C" {

const char* pope_version(void) { return "1.0.0"; }

const char* pope_last_error(void) { return g_last_error.c_str(); }

void pope_set_warning_callback(pope_warning_fn fn, void* user_data) {
  if (fn == nullptr) {
    pope::SetWarningHandler([](const std::string& msg) {
      std::fprintf(stderr, "warning: %s\n", msg.c_str());
    });
    return;
  }
  WarningSink sink{fn, user_data};
  pope::SetWarningHandler(
      [sink](const std::string& msg) { sink.fn(msg.c_str(), sink.user); });
}

pope_status pope_dataset_load(const char* path, pope_dataset** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<pope_dataset>();
    handle->slates = pope::LoadDataset(path);
    *out = handle.release();
    return POPE_OK;
  });
}

pope_status pope_dataset_save(const pope_dataset* dataset, const char* path) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(path, "path");
    pope::SaveDataset(dataset->slates, path);
    return POPE_OK;
  });
}

size_t pope_dataset_size(const pope_dataset* dataset) {
  return dataset ? dataset->slates.size() : 0;
}

size_t pope_dataset_logged_count(const pope_dataset* dataset) {
  if (!dataset) return 0;
  size_t total = 0;
  for (const auto& s : dataset->slates) total += s.logged_ids.size();
  return total;
}

int pope_dataset_has_propensities(const pope_dataset* dataset) {
  if (!dataset) return 0;
  for (const auto& s : dataset->slates) {
    if (!s.logging_probs) return 0;
  }
  return 1;
}

void pope_dataset_free(pope_dataset* dataset) { delete dataset; }

void pope_sim_config_default(pope_sim_config* config) {
  if (!config) return;
  const pope::SimConfig d;
  config->n_queries = d.n_queries;
  config->pool_size = d.pool_size;
  config->slate_size = d.slate_size;
  config->logging_temperature = d.logging_temperature;
  config->feedback_model = POPE_FEEDBACK_PLACKETT_LUCE;
  config->pl_scale = d.pl_scale;
  config->annotators = d.annotators;
  config->upvote_depth = d.upvote_depth;
  config->linear_noise = d.linear_noise;
  config->seed = d.seed;
}

pope_status pope_simulate(const pope_sim_config* config, pope_dataset** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    *out = nullptr;
    pope::SimConfig c;
    c.n_queries = config->n_queries;
    c.pool_size = config->pool_size;
    c.slate_size = config->slate_size;
    c.logging_temperature = config->logging_temperature;
    c.feedback_model = config->feedback_model == POPE_FEEDBACK_LINEAR
                           ? pope::FeedbackModel::kLinear
                           : pope::FeedbackModel::kPlackettLuce;
    c.pl_scale = config->pl_scale;
    c.annotators = config->annotators;
    c.upvote_depth = config->upvote_depth;
    c.linear_noise = config->linear_noise;
    c.seed = config->seed;
    auto handle = std::make_unique<pope_dataset>();
    handle->slates = pope::Simulate(c);
    *out = handle.release();
    return POPE_OK;
  });
}

const char* pope_simulate_sampler(void) { return pope::kSlateSampler; }

pope_status pope_policy_uniform(const pope_dataset* dataset,
                                pope_policy** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    *out = WrapTabular(pope::TabularSoftmaxPolicy::Uniform(dataset->slates));
    return POPE_OK;
  });
}

pope_status pope_policy_argmax_feedback(const pope_dataset* dataset,
                                        double margin, pope_policy** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    *out = WrapTabular(pope::ArgmaxFeedbackPolicy(dataset->slates, margin));
    return POPE_OK;
  });
}

pope_status pope_policy_tabular_from_logits(const char* query_id,
                                            const double* logits, size_t count,
                                            double temperature,
                                            pope_policy** out) {
  return Guard([&] {
    Require(query_id, "query_id");
    Require(logits, "logits");
    Require(out, "out");
    if (count == 0) throw pope::ValidationError("empty pool");
    pope::TabularSoftmaxPolicy::Table table;
    table[query_id] = std::vector<double>(logits, logits + count);
    *out = WrapTabular(pope::TabularSoftmaxPolicy(std::move(table), temperature));
    return POPE_OK;
  });
}

pope_status pope_policy_load_tabular(const char* path, pope_policy** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = WrapTabular(pope::LoadPolicy(path));
    return POPE_OK;
  });
}

pope_status pope_policy_load_logprobs(const char* path, int raw,
                                      pope_policy** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    const auto mode = raw ? pope::ExternalLogprobPolicy::Mode::kRaw
                          : pope::ExternalLogprobPolicy::Mode::kPoolNormalized;
    *out = WrapPolicy(std::make_shared<const pope::ExternalLogprobPolicy>(
        pope::LoadLogprobPolicy(path, mode)));
    return POPE_OK;
  });
}

pope_status pope_policy_from_dataset_logprobs(const pope_dataset* dataset,
                                              pope_policy** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    *out = WrapPolicy(std::make_shared<const pope::ExternalLogprobPolicy>(
        pope::ExternalLogprobPolicy::FromSlates(dataset->slates)));
    return POPE_OK;
  });
}

pope_status pope_policy_save(const pope_policy* policy, const char* path) {
  return Guard([&] {
    Require(path, "path");
    pope::SavePolicy(RequireTabular(policy), path);
    return POPE_OK;
  });
}

int pope_policy_is_tabular(const pope_policy* policy) {
  return policy && policy->tabular ? 1 : 0;
}

pope_status pope_policy_check(const pope_policy* policy,
                              const pope_dataset* dataset) {
  return Guard([&] {
    Require(policy, "policy");
    Require(dataset, "dataset");
    if (policy->tabular) {
      pope::CheckPolicyCovers(*policy->tabular, dataset->slates);
    } else {
      for (const auto& s : dataset->slates) policy->policy->PoolDistribution(s);
    }
    return POPE_OK;
  });
}

pope_status pope_policy_distribution(const pope_policy* policy,
                                     const pope_dataset* dataset, size_t index,
                                     double* out, size_t capacity,
                                     size_t* length) {
  return Guard([&] {
    Require(policy, "policy");
    Require(dataset, "dataset");
    Require(length, "length");
    if (index >= dataset->slates.size()) {
      throw pope::ValidationError("slate index out of range");
    }
    const auto probs = policy->policy->PoolDistribution(dataset->slates[index]);
    *length = probs.size();
    if (probs.size() > capacity || (out == nullptr && !probs.empty())) {
      throw pope::ValidationError("output buffer too small");
    }
    std::copy(probs.begin(), probs.end(), out);
    return POPE_OK;
  });
}

pope_status pope_policy_mean_entropy(const pope_policy* policy,
                                     const pope_dataset* dataset,
                                     double* out) {
  return Guard([&] {
    Require(policy, "policy");
    Require(dataset, "dataset");
    Require(out, "out");
    *out = pope::MeanEntropy(*policy->policy, dataset->slates);
    return POPE_OK;
  });
}

pope_status pope_policy_expected_feedback(const pope_policy* policy,
                                          const pope_dataset* dataset,
                                          double* out) {
  return Guard([&] {
    Require(policy, "policy");
    Require(dataset, "dataset");
    Require(out, "out");
    *out = pope::ExpectedFeedback(*policy->policy, dataset->slates);
    return POPE_OK;
  });
}

void pope_policy_free(pope_policy* policy) { delete policy; }

pope_status pope_evaluate(const pope_dataset* dataset,
                          const pope_policy* target,
                          const pope_policy* logging, double clip,
                          pope_estimate* out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(target, "target");
    Require(out, "out");
    pope::EstimatorOptions options;
    options.clip = ToClip(clip);
    options.logging_policy = Logging(logging);
    const auto r = pope::Evaluate(dataset->slates, *target->policy, options);
    out->v_cu = r.v_cu;
    out->v_div = r.v_div;
    out->v_pope = r.v_pope;
    out->v_lower_bound = r.v_lower_bound;
    out->n_slates = r.n_slates;
    out->weight_min = r.weight_stats.min;
    out->weight_max = r.weight_stats.max;
    out->weight_mean = r.weight_stats.mean;
    out->effective_sample_size = r.weight_stats.effective_sample_size;
    out->weight_count = r.weight_stats.count;
    out->weights_clipped = r.weight_stats.clipped;
    out->slate_weights_clipped = r.weight_stats.slate_clipped;
    return POPE_OK;
  });
}

namespace {

pope::OracleObjective ToObjective(pope_objective objective) {
  switch (objective) {
    case POPE_OBJECTIVE_CU:
      return pope::OracleObjective::kCu;
    case POPE_OBJECTIVE_DIV:
      return pope::OracleObjective::kDiv;
    case POPE_OBJECTIVE_BOUND:
      return pope::OracleObjective::kBound;
  }
  throw pope::ValidationError("unknown objective");
}

}  // namespace

pope_status pope_oracle_slate(const pope_dataset* dataset, size_t index,
                              const pope_policy* target,
                              pope_objective objective, double* out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(target, "target");
    Require(out, "out");
    if (index >= dataset->slates.size()) {
      throw pope::ValidationError("slate index out of range");
    }
    *out = pope::OracleValue(dataset->slates[index], *target->policy,
                             ToObjective(objective));
    return POPE_OK;
  });
}

pope_status pope_oracle(const pope_dataset* dataset, const pope_policy* target,
                        pope_objective objective, double* out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(target, "target");
    Require(out, "out");
    *out = pope::OracleValue(dataset->slates, *target->policy,
                             ToObjective(objective));
    return POPE_OK;
  });
}

pope_status pope_audit_run(const pope_dataset* dataset,
                           const pope_policy* target,
                           const pope_policy* logging, pope_audit** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(target, "target");
    Require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<pope_audit>();
    handle->report = pope::InequalityAudit(dataset->slates, *target->policy,
                                           Logging(logging));
    *out = handle.release();
    return POPE_OK;
  });
}

size_t pope_audit_size(const pope_audit* audit) {
  return audit ? audit->report.rows.size() : 0;
}

pope_status pope_audit_row_at(const pope_audit* audit, size_t index,
                              pope_audit_row* out) {
  return Guard([&] {
    Require(audit, "audit");
    Require(out, "out");
    if (index >= audit->report.rows.size()) {
      throw pope::ValidationError("audit row out of range");
    }
    const auto& row = audit->report.rows[index];
    out->query_id = row.query_id.c_str();
    out->lhs = row.lhs;
    out->rhs = row.rhs;
    out->satisfied = row.satisfied ? 1 : 0;
    out->equality = row.equality ? 1 : 0;
    return POPE_OK;
  });
}

double pope_audit_satisfied_fraction(const pope_audit* audit) {
  return audit ? audit->report.satisfied_fraction : 0.0;
}

size_t pope_audit_equality_count(const pope_audit* audit) {
  return audit ? audit->report.equality_count : 0;
}

void pope_audit_free(pope_audit* audit) { delete audit; }

pope_status pope_gradcheck(const pope_dataset* dataset,
                           const pope_policy* policy,
                           const pope_policy* logging, double epsilon,
                           double lambda_div, pope_gradcheck_report* out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    const auto r = pope::GradCheck(dataset->slates, RequireTabular(policy),
                                   epsilon, lambda_div, Logging(logging));
    out->max_abs_error = r.max_abs_error;
    out->max_rel_error = r.max_rel_error;
    out->worst_analytic = r.worst_analytic;
    out->worst_numeric = r.worst_numeric;
    out->worst_index = r.worst_index;
    out->coordinates = r.coordinates;
    std::memset(out->worst_query, 0, sizeof(out->worst_query));
    std::strncpy(out->worst_query, r.worst_query.c_str(),
                 sizeof(out->worst_query) - 1);
    return POPE_OK;
  });
}

void pope_train_config_default(pope_train_config* config) {
  if (!config) return;
  const pope::TrainConfig d;
  config->learning_rate = d.learning_rate;
  config->steps = d.steps;
  config->lambda_div = d.lambda_div;
  config->clip = *d.clip;
  config->seed = d.seed;
  config->trace_every = d.trace_every;
  config->batch_size = d.batch_size;
}

pope_status pope_train(const pope_dataset* dataset, const pope_policy* init,
                       const pope_policy* logging,
                       const pope_train_config* config,
                       pope_policy** out_policy, pope_trace** out_trace) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out_policy, "out_policy");
    Require(out_trace, "out_trace");
    *out_policy = nullptr;
    *out_trace = nullptr;
    const auto& start = RequireTabular(init);
    pope::CheckPolicyCovers(start, dataset->slates);
    auto result = pope::Train(dataset->slates, start, ToTrainConfig(config),
                              Logging(logging));
    auto trace = std::make_unique<pope_trace>();
    trace->rows = std::move(result.trace);
    *out_trace = trace.release();
    *out_policy = WrapTabular(std::move(result.policy));
    if (result.diverged) return Fail(POPE_ERR_RUNTIME, result.message);
    return POPE_OK;
  });
}

size_t pope_trace_size(const pope_trace* trace) {
  return trace ? trace->rows.size() : 0;
}

pope_status pope_trace_row_at(const pope_trace* trace, size_t index,
                              pope_trace_row* out) {
  return Guard([&] {
    Require(trace, "trace");
    Require(out, "out");
    if (index >= trace->rows.size()) {
      throw pope::ValidationError("trace row out of range");
    }
    const auto& r = trace->rows[index];
    *out = {r.step, r.objective, r.v_cu, r.v_div, r.grad_norm, r.entropy};
    return POPE_OK;
  });
}

pope_status pope_trace_write_csv(const pope_trace* trace, const char* path) {
  return Guard([&] {
    Require(trace, "trace");
    Require(path, "path");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw pope::ValidationError(std::string("cannot write ") + path);
    pope::WriteTraceCsv(trace->rows, out);
    return POPE_OK;
  });
}

void pope_trace_free(pope_trace* trace) { delete trace; }

pope_status pope_pareto_sweep(const pope_dataset* dataset,
                              const pope_policy* init,
                              const pope_policy* logging,
                              const pope_train_config* config,
                              const double* lambdas, size_t count,
                              pope_pareto** out) {
  return Guard([&] {
    Require(dataset, "dataset");
    Require(out, "out");
    *out = nullptr;
    if (count > 0) Require(lambdas, "lambdas");
    const auto& start = RequireTabular(init);
    pope::CheckPolicyCovers(start, dataset->slates);
    std::vector<double> values(lambdas, lambdas + count);
    auto handle = std::make_unique<pope_pareto>();
    handle->result = pope::ParetoSweep(dataset->slates, start,
                                       ToTrainConfig(config), values,
                                       Logging(logging));
    *out = handle.release();
    return POPE_OK;
  });
}

size_t pope_pareto_size(const pope_pareto* pareto) {
  return pareto ? pareto->result.points.size() : 0;
}

pope_status pope_pareto_point_at(const pope_pareto* pareto, size_t index,
                                 pope_pareto_point* out) {
  return Guard([&] {
    Require(pareto, "pareto");
    Require(out, "out");
    const auto& points = pareto->result.points;
    if (index >= points.size()) {
      throw pope::ValidationError("pareto point out of range");
    }
    const auto& front = pareto->result.front;
    out->lambda = points[index].lambda;
    out->utility = points[index].utility;
    out->entropy = points[index].entropy;
    out->on_front =
        std::find(front.begin(), front.end(), index) != front.end() ? 1 : 0;
    return POPE_OK;
  });
}

size_t pope_pareto_front_size(const pope_pareto* pareto) {
  return pareto ? pareto->result.front.size() : 0;
}

size_t pope_pareto_front_index(const pope_pareto* pareto, size_t j) {
  if (!pareto || j >= pareto->result.front.size()) return SIZE_MAX;
  return pareto->result.front[j];
}

void pope_pareto_free(pope_pareto* pareto) { delete pareto; }

pope_status pope_generations_load(const char* path, pope_generations** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = nullptr;
    auto handle = std::make_unique<pope_generations>();
    handle->sets = pope::LoadGenerations(path);
    *out = handle.release();
    return POPE_OK;
  });
}

size_t pope_generations_size(const pope_generations* generations) {
  return generations ? generations->sets.size() : 0;
}

void pope_generations_free(pope_generations* generations) {
  delete generations;
}

size_t pope_metric_count(void) { return pope::kMetricCount; }

const char* pope_metric_name(size_t metric) {
  return metric < pope::kMetricCount ? pope::kMetricNames[metric] : nullptr;
}

const char* pope_metric_label(size_t metric) {
  return metric < pope::kMetricCount ? kMetricLabels[metric] : nullptr;
}

pope_status pope_metrics_run(const pope_generations* generations, double delta,
                             double tau, pope_embedder embedder,
                             pope_metric_report** out) {
  return Guard([&] {
    Require(generations, "generations");
    Require(out, "out");
    *out = nullptr;
    if (!(delta > 0.0 && delta < 1.0)) {
      throw pope::ValidationError("delta must lie in (0, 1)");
    }
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw pope::ValidationError("tau must be > 0");
    }
    pope::MetricParams params{delta, tau};
    auto handle = std::make_unique<pope_metric_report>();
    if (embedder == POPE_EMBEDDER_PRECOMPUTED) {
      const auto provider = pope::CollectEmbeddings(generations->sets);
      handle->report =
          pope::BuildMetricReport(generations->sets, params, provider);
    } else {
      const pope::HashingEmbeddingProvider provider;
      handle->report =
          pope::BuildMetricReport(generations->sets, params, provider);
    }
    *out = handle.release();
    return POPE_OK;
  });
}

const char* pope_metric_report_embedder(const pope_metric_report* report) {
  return report ? report->report.embedder_id.c_str() : nullptr;
}

double pope_metric_report_diversity_normalizer(
    const pope_metric_report* report) {
  return report ? report->report.diversity_normalizer : 0.0;
}

size_t pope_metric_report_query_count(const pope_metric_report* report) {
  return report ? report->report.per_query.size() : 0;
}

const char* pope_metric_report_query_id(const pope_metric_report* report,
                                        size_t query) {
  if (!report || query >= report->report.per_query.size()) return nullptr;
  return report->report.per_query[query].query_id.c_str();
}

int pope_metric_report_value(const pope_metric_report* report, size_t query,
                             size_t metric, double* out) {
  if (!report || !out || query >= report->report.per_query.size() ||
      metric >= pope::kMetricCount) {
    return 0;
  }
  const auto& v = report->report.per_query[query].values[metric];
  if (!v) return 0;
  *out = *v;
  return 1;
}

int pope_metric_report_corpus(const pope_metric_report* report, size_t metric,
                              double* out) {
  if (!report || !out || metric >= pope::kMetricCount) return 0;
  const auto& v = report->report.corpus[metric];
  if (!v) return 0;
  *out = *v;
  return 1;
}

size_t pope_metric_report_skipped(const pope_metric_report* report,
                                  size_t metric) {
  if (!report || metric >= pope::kMetricCount) return 0;
  return report->report.skipped[metric];
}

void pope_metric_report_free(pope_metric_report* report) { delete report; }

}  // extern "C"
