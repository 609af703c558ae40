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

/* C interface to the POPE library: off-policy evaluation, optimization and
 * pluralistic metrics behind opaque handles.
 *
 * Every function that can fail returns a pope_status. On failure the message
 * is available from pope_last_error() on the calling thread until the next
 * call into the library from that thread. Handles are created by the library
 * and must be released with the matching *_free function; *_free accepts
 * NULL. Handles are immutable after creation and may be shared across
 * threads for reading.
 *
 * Clipping: wherever a `clip` argument appears, a finite value > 0 truncates
 * importance weights at that value; 0, a negative value, or infinity disables
 * truncation.
 */

#ifndef POPE_H_
#define POPE_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32) || defined(__CYGWIN__)
#  ifdef POPE_BUILDING_LIBRARY
#    define POPE_API __declspec(dllexport)
#  else
#    define POPE_API __declspec(dllimport)
#  endif
#elif defined(__GNUC__) && __GNUC__ >= 4
#  define POPE_API __attribute__((visibility("default")))
#else
#  define POPE_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define POPE_FORMAT_VERSION 1
#define POPE_DEFAULT_CLIP 10.0

typedef enum pope_status {
  POPE_OK = 0,
  /* Bad input: files, shapes, flags, missing propensities. */
  POPE_ERR_VALIDATION = 1,
  /* Numerical failure: divergence, non-finite estimates. */
  POPE_ERR_RUNTIME = 2,
  /* Unexpected internal failure (e.g. out of memory). */
  POPE_ERR_INTERNAL = 3
} pope_status;

typedef struct pope_dataset pope_dataset;
typedef struct pope_policy pope_policy;
typedef struct pope_trace pope_trace;
typedef struct pope_audit pope_audit;
typedef struct pope_pareto pope_pareto;
typedef struct pope_generations pope_generations;
typedef struct pope_metric_report pope_metric_report;

POPE_API const char* pope_version(void);
POPE_API const char* pope_last_error(void);

/* Receives library warnings (degenerate but legal inputs). Passing NULL
 * restores the default, which prints to stderr. */
typedef void (*pope_warning_fn)(const char* message, void* user_data);
POPE_API void pope_set_warning_callback(pope_warning_fn fn, void* user_data);

/* ---- Datasets ---------------------------------------------------------- */

POPE_API pope_status pope_dataset_load(const char* path, pope_dataset** out);
POPE_API pope_status pope_dataset_save(const pope_dataset* dataset,
                                       const char* path);
POPE_API size_t pope_dataset_size(const pope_dataset* dataset);
/* Total number of logged responses across slates. */
POPE_API size_t pope_dataset_logged_count(const pope_dataset* dataset);
/* 1 if every slate carries logging_probs, else 0. */
POPE_API int pope_dataset_has_propensities(const pope_dataset* dataset);
POPE_API void pope_dataset_free(pope_dataset* dataset);

typedef enum pope_feedback_model {
  POPE_FEEDBACK_PLACKETT_LUCE = 0,
  POPE_FEEDBACK_LINEAR = 1
} pope_feedback_model;

typedef struct pope_sim_config {
  size_t n_queries;
  size_t pool_size;
  size_t slate_size;
  double logging_temperature;
  pope_feedback_model feedback_model;
  double pl_scale;
  size_t annotators;
  /* 0 selects ceil(pool_size / 2). */
  size_t upvote_depth;
  double linear_noise;
  uint64_t seed;
} pope_sim_config;

POPE_API void pope_sim_config_default(pope_sim_config* config);
POPE_API pope_status pope_simulate(const pope_sim_config* config,
                                   pope_dataset** out);
/* Name of the logged-slate sampling scheme used by pope_simulate. */
POPE_API const char* pope_simulate_sampler(void);

/* ---- Policies ---------------------------------------------------------- */

/* Tabular policy with zero logits for every query in the dataset. */
POPE_API pope_status pope_policy_uniform(const pope_dataset* dataset,
                                         pope_policy** out);
/* Tabular policy with `margin` on each query's highest-feedback response. */
POPE_API pope_status pope_policy_argmax_feedback(const pope_dataset* dataset,
                                                 double margin,
                                                 pope_policy** out);
/* Tabular policy from explicit logits for a single query. */
POPE_API pope_status pope_policy_tabular_from_logits(const char* query_id,
                                                     const double* logits,
                                                     size_t count,
                                                     double temperature,
                                                     pope_policy** out);
POPE_API pope_status pope_policy_load_tabular(const char* path,
                                              pope_policy** out);
/* Token log-likelihood policy from a dataset-format JSONL file. raw != 0
 * selects unnormalized sequence scores (comparison mode). */
POPE_API pope_status pope_policy_load_logprobs(const char* path, int raw,
                                               pope_policy** out);
/* Token log-likelihood policy built from the dataset's own token_logps. */
POPE_API pope_status pope_policy_from_dataset_logprobs(
    const pope_dataset* dataset, pope_policy** out);
/* Tabular policies only. */
POPE_API pope_status pope_policy_save(const pope_policy* policy,
                                      const char* path);
POPE_API int pope_policy_is_tabular(const pope_policy* policy);
/* Fails with "policy/pool size mismatch" or "unparameterized query". */
POPE_API pope_status pope_policy_check(const pope_policy* policy,
                                       const pope_dataset* dataset);
/* Writes the pool distribution of slate `index` into out[0..capacity) and
 * the pool size into *length. Fails if capacity is too small. */
POPE_API pope_status pope_policy_distribution(const pope_policy* policy,
                                              const pope_dataset* dataset,
                                              size_t index, double* out,
                                              size_t capacity,
                                              size_t* length);
POPE_API pope_status pope_policy_mean_entropy(const pope_policy* policy,
                                              const pope_dataset* dataset,
                                              double* out);
POPE_API pope_status pope_policy_expected_feedback(const pope_policy* policy,
                                                   const pope_dataset* dataset,
                                                   double* out);
POPE_API void pope_policy_free(pope_policy* policy);

/* ---- Estimation -------------------------------------------------------- */

typedef struct pope_estimate {
  double v_cu;
  double v_div;
  double v_pope;
  double v_lower_bound;
  size_t n_slates;
  double weight_min;
  double weight_max;
  double weight_mean;
  double effective_sample_size;
  size_t weight_count;
  size_t weights_clipped;
  size_t slate_weights_clipped;
} pope_estimate;

/* `logging` may be NULL; it is consulted only for slates without
 * logging_probs. */
POPE_API pope_status pope_evaluate(const pope_dataset* dataset,
                                   const pope_policy* target,
                                   const pope_policy* logging, double clip,
                                   pope_estimate* out);

typedef enum pope_objective {
  POPE_OBJECTIVE_CU = 0,
  POPE_OBJECTIVE_DIV = 1,
  POPE_OBJECTIVE_BOUND = 2
} pope_objective;

/* Exact enumerated value for slate `index` (pools of at most 12). */
POPE_API pope_status pope_oracle_slate(const pope_dataset* dataset,
                                       size_t index,
                                       const pope_policy* target,
                                       pope_objective objective, double* out);
/* Mean of pope_oracle_slate over the dataset. */
POPE_API pope_status pope_oracle(const pope_dataset* dataset,
                                 const pope_policy* target,
                                 pope_objective objective, double* out);

typedef struct pope_audit_row {
  const char* query_id; /* owned by the audit handle */
  double lhs;
  double rhs;
  int satisfied;
  int equality;
} pope_audit_row;

POPE_API pope_status pope_audit_run(const pope_dataset* dataset,
                                    const pope_policy* target,
                                    const pope_policy* logging,
                                    pope_audit** out);
POPE_API size_t pope_audit_size(const pope_audit* audit);
POPE_API pope_status pope_audit_row_at(const pope_audit* audit, size_t index,
                                       pope_audit_row* out);
POPE_API double pope_audit_satisfied_fraction(const pope_audit* audit);
POPE_API size_t pope_audit_equality_count(const pope_audit* audit);
POPE_API void pope_audit_free(pope_audit* audit);

/* ---- Optimization ------------------------------------------------------ */

typedef struct pope_gradcheck_report {
  double max_abs_error;
  double max_rel_error;
  double worst_analytic;
  double worst_numeric;
  size_t worst_index;
  size_t coordinates;
  char worst_query[256];
} pope_gradcheck_report;

/* `policy` must be tabular. Clipping is always off. */
POPE_API pope_status pope_gradcheck(const pope_dataset* dataset,
                                    const pope_policy* policy,
                                    const pope_policy* logging,
                                    double epsilon, double lambda_div,
                                    pope_gradcheck_report* out);

typedef struct pope_train_config {
  double learning_rate;
  int steps;
  double lambda_div;
  double clip;
  uint64_t seed;
  int trace_every;
  /* 0 means full batch. */
  size_t batch_size;
} pope_train_config;

typedef struct pope_trace_row {
  int step;
  double objective;
  double v_cu;
  double v_div;
  double grad_norm;
  double entropy;
} pope_trace_row;

POPE_API void pope_train_config_default(pope_train_config* config);

/* Gradient ascent from `init` (tabular). On divergence returns
 * POPE_ERR_RUNTIME and still fills *out_policy (last finite parameters) and
 * *out_trace (rows up to the failure). */
POPE_API pope_status pope_train(const pope_dataset* dataset,
                                const pope_policy* init,
                                const pope_policy* logging,
                                const pope_train_config* config,
                                pope_policy** out_policy,
                                pope_trace** out_trace);
POPE_API size_t pope_trace_size(const pope_trace* trace);
POPE_API pope_status pope_trace_row_at(const pope_trace* trace, size_t index,
                                       pope_trace_row* out);
/* CSV with header step,objective,v_cu,v_div,grad_norm,entropy. */
POPE_API pope_status pope_trace_write_csv(const pope_trace* trace,
                                          const char* path);
POPE_API void pope_trace_free(pope_trace* trace);

typedef struct pope_pareto_point {
  double lambda;
  double utility;
  double entropy;
  int on_front;
} pope_pareto_point;

POPE_API pope_status pope_pareto_sweep(const pope_dataset* dataset,
                                       const pope_policy* init,
                                       const pope_policy* logging,
                                       const pope_train_config* config,
                                       const double* lambdas, size_t count,
                                       pope_pareto** out);
POPE_API size_t pope_pareto_size(const pope_pareto* pareto);
POPE_API pope_status pope_pareto_point_at(const pope_pareto* pareto,
                                          size_t index,
                                          pope_pareto_point* out);
POPE_API size_t pope_pareto_front_size(const pope_pareto* pareto);
/* Index into the points of the j-th front member. */
POPE_API size_t pope_pareto_front_index(const pope_pareto* pareto, size_t j);
POPE_API void pope_pareto_free(pope_pareto* pareto);

/* ---- Metrics ----------------------------------------------------------- */

typedef enum pope_embedder {
  POPE_EMBEDDER_HASH = 0,
  POPE_EMBEDDER_PRECOMPUTED = 1
} pope_embedder;

POPE_API pope_status pope_generations_load(const char* path,
                                           pope_generations** out);
POPE_API size_t pope_generations_size(const pope_generations* generations);
POPE_API void pope_generations_free(pope_generations* generations);

POPE_API size_t pope_metric_count(void);
/* Snake-case metric name, e.g. "pl_score". */
POPE_API const char* pope_metric_name(size_t metric);
/* Table column label, e.g. "PL-Score". */
POPE_API const char* pope_metric_label(size_t metric);

POPE_API pope_status pope_metrics_run(const pope_generations* generations,
                                      double delta, double tau,
                                      pope_embedder embedder,
                                      pope_metric_report** out);
POPE_API const char* pope_metric_report_embedder(
    const pope_metric_report* report);
POPE_API double pope_metric_report_diversity_normalizer(
    const pope_metric_report* report);
POPE_API size_t pope_metric_report_query_count(
    const pope_metric_report* report);
POPE_API const char* pope_metric_report_query_id(
    const pope_metric_report* report, size_t query);
/* Returns 1 and writes *out when defined; 0 when the metric was skipped. */
POPE_API int pope_metric_report_value(const pope_metric_report* report,
                                      size_t query, size_t metric,
                                      double* out);
POPE_API int pope_metric_report_corpus(const pope_metric_report* report,
                                       size_t metric, double* out);
POPE_API size_t pope_metric_report_skipped(const pope_metric_report* report,
                                           size_t metric);
POPE_API void pope_metric_report_free(pope_metric_report* report);

#ifdef __cplusplus
}
#endif

#endif /* POPE_H_ */
