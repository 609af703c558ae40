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

// Command-line front end. Talks to the library exclusively through the C API
// in pope/pope.h. Exit codes: 0 success, 1 validation error, 2 runtime or
// divergence error.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pope/pope.h"

namespace {

using Json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

// Carries an exit code out of a subcommand.
struct CliFailure {
  int code;
  std::string message;
};

[[noreturn]] void FailWith(int code, const std::string& message) {
  throw CliFailure{code, message};
}

void Check(pope_status status, const std::string& context = "") {
  if (status == POPE_OK) return;
  const std::string prefix = context.empty() ? "" : context + ": ";
  FailWith(status == POPE_ERR_VALIDATION ? kExitValidation : kExitRuntime,
           prefix + pope_last_error());
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Dataset =
    std::unique_ptr<pope_dataset, Deleter<pope_dataset, pope_dataset_free>>;
using PolicyHandle =
    std::unique_ptr<pope_policy, Deleter<pope_policy, pope_policy_free>>;
using Trace = std::unique_ptr<pope_trace, Deleter<pope_trace, pope_trace_free>>;
using Audit = std::unique_ptr<pope_audit, Deleter<pope_audit, pope_audit_free>>;
using Pareto =
    std::unique_ptr<pope_pareto, Deleter<pope_pareto, pope_pareto_free>>;
using Generations =
    std::unique_ptr<pope_generations,
                    Deleter<pope_generations, pope_generations_free>>;
using MetricReport =
    std::unique_ptr<pope_metric_report,
                    Deleter<pope_metric_report, pope_metric_report_free>>;

std::string Fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) FailWith(kExitValidation, "cannot write " + path);
  out << text;
}

void WriteJson(const std::string& path, const Json& doc) {
  WriteText(path, doc.dump(2) + "\n");
}

Json Envelope(const std::string& command, Json config) {
  Json doc;
  doc["format_version"] = POPE_FORMAT_VERSION;
  doc["command"] = command;
  doc["config"] = std::move(config);
  return doc;
}

Json NumberOrNull(double v) { return std::isfinite(v) ? Json(v) : Json(); }

Dataset LoadData(const std::string& path) {
  pope_dataset* raw = nullptr;
  Check(pope_dataset_load(path.c_str(), &raw), path);
  return Dataset(raw);
}

// uniform | logging | tabular:PATH | logprobs:PATH | logprobs-raw:PATH
PolicyHandle MakePolicy(const std::string& spec, const pope_dataset* data) {
  pope_policy* raw = nullptr;
  auto after = [&](const std::string& prefix) -> std::optional<std::string> {
    if (spec.rfind(prefix, 0) == 0 && spec.size() > prefix.size()) {
      return spec.substr(prefix.size());
    }
    return std::nullopt;
  };
  if (spec == "uniform") {
    Check(pope_policy_uniform(data, &raw), "policy");
  } else if (spec == "logging") {
    Check(pope_policy_from_dataset_logprobs(data, &raw), "policy");
  } else if (auto path = after("tabular:")) {
    Check(pope_policy_load_tabular(path->c_str(), &raw), *path);
  } else if (auto path = after("logprobs-raw:")) {
    Check(pope_policy_load_logprobs(path->c_str(), 1, &raw), *path);
  } else if (auto path = after("logprobs:")) {
    Check(pope_policy_load_logprobs(path->c_str(), 0, &raw), *path);
  } else {
    FailWith(kExitValidation,
             "unknown policy spec \"" + spec +
                 "\" (expected uniform, logging, tabular:PATH, "
                 "logprobs:PATH or logprobs-raw:PATH)");
  }
  PolicyHandle policy(raw);
  Check(pope_policy_check(policy.get(), data), "policy " + spec);
  return policy;
}

PolicyHandle MaybeLoggingPolicy(const std::string& spec,
                                const pope_dataset* data) {
  if (spec.empty()) return PolicyHandle(nullptr);
  return MakePolicy(spec, data);
}

// "none" disables clipping.
double ParseClip(const std::string& text) {
  if (text == "none") return 0.0;
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size() || !(v > 0.0) || !std::isfinite(v)) throw 0;
    return v;
  } catch (...) {
    FailWith(kExitValidation,
             "--clip must be a positive number or \"none\", got \"" + text +
                 "\"");
  }
}

Json ClipJson(double clip) { return clip > 0.0 ? Json(clip) : Json("none"); }

std::vector<double> ParseLambdas(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      std::size_t used = 0;
      const double v = std::stod(item, &used);
      if (!(v >= 0.0) || !std::isfinite(v)) throw 0;
      out.push_back(v);
    } catch (...) {
      FailWith(kExitValidation, "--lambdas: invalid value \"" + item + "\"");
    }
  }
  if (out.empty()) FailWith(kExitValidation, "--lambdas must be non-empty");
  return out;
}

// ---- simulate ----

struct SimulateArgs {
  std::string out;
  std::size_t queries = 0;
  std::size_t pool_size = 0;
  std::size_t slate_size = 0;
  std::uint64_t seed = 0;
  std::string feedback = "pl";
  std::size_t annotators = 0;
  double logging_temp = 0.0;
  double pl_scale = 0.0;
  std::size_t upvote_depth = 0;
  double linear_noise = 0.0;
};

int RunSimulate(const SimulateArgs& a) {
  if (a.queries < 1) FailWith(kExitValidation, "--queries must be >= 1");
  if (a.pool_size < 1) FailWith(kExitValidation, "--pool-size must be >= 1");
  if (a.slate_size < 1 || a.slate_size > a.pool_size) {
    FailWith(kExitValidation, "--slate-size (" + std::to_string(a.slate_size) +
                                  ") must be between 1 and --pool-size (" +
                                  std::to_string(a.pool_size) + ")");
  }
  pope_sim_config config;
  pope_sim_config_default(&config);
  config.n_queries = a.queries;
  config.pool_size = a.pool_size;
  config.slate_size = a.slate_size;
  config.seed = a.seed;
  config.feedback_model =
      a.feedback == "linear" ? POPE_FEEDBACK_LINEAR : POPE_FEEDBACK_PLACKETT_LUCE;
  config.annotators = a.annotators;
  config.logging_temperature = a.logging_temp;
  config.pl_scale = a.pl_scale;
  config.upvote_depth = a.upvote_depth;
  config.linear_noise = a.linear_noise;

  pope_dataset* raw = nullptr;
  Check(pope_simulate(&config, &raw), "simulate");
  Dataset data(raw);
  Check(pope_dataset_save(data.get(), a.out.c_str()), a.out);

  Json cfg;
  cfg["n_queries"] = config.n_queries;
  cfg["pool_size"] = config.pool_size;
  cfg["slate_size"] = config.slate_size;
  cfg["logging_temperature"] = NumberOrNull(config.logging_temperature);
  cfg["feedback_model"] = a.feedback == "linear" ? "linear" : "plackett_luce";
  cfg["pl_scale"] = config.pl_scale;
  cfg["annotators"] = config.annotators;
  cfg["upvote_depth"] =
      config.upvote_depth > 0 ? config.upvote_depth : (config.pool_size + 1) / 2;
  cfg["linear_noise"] = config.linear_noise;
  cfg["seed"] = config.seed;
  Json meta = Envelope("simulate", std::move(cfg));
  meta["slate_sampler"] = pope_simulate_sampler();
  meta["n_slates"] = pope_dataset_size(data.get());
  meta["dataset"] = a.out;
  WriteJson(a.out + ".meta.json", meta);

  std::cout << "wrote " << pope_dataset_size(data.get()) << " slates to "
            << a.out << " (metadata: " << a.out << ".meta.json)\n";
  return kExitOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string data;
  std::string policy = "uniform";
  std::string logging_policy;
  std::string clip = "10";
  std::string out;
};

int RunEvaluate(const EvaluateArgs& a) {
  const double clip = ParseClip(a.clip);
  Dataset data = LoadData(a.data);
  PolicyHandle target = MakePolicy(a.policy, data.get());
  PolicyHandle logging = MaybeLoggingPolicy(a.logging_policy, data.get());

  pope_estimate est{};
  Check(pope_evaluate(data.get(), target.get(), logging.get(), clip, &est),
        "evaluate");

  Json cfg;
  cfg["data"] = a.data;
  cfg["policy"] = a.policy;
  cfg["logging_policy"] = a.logging_policy.empty() ? Json() : Json(a.logging_policy);
  cfg["clip"] = ClipJson(clip);
  Json doc = Envelope("evaluate", std::move(cfg));
  doc["v_cu"] = est.v_cu;
  doc["v_div"] = est.v_div;
  doc["v_pope"] = est.v_pope;
  doc["v_lower_bound"] = est.v_lower_bound;
  doc["n_slates"] = est.n_slates;
  Json ws;
  ws["min"] = est.weight_min;
  ws["max"] = est.weight_max;
  ws["mean"] = est.weight_mean;
  ws["effective_sample_size"] = est.effective_sample_size;
  ws["count"] = est.weight_count;
  ws["clipped"] = est.weights_clipped;
  ws["slate_clipped"] = est.slate_weights_clipped;
  doc["weight_stats"] = std::move(ws);
  if (!a.out.empty()) WriteJson(a.out, doc);

  std::cout << "v_cu          " << Fmt(est.v_cu) << "\n"
            << "v_div         " << Fmt(est.v_div) << "\n"
            << "v_pope        " << Fmt(est.v_pope) << "\n"
            << "v_lower_bound " << Fmt(est.v_lower_bound) << "\n"
            << "ess           " << Fmt(est.effective_sample_size) << " of "
            << est.weight_count << "\n";
  return kExitOk;
}

// ---- optimize / pareto ----

struct TrainArgs {
  std::string data;
  std::string init = "uniform";
  std::string logging_policy;
  double lr = 0.1;
  int steps = 200;
  double lambda_div = 1.0;
  std::string clip = "10";
  std::uint64_t seed = 0;
  int trace_every = 1;
  std::size_t batch_size = 0;
  std::string out;
  std::string trace;
  std::string report;
  std::string lambdas;
};

pope_train_config ToConfig(const TrainArgs& a, double clip) {
  pope_train_config config;
  pope_train_config_default(&config);
  config.learning_rate = a.lr;
  config.steps = a.steps;
  config.lambda_div = a.lambda_div;
  config.clip = clip;
  config.seed = a.seed;
  config.trace_every = a.trace_every;
  config.batch_size = a.batch_size;
  return config;
}

Json TrainConfigJson(const TrainArgs& a, double clip) {
  Json cfg;
  cfg["data"] = a.data;
  cfg["init"] = a.init;
  cfg["logging_policy"] = a.logging_policy.empty() ? Json() : Json(a.logging_policy);
  cfg["learning_rate"] = a.lr;
  cfg["steps"] = a.steps;
  cfg["clip"] = ClipJson(clip);
  cfg["seed"] = a.seed;
  cfg["trace_every"] = a.trace_every;
  cfg["batch_size"] = a.batch_size;
  return cfg;
}

int RunOptimize(const TrainArgs& a) {
  const double clip = ParseClip(a.clip);
  Dataset data = LoadData(a.data);
  PolicyHandle init = MakePolicy(a.init, data.get());
  if (!pope_policy_is_tabular(init.get())) {
    FailWith(kExitValidation, "--init must be uniform or tabular:PATH");
  }
  PolicyHandle logging = MaybeLoggingPolicy(a.logging_policy, data.get());
  const pope_train_config config = ToConfig(a, clip);

  pope_policy* raw_policy = nullptr;
  pope_trace* raw_trace = nullptr;
  const pope_status status = pope_train(data.get(), init.get(), logging.get(),
                                        &config, &raw_policy, &raw_trace);
  const std::string error = status == POPE_OK ? "" : pope_last_error();
  PolicyHandle policy(raw_policy);
  Trace trace(raw_trace);
  if (trace && !a.trace.empty()) {
    Check(pope_trace_write_csv(trace.get(), a.trace.c_str()), a.trace);
  }
  if (status != POPE_OK) {
    FailWith(status == POPE_ERR_VALIDATION ? kExitValidation : kExitRuntime,
             "optimize: " + error);
  }
  Check(pope_policy_save(policy.get(), a.out.c_str()), a.out);

  const std::size_t rows = pope_trace_size(trace.get());
  pope_trace_row first{}, last{};
  Check(pope_trace_row_at(trace.get(), 0, &first));
  Check(pope_trace_row_at(trace.get(), rows - 1, &last));
  double entropy = 0.0, utility = 0.0;
  Check(pope_policy_mean_entropy(policy.get(), data.get(), &entropy));
  Check(pope_policy_expected_feedback(policy.get(), data.get(), &utility));

  if (!a.report.empty()) {
    Json cfg = TrainConfigJson(a, clip);
    cfg["lambda_div"] = a.lambda_div;
    cfg["out"] = a.out;
    cfg["trace"] = a.trace.empty() ? Json() : Json(a.trace);
    Json doc = Envelope("optimize", std::move(cfg));
    doc["initial_objective"] = first.objective;
    doc["final_objective"] = last.objective;
    doc["final_entropy"] = entropy;
    doc["final_expected_feedback"] = utility;
    WriteJson(a.report, doc);
  }
  std::cout << "objective " << Fmt(first.objective) << " -> "
            << Fmt(last.objective) << " over " << a.steps << " steps\n"
            << "entropy   " << Fmt(entropy) << "\n"
            << "expected feedback " << Fmt(utility) << "\n"
            << "wrote policy to " << a.out << "\n";
  return kExitOk;
}

int RunPareto(const TrainArgs& a) {
  const std::vector<double> lambdas = ParseLambdas(a.lambdas);
  const double clip = ParseClip(a.clip);
  Dataset data = LoadData(a.data);
  PolicyHandle init = MakePolicy(a.init, data.get());
  if (!pope_policy_is_tabular(init.get())) {
    FailWith(kExitValidation, "--init must be uniform or tabular:PATH");
  }
  PolicyHandle logging = MaybeLoggingPolicy(a.logging_policy, data.get());
  const pope_train_config config = ToConfig(a, clip);

  pope_pareto* raw = nullptr;
  Check(pope_pareto_sweep(data.get(), init.get(), logging.get(), &config,
                          lambdas.data(), lambdas.size(), &raw),
        "pareto");
  Pareto pareto(raw);

  Json cfg = TrainConfigJson(a, clip);
  cfg["lambdas"] = lambdas;
  Json doc = Envelope("pareto", std::move(cfg));
  doc["utility_axis"] = "expected_feedback";
  doc["diversity_axis"] = "mean_policy_entropy";
  Json points = Json::array();
  std::cout << "lambda  utility  entropy  front\n";
  for (std::size_t i = 0; i < pope_pareto_size(pareto.get()); ++i) {
    pope_pareto_point p{};
    Check(pope_pareto_point_at(pareto.get(), i, &p));
    Json item;
    item["lambda"] = p.lambda;
    item["utility"] = p.utility;
    item["entropy"] = p.entropy;
    item["on_front"] = p.on_front != 0;
    points.push_back(std::move(item));
    std::cout << Fmt(p.lambda) << "  " << Fmt(p.utility) << "  "
              << Fmt(p.entropy) << "  " << (p.on_front ? "*" : "") << "\n";
  }
  Json front = Json::array();
  for (std::size_t j = 0; j < pope_pareto_front_size(pareto.get()); ++j) {
    front.push_back(pope_pareto_front_index(pareto.get(), j));
  }
  doc["points"] = std::move(points);
  doc["front"] = std::move(front);
  WriteJson(a.out, doc);
  return kExitOk;
}

// ---- gradcheck / audit / oracle ----

struct DiagnosticArgs {
  std::string data;
  std::string policy = "uniform";
  std::string logging_policy;
  double eps = 1e-4;
  double lambda_div = 1.0;
  std::string objective = "bound";
  std::string out;
};

constexpr double kGradCheckExitThreshold = 1e-4;

int RunGradcheck(const DiagnosticArgs& a) {
  Dataset data = LoadData(a.data);
  PolicyHandle policy = MakePolicy(a.policy, data.get());
  if (!pope_policy_is_tabular(policy.get())) {
    FailWith(kExitValidation, "--policy must be uniform or tabular:PATH");
  }
  PolicyHandle logging = MaybeLoggingPolicy(a.logging_policy, data.get());
  pope_gradcheck_report r{};
  Check(pope_gradcheck(data.get(), policy.get(), logging.get(), a.eps,
                       a.lambda_div, &r),
        "gradcheck");
  Json cfg;
  cfg["data"] = a.data;
  cfg["policy"] = a.policy;
  cfg["logging_policy"] = a.logging_policy.empty() ? Json() : Json(a.logging_policy);
  cfg["eps"] = a.eps;
  cfg["lambda_div"] = a.lambda_div;
  cfg["clip"] = "none";
  Json doc = Envelope("gradcheck", std::move(cfg));
  doc["max_abs_error"] = r.max_abs_error;
  doc["max_rel_error"] = r.max_rel_error;
  doc["worst_query"] = r.worst_query;
  doc["worst_index"] = r.worst_index;
  doc["worst_analytic"] = r.worst_analytic;
  doc["worst_numeric"] = r.worst_numeric;
  doc["coordinates"] = r.coordinates;
  doc["threshold"] = kGradCheckExitThreshold;
  if (!a.out.empty()) WriteJson(a.out, doc);
  std::cout << "max abs error " << Fmt(r.max_abs_error) << "\n"
            << "max rel error " << Fmt(r.max_rel_error) << " at "
            << r.worst_query << "[" << r.worst_index << "] over "
            << r.coordinates << " coordinates\n";
  if (r.max_rel_error > kGradCheckExitThreshold) {
    FailWith(kExitRuntime, "gradcheck: relative error above " +
                               Fmt(kGradCheckExitThreshold));
  }
  return kExitOk;
}

int RunAudit(const DiagnosticArgs& a) {
  Dataset data = LoadData(a.data);
  PolicyHandle policy = MakePolicy(a.policy, data.get());
  PolicyHandle logging = MaybeLoggingPolicy(a.logging_policy, data.get());
  pope_audit* raw = nullptr;
  Check(pope_audit_run(data.get(), policy.get(), logging.get(), &raw), "audit");
  Audit audit(raw);

  Json cfg;
  cfg["data"] = a.data;
  cfg["policy"] = a.policy;
  cfg["logging_policy"] = a.logging_policy.empty() ? Json() : Json(a.logging_policy);
  cfg["clip"] = "none";
  Json doc = Envelope("audit", std::move(cfg));
  Json rows = Json::array();
  std::cout << "query_id  lhs  rhs  satisfied\n";
  for (std::size_t i = 0; i < pope_audit_size(audit.get()); ++i) {
    pope_audit_row row{};
    Check(pope_audit_row_at(audit.get(), i, &row));
    Json item;
    item["query_id"] = row.query_id;
    item["lhs"] = row.lhs;
    item["rhs"] = row.rhs;
    item["satisfied"] = row.satisfied != 0;
    item["equality"] = row.equality != 0;
    rows.push_back(std::move(item));
    std::cout << row.query_id << "  " << Fmt(row.lhs) << "  " << Fmt(row.rhs)
              << "  " << (row.satisfied ? (row.equality ? "equal" : "yes") : "no")
              << "\n";
  }
  const double fraction = pope_audit_satisfied_fraction(audit.get());
  doc["satisfied_fraction"] = fraction;
  doc["equality_count"] = pope_audit_equality_count(audit.get());
  doc["slates"] = std::move(rows);
  if (!a.out.empty()) WriteJson(a.out, doc);
  std::cout << "satisfied fraction " << Fmt(fraction) << "\n";
  return kExitOk;
}

int RunOracle(const DiagnosticArgs& a) {
  pope_objective objective;
  if (a.objective == "cu") {
    objective = POPE_OBJECTIVE_CU;
  } else if (a.objective == "div") {
    objective = POPE_OBJECTIVE_DIV;
  } else if (a.objective == "bound") {
    objective = POPE_OBJECTIVE_BOUND;
  } else {
    FailWith(kExitValidation, "--objective must be cu, div or bound");
  }
  Dataset data = LoadData(a.data);
  PolicyHandle policy = MakePolicy(a.policy, data.get());
  std::vector<double> per_slate;
  for (std::size_t i = 0; i < pope_dataset_size(data.get()); ++i) {
    double v = 0.0;
    Check(pope_oracle_slate(data.get(), i, policy.get(), objective, &v),
          "oracle");
    per_slate.push_back(v);
  }
  double mean = 0.0;
  Check(pope_oracle(data.get(), policy.get(), objective, &mean), "oracle");
  Json cfg;
  cfg["data"] = a.data;
  cfg["policy"] = a.policy;
  cfg["objective"] = a.objective;
  Json doc = Envelope("oracle", std::move(cfg));
  doc["value"] = mean;
  doc["per_slate"] = per_slate;
  if (!a.out.empty()) WriteJson(a.out, doc);
  std::cout << Fmt(mean) << "\n";
  return kExitOk;
}

// ---- metrics ----

struct MetricsArgs {
  std::string generations;
  double delta = 0.8;
  double tau = 0.5;
  std::string embedder = "hash";
  std::string out;
  std::string csv;
};

int RunMetrics(const MetricsArgs& a) {
  pope_generations* raw_gens = nullptr;
  Check(pope_generations_load(a.generations.c_str(), &raw_gens), a.generations);
  Generations gens(raw_gens);
  const pope_embedder embedder =
      a.embedder == "precomputed" ? POPE_EMBEDDER_PRECOMPUTED : POPE_EMBEDDER_HASH;
  pope_metric_report* raw = nullptr;
  Check(pope_metrics_run(gens.get(), a.delta, a.tau, embedder, &raw), "metrics");
  MetricReport report(raw);

  const std::size_t metrics = pope_metric_count();
  const std::size_t queries = pope_metric_report_query_count(report.get());
  auto value_json = [&](std::size_t q, std::size_t m) {
    double v = 0.0;
    return pope_metric_report_value(report.get(), q, m, &v) ? Json(v) : Json();
  };

  Json cfg;
  cfg["generations"] = a.generations;
  cfg["delta"] = a.delta;
  cfg["tau"] = a.tau;
  cfg["embedder"] = a.embedder;
  Json doc = Envelope("metrics", std::move(cfg));
  doc["embedder_id"] = pope_metric_report_embedder(report.get());
  doc["diversity_normalizer"] =
      pope_metric_report_diversity_normalizer(report.get());
  doc["n_queries"] = queries;
  Json corpus, skipped;
  for (std::size_t m = 0; m < metrics; ++m) {
    double v = 0.0;
    corpus[pope_metric_name(m)] =
        pope_metric_report_corpus(report.get(), m, &v) ? Json(v) : Json();
    skipped[pope_metric_name(m)] = pope_metric_report_skipped(report.get(), m);
  }
  doc["corpus"] = std::move(corpus);
  doc["skipped"] = std::move(skipped);
  Json per_query = Json::array();
  for (std::size_t q = 0; q < queries; ++q) {
    Json item;
    item["query_id"] = pope_metric_report_query_id(report.get(), q);
    for (std::size_t m = 0; m < metrics; ++m) {
      item[pope_metric_name(m)] = value_json(q, m);
    }
    per_query.push_back(std::move(item));
  }
  doc["queries"] = std::move(per_query);
  WriteJson(a.out, doc);

  if (!a.csv.empty()) {
    auto cell = [](const Json& v) {
      if (v.is_null()) return std::string();
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", v.get<double>());
      return std::string(buf);
    };
    std::string text = "query_id";
    for (std::size_t m = 0; m < metrics; ++m) {
      text += ",";
      text += pope_metric_label(m);
    }
    text += "\n";
    for (std::size_t q = 0; q < queries; ++q) {
      text += Json(pope_metric_report_query_id(report.get(), q)).dump();
      for (std::size_t m = 0; m < metrics; ++m) text += "," + cell(value_json(q, m));
      text += "\n";
    }
    text += "mean";
    for (std::size_t m = 0; m < metrics; ++m) {
      text += "," + cell(doc["corpus"][pope_metric_name(m)]);
    }
    text += "\n";
    WriteText(a.csv, text);
  }

  for (std::size_t m = 0; m < metrics; ++m) {
    double v = 0.0;
    std::cout << pope_metric_label(m) << "  "
              << (pope_metric_report_corpus(report.get(), m, &v) ? Fmt(v) : "n/a")
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pluralistic off-policy evaluation, optimization and metrics"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pope_version());

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Write a synthetic logged dataset");
  simulate->add_option("--out", sim.out, "Output JSONL path")->required();
  simulate->add_option("--queries", sim.queries, "Number of queries")->default_val(50);
  simulate->add_option("--pool-size", sim.pool_size, "Candidate pool size L")->default_val(6);
  simulate->add_option("--slate-size", sim.slate_size, "Logged slate size K")->default_val(3);
  simulate->add_option("--seed", sim.seed, "Random seed")->default_val(7);
  simulate->add_option("--feedback", sim.feedback, "Feedback model")
      ->check(CLI::IsMember({"pl", "linear"}))
      ->default_val("pl");
  simulate->add_option("--annotators", sim.annotators, "Simulated annotators per query")
      ->default_val(20);
  simulate->add_option("--logging-temp", sim.logging_temp, "Logging policy temperature")
      ->default_val(1.0);
  simulate->add_option("--pl-scale", sim.pl_scale, "Plackett-Luce weight scale")
      ->default_val(1.5);
  simulate->add_option("--upvote-depth", sim.upvote_depth,
                       "Ranking prefix each annotator upvotes (0 = ceil(L/2))")
      ->default_val(0);
  simulate->add_option("--linear-noise", sim.linear_noise,
                       "Noise standard deviation for linear feedback")
      ->default_val(0.1);

  EvaluateArgs eval;
  auto* evaluate = app.add_subcommand("evaluate", "Estimate a policy's value");
  evaluate->add_option("--data", eval.data, "Dataset JSONL")->required();
  evaluate->add_option("--policy", eval.policy,
                       "uniform | logging | tabular:PATH | logprobs:PATH")
      ->default_val("uniform");
  evaluate->add_option("--logging-policy", eval.logging_policy,
                       "Logging policy for slates without logging_probs");
  evaluate->add_option("--clip", eval.clip, "Weight clip or none")->default_val("10");
  evaluate->add_option("--out", eval.out, "Report JSON path");

  TrainArgs opt;
  auto* optimize = app.add_subcommand("optimize", "Train a tabular policy");
  optimize->add_option("--data", opt.data, "Dataset JSONL")->required();
  optimize->add_option("--init", opt.init, "uniform | tabular:PATH")->default_val("uniform");
  optimize->add_option("--logging-policy", opt.logging_policy,
                       "Logging policy for slates without logging_probs");
  optimize->add_option("--lr", opt.lr, "Learning rate")->default_val(0.1);
  optimize->add_option("--steps", opt.steps, "Gradient steps")->default_val(200);
  optimize->add_option("--lambda-div", opt.lambda_div, "Diversity weight")->default_val(1.0);
  optimize->add_option("--clip", opt.clip, "Weight clip or none")->default_val("10");
  optimize->add_option("--seed", opt.seed, "Seed for minibatching")->default_val(0);
  optimize->add_option("--trace-every", opt.trace_every, "Trace stride")->default_val(1);
  optimize->add_option("--batch-size", opt.batch_size, "Slates per step (0 = all)")
      ->default_val(0);
  optimize->add_option("--out", opt.out, "Output policy JSON")->required();
  optimize->add_option("--trace", opt.trace, "Trace CSV path");
  optimize->add_option("--report", opt.report, "Run summary JSON path");

  TrainArgs par;
  auto* pareto = app.add_subcommand("pareto", "Sweep the diversity weight");
  pareto->add_option("--data", par.data, "Dataset JSONL")->required();
  pareto->add_option("--lambdas", par.lambdas, "Comma-separated lambda values")->required();
  pareto->add_option("--init", par.init, "uniform | tabular:PATH")->default_val("uniform");
  pareto->add_option("--logging-policy", par.logging_policy,
                     "Logging policy for slates without logging_probs");
  pareto->add_option("--lr", par.lr, "Learning rate")->default_val(0.1);
  pareto->add_option("--steps", par.steps, "Gradient steps per lambda")->default_val(200);
  pareto->add_option("--clip", par.clip, "Weight clip or none")->default_val("10");
  pareto->add_option("--seed", par.seed, "Seed for minibatching")->default_val(0);
  pareto->add_option("--batch-size", par.batch_size, "Slates per step (0 = all)")
      ->default_val(0);
  pareto->add_option("--out", par.out, "Front report JSON")->required();

  DiagnosticArgs gc, au, orc;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("--data", gc.data, "Dataset JSONL")->required();
  gradcheck->add_option("--policy", gc.policy, "uniform | tabular:PATH")->default_val("uniform");
  gradcheck->add_option("--logging-policy", gc.logging_policy,
                        "Logging policy for slates without logging_probs");
  gradcheck->add_option("--eps", gc.eps, "Central-difference step")->default_val(1e-4);
  gradcheck->add_option("--lambda-div", gc.lambda_div, "Diversity weight")->default_val(1.0);
  gradcheck->add_option("--out", gc.out, "Report JSON path");

  auto* audit = app.add_subcommand("audit", "Per-slate lower-bound inequality audit");
  audit->add_option("--data", au.data, "Dataset JSONL")->required();
  audit->add_option("--policy", au.policy,
                    "uniform | logging | tabular:PATH | logprobs:PATH")
      ->default_val("uniform");
  audit->add_option("--logging-policy", au.logging_policy,
                    "Logging policy for slates without logging_probs");
  audit->add_option("--out", au.out, "Report JSON path");

  auto* oracle = app.add_subcommand("oracle", "Exact enumerated objective value");
  oracle->add_option("--data", orc.data, "Dataset JSONL")->required();
  oracle->add_option("--policy", orc.policy,
                     "uniform | logging | tabular:PATH | logprobs:PATH")
      ->default_val("uniform");
  oracle->add_option("--objective", orc.objective, "cu | div | bound")->default_val("bound");
  oracle->add_option("--out", orc.out, "Report JSON path");

  MetricsArgs met;
  auto* metrics = app.add_subcommand("metrics", "Pluralistic metric suite");
  metrics->add_option("--generations", met.generations, "Generation JSONL")->required();
  metrics->add_option("--delta", met.delta, "Coverage threshold")->default_val(0.8);
  metrics->add_option("--tau", met.tau, "Alignment temperature")->default_val(0.5);
  metrics->add_option("--embedder", met.embedder, "hash | precomputed")
      ->check(CLI::IsMember({"hash", "precomputed"}))
      ->default_val("hash");
  metrics->add_option("--out", met.out, "Report JSON path")->required();
  metrics->add_option("--csv", met.csv, "Optional CSV table path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (*simulate) return RunSimulate(sim);
    if (*evaluate) return RunEvaluate(eval);
    if (*optimize) return RunOptimize(opt);
    if (*pareto) return RunPareto(par);
    if (*gradcheck) return RunGradcheck(gc);
    if (*audit) return RunAudit(au);
    if (*oracle) return RunOracle(orc);
    if (*metrics) return RunMetrics(met);
  } catch (const CliFailure& f) {
    std::cerr << "error: " << f.message << "\n";
    return f.code;
  }
  return kExitValidation;
}
