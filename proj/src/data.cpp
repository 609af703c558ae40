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

#include "pope/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pope/error.hpp"
#include "pope/numeric.hpp"

namespace pope {

namespace {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFile(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << data;
  if (!out) throw ValidationError("write failed for " + path.string());
}

// Field access with "line N: path: problem" diagnostics.
class Reader {
 public:
  explicit Reader(std::size_t line) : line_(line) {}

  [[noreturn]] void Fail(const std::string& path,
                         const std::string& problem) const {
    throw ValidationError("line " + std::to_string(line_) + ": " + path +
                          ": " + problem);
  }

  const Json& Field(const Json& obj, const std::string& key,
                    const std::string& path) const {
    if (!obj.is_object()) Fail(path, "expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) Fail(Join(path, key), "missing field");
    return *it;
  }

  const Json* Optional(const Json& obj, const std::string& key) const {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string String(const Json& v, const std::string& path) const {
    if (!v.is_string()) Fail(path, "expected a string");
    return v.get<std::string>();
  }

  double Number(const Json& v, const std::string& path) const {
    if (!v.is_number()) Fail(path, "expected a number");
    return v.get<double>();
  }

  std::vector<double> Numbers(const Json& v, const std::string& path) const {
    if (!v.is_array()) Fail(path, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      out.push_back(Number(v[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  const Json& Array(const Json& v, const std::string& path) const {
    if (!v.is_array()) Fail(path, "expected an array");
    return v;
  }

  static std::string Join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

Json ParseLine(std::string_view line, std::size_t number) {
  try {
    return Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw ValidationError("line " + std::to_string(number) +
                          ": parse error at byte " + std::to_string(e.byte) +
                          ": " + e.what());
  }
}

// Calls fn(line_text, line_number) for every non-blank line.
template <typename Fn>
void ForEachLine(std::string_view text, Fn&& fn) {
  std::size_t number = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") != std::string_view::npos) {
      fn(line, number);
    }
    if (end == text.size()) break;
    start = end + 1;
  }
}

LoggedSlate SlateFromJson(const Json& j, const Reader& r) {
  if (!j.is_object()) r.Fail("$", "expected an object");
  LoggedSlate slate;
  slate.query_id = r.String(r.Field(j, "query_id", ""), "query_id");
  slate.query_text = r.String(r.Field(j, "query_text", ""), "query_text");
  const Json& pool = r.Array(r.Field(j, "pool", ""), "pool");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const std::string path = "pool[" + std::to_string(i) + "]";
    const Json& item = pool[i];
    if (!item.is_object()) r.Fail(path, "expected an object");
    ResponseRecord rec;
    rec.id = r.String(r.Field(item, "id", path), path + ".id");
    rec.text = r.String(r.Field(item, "text", path), path + ".text");
    rec.feedback =
        r.Number(r.Field(item, "feedback", path), path + ".feedback");
    if (const Json* v = r.Optional(item, "token_logps")) {
      rec.token_logps = r.Numbers(*v, path + ".token_logps");
    }
    if (const Json* v = r.Optional(item, "embedding")) {
      rec.embedding = r.Numbers(*v, path + ".embedding");
    }
    slate.pool.push_back(std::move(rec));
  }
  const Json& logged = r.Array(r.Field(j, "logged_ids", ""), "logged_ids");
  for (std::size_t i = 0; i < logged.size(); ++i) {
    slate.logged_ids.push_back(
        r.String(logged[i], "logged_ids[" + std::to_string(i) + "]"));
  }
  if (const Json* v = r.Optional(j, "logging_probs")) {
    slate.logging_probs = r.Numbers(*v, "logging_probs");
  }
  try {
    Validate(slate);
  } catch (const Error& e) {
    throw ValidationError("line " + std::to_string(r.line()) + ": " +
                          e.what());
  }
  return slate;
}

std::string FormatDouble(double v) {
  if (!std::isfinite(v)) throw ValidationError("non-finite logit");
  // A bare "-0" reads back as the integer 0.
  if (v == 0.0 && std::signbit(v)) return "-0.0";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<LoggedSlate> ParseDataset(std::string_view text) {
  std::vector<LoggedSlate> slates;
  ForEachLine(text, [&](std::string_view line, std::size_t number) {
    Reader reader(number);
    slates.push_back(SlateFromJson(ParseLine(line, number), reader));
  });
  if (slates.empty()) throw ValidationError("no slates");
  return slates;
}

std::vector<LoggedSlate> LoadDataset(const std::filesystem::path& path) {
  return ParseDataset(ReadFile(path));
}

std::string SerializeSlate(const LoggedSlate& slate) {
  OrderedJson j;
  j["query_id"] = slate.query_id;
  j["query_text"] = slate.query_text;
  OrderedJson pool = OrderedJson::array();
  for (const auto& r : slate.pool) {
    OrderedJson item;
    item["id"] = r.id;
    item["text"] = r.text;
    if (r.token_logps) item["token_logps"] = *r.token_logps;
    item["feedback"] = r.feedback;
    if (r.embedding) item["embedding"] = *r.embedding;
    pool.push_back(std::move(item));
  }
  j["pool"] = std::move(pool);
  j["logged_ids"] = slate.logged_ids;
  if (slate.logging_probs) j["logging_probs"] = *slate.logging_probs;
  return j.dump();
}

std::string SerializeDataset(std::span<const LoggedSlate> slates) {
  std::string out;
  for (const auto& slate : slates) {
    out += SerializeSlate(slate);
    out += '\n';
  }
  return out;
}

void SaveDataset(std::span<const LoggedSlate> slates,
                 const std::filesystem::path& path) {
  WriteFile(path, SerializeDataset(slates));
}

ExternalLogprobPolicy LoadLogprobPolicy(const std::filesystem::path& path,
                                        ExternalLogprobPolicy::Mode mode) {
  ExternalLogprobPolicy::Table table;
  const std::string text = ReadFile(path);
  ForEachLine(text, [&](std::string_view line, std::size_t number) {
    Reader r(number);
    const Json j = ParseLine(line, number);
    const std::string qid = r.String(r.Field(j, "query_id", ""), "query_id");
    const Json& pool = r.Array(r.Field(j, "pool", ""), "pool");
    auto& row = table[qid];
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const std::string path_i = "pool[" + std::to_string(i) + "]";
      const std::string id =
          r.String(r.Field(pool[i], "id", path_i), path_i + ".id");
      if (const Json* v = r.Optional(pool[i], "token_logps")) {
        auto logps = r.Numbers(*v, path_i + ".token_logps");
        if (logps.empty()) r.Fail(path_i + ".token_logps", "empty response");
        for (double x : logps) {
          if (!std::isfinite(x) || x > 0.0) {
            r.Fail(path_i + ".token_logps", "invalid log-likelihood");
          }
        }
        row[id] = std::move(logps);
      }
    }
  });
  if (table.empty()) throw ValidationError("no slates");
  return ExternalLogprobPolicy(std::move(table), mode);
}

std::string SerializePolicy(const TabularSoftmaxPolicy& policy) {
  std::string out = "{\n  \"temperature\": " +
                    FormatDouble(policy.temperature()) + ",\n  \"theta\": {";
  bool first = true;
  for (const auto& [query_id, logits] : policy.theta()) {
    out += first ? "\n    " : ",\n    ";
    first = false;
    out += Json(query_id).dump() + ": [";
    for (std::size_t j = 0; j < logits.size(); ++j) {
      if (j > 0) out += ", ";
      out += FormatDouble(logits[j]);
    }
    out += "]";
  }
  out += first ? "}\n}\n" : "\n  }\n}\n";
  return out;
}

TabularSoftmaxPolicy ParsePolicy(std::string_view text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError("policy parse error at byte " +
                          std::to_string(e.byte) + ": " + e.what());
  }
  if (!j.is_object()) throw ValidationError("policy: expected an object");
  auto temp = j.find("temperature");
  if (temp == j.end() || !temp->is_number()) {
    throw ValidationError("policy.temperature: expected a number");
  }
  auto theta = j.find("theta");
  if (theta == j.end() || !theta->is_object()) {
    throw ValidationError("policy.theta: expected an object");
  }
  TabularSoftmaxPolicy::Table table;
  for (auto it = theta->begin(); it != theta->end(); ++it) {
    const std::string path = "policy.theta." + it.key();
    if (!it->is_array()) throw ValidationError(path + ": expected an array");
    std::vector<double> logits;
    for (const auto& v : *it) {
      if (!v.is_number()) throw ValidationError(path + ": expected numbers");
      logits.push_back(v.get<double>());
    }
    if (logits.empty()) throw ValidationError(path + ": empty logits");
    table.emplace(it.key(), std::move(logits));
  }
  return TabularSoftmaxPolicy(std::move(table), temp->get<double>());
}

void SavePolicy(const TabularSoftmaxPolicy& policy,
                const std::filesystem::path& path) {
  WriteFile(path, SerializePolicy(policy));
}

TabularSoftmaxPolicy LoadPolicy(const std::filesystem::path& path) {
  return ParsePolicy(ReadFile(path));
}

void CheckPolicyCovers(const TabularSoftmaxPolicy& policy,
                       std::span<const LoggedSlate> slates) {
  for (const auto& slate : slates) {
    if (policy.Logits(slate.query_id).size() != slate.pool.size()) {
      throw ValidationError("query " + slate.query_id +
                            ": policy/pool size mismatch");
    }
  }
}

std::vector<GenerationSet> ParseGenerations(std::string_view text) {
  std::vector<GenerationSet> sets;
  ForEachLine(text, [&](std::string_view line, std::size_t number) {
    Reader r(number);
    const Json j = ParseLine(line, number);
    if (!j.is_object()) r.Fail("$", "expected an object");
    GenerationSet set;
    set.query_id = r.String(r.Field(j, "query_id", ""), "query_id");
    if (const Json* v = r.Optional(j, "query_text")) {
      set.query_text = r.String(*v, "query_text");
      if (set.query_text->empty()) r.Fail("query_text", "empty document");
    }
    if (const Json* v = r.Optional(j, "query_embedding")) {
      set.query_embedding = r.Numbers(*v, "query_embedding");
    }
    const Json& gens = r.Array(r.Field(j, "generations", ""), "generations");
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const std::string path = "generations[" + std::to_string(i) + "]";
      GeneratedText g;
      g.text = r.String(r.Field(gens[i], "text", path), path + ".text");
      if (g.text.empty()) r.Fail(path + ".text", "empty document");
      if (const Json* v = r.Optional(gens[i], "embedding")) {
        g.embedding = r.Numbers(*v, path + ".embedding");
      }
      set.generations.push_back(std::move(g));
    }
    const Json& refs = r.Array(r.Field(j, "references", ""), "references");
    for (std::size_t i = 0; i < refs.size(); ++i) {
      const std::string path = "references[" + std::to_string(i) + "]";
      ReferenceText ref;
      ref.text = r.String(r.Field(refs[i], "text", path), path + ".text");
      if (ref.text.empty()) r.Fail(path + ".text", "empty document");
      ref.upvotes =
          r.Number(r.Field(refs[i], "upvotes", path), path + ".upvotes");
      if (!std::isfinite(ref.upvotes) || ref.upvotes < 0.0) {
        r.Fail(path + ".upvotes", "upvotes must be finite and >= 0");
      }
      if (const Json* v = r.Optional(refs[i], "embedding")) {
        ref.embedding = r.Numbers(*v, path + ".embedding");
      }
      set.references.push_back(std::move(ref));
    }
    if (set.generations.empty()) r.Fail("generations", "needs >= 1 entry");
    if (set.references.empty()) r.Fail("references", "needs >= 1 entry");
    sets.push_back(std::move(set));
  });
  if (sets.empty()) throw ValidationError("no queries");
  return sets;
}

std::vector<GenerationSet> LoadGenerations(const std::filesystem::path& path) {
  return ParseGenerations(ReadFile(path));
}

std::vector<std::size_t> PlSample(std::span<const double> weights,
                                  std::size_t k, Rng& rng) {
  if (k < 1 || k > weights.size()) {
    throw ValidationError("PL sample size must satisfy 1 <= k <= L");
  }
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw ValidationError("invalid PL weight");
    }
  }
  std::vector<std::size_t> remaining(weights.size());
  for (std::size_t j = 0; j < remaining.size(); ++j) remaining[j] = j;
  std::vector<std::size_t> ranking;
  ranking.reserve(k);
  for (std::size_t stage = 0; stage < k; ++stage) {
    double total = 0.0;
    for (std::size_t j : remaining) total += weights[j];
    const double u = rng.Uniform() * total;
    double cumulative = 0.0;
    std::size_t pick = remaining.size() - 1;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      cumulative += weights[remaining[r]];
      if (u < cumulative) {
        pick = r;
        break;
      }
    }
    ranking.push_back(remaining[pick]);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return ranking;
}

void SimConfig::Validate() const {
  if (n_queries < 1) throw ValidationError("queries must be >= 1");
  if (pool_size < 1) throw ValidationError("pool-size must be >= 1");
  if (slate_size < 1 || slate_size > pool_size) {
    throw ValidationError("slate-size " + std::to_string(slate_size) +
                          " must satisfy 1 <= slate-size <= pool-size " +
                          std::to_string(pool_size));
  }
  if (!(logging_temperature > 0.0)) {
    throw ValidationError("logging-temp must be > 0");
  }
  if (!(pl_scale > 0.0) || !std::isfinite(pl_scale)) {
    throw ValidationError("pl-scale must be > 0");
  }
  if (feedback_model == FeedbackModel::kPlackettLuce && annotators < 1) {
    throw ValidationError("annotators must be >= 1");
  }
  if (upvote_depth > pool_size) {
    throw ValidationError("upvote depth must not exceed pool-size");
  }
  if (!(linear_noise >= 0.0) || !std::isfinite(linear_noise)) {
    throw ValidationError("linear noise must be >= 0");
  }
}

std::size_t SimConfig::ResolvedUpvoteDepth() const {
  return upvote_depth > 0 ? upvote_depth : (pool_size + 1) / 2;
}

namespace {

std::vector<double> DrawQuality(std::size_t pool_size, Rng& rng) {
  std::vector<double> q(pool_size);
  for (double& v : q) v = rng.Normal();
  return q;
}

std::vector<double> LoggingDistribution(const std::vector<double>& quality,
                                        double temperature) {
  std::vector<double> probs;
  if (std::isinf(temperature)) {
    probs.assign(quality.size(), 1.0 / static_cast<double>(quality.size()));
  } else {
    probs = Softmax(quality, temperature);
  }
  FloorAndRenormalize(probs);
  return probs;
}

}  // namespace

std::vector<double> SimulatedQuality(const SimConfig& config, std::size_t t) {
  Rng rng = Rng::Stream(config.seed, t);
  return DrawQuality(config.pool_size, rng);
}

std::vector<LoggedSlate> Simulate(const SimConfig& config) {
  config.Validate();
  const std::size_t L = config.pool_size;
  const std::size_t K = config.slate_size;
  std::vector<LoggedSlate> slates;
  slates.reserve(config.n_queries);

  for (std::size_t t = 0; t < config.n_queries; ++t) {
    Rng rng = Rng::Stream(config.seed, t);
    const std::vector<double> quality = DrawQuality(L, rng);
    const std::vector<double> pi0 =
        LoggingDistribution(quality, config.logging_temperature);

    // K iid draws from pi_0, re-drawing duplicates.
    std::vector<std::size_t> logged;
    const std::size_t max_draws = 10000 * K;
    std::size_t draws = 0;
    while (logged.size() < K) {
      if (draws++ >= max_draws) {
        throw ValidationError("slate too large: could not draw " +
                              std::to_string(K) +
                              " distinct responses from the logging policy");
      }
      const double u = rng.Uniform();
      double cumulative = 0.0;
      std::size_t pick = L - 1;
      for (std::size_t j = 0; j < L; ++j) {
        cumulative += pi0[j];
        if (u < cumulative) {
          pick = j;
          break;
        }
      }
      if (std::find(logged.begin(), logged.end(), pick) == logged.end()) {
        logged.push_back(pick);
      }
    }

    std::vector<double> feedback(L, 0.0);
    if (config.feedback_model == FeedbackModel::kPlackettLuce) {
      std::vector<double> weights(L);
      for (std::size_t j = 0; j < L; ++j) {
        weights[j] = std::exp(config.pl_scale * quality[j]);
      }
      const std::size_t depth = config.ResolvedUpvoteDepth();
      for (std::size_t a = 0; a < config.annotators; ++a) {
        for (std::size_t j : PlSample(weights, depth, rng)) feedback[j] += 1.0;
      }
    } else {
      for (std::size_t j = 0; j < L; ++j) {
        const double noise =
            config.linear_noise > 0.0 ? config.linear_noise * rng.Normal() : 0.0;
        feedback[j] = std::max(0.0, quality[j] + noise);
      }
    }

    LoggedSlate slate;
    slate.query_id = "q" + std::to_string(t);
    slate.query_text = "simulated query " + std::to_string(t);
    for (std::size_t j = 0; j < L; ++j) {
      ResponseRecord rec;
      rec.id = "r" + std::to_string(j);
      rec.text = "simulated response " + std::to_string(j) + " to query " +
                 std::to_string(t);
      const std::size_t length = 4 + rng.Index(9);
      rec.token_logps = std::vector<double>(length, std::log(pi0[j]));
      rec.feedback = feedback[j];
      slate.pool.push_back(std::move(rec));
    }
    std::vector<double> probs;
    for (std::size_t j : logged) {
      slate.logged_ids.push_back(slate.pool[j].id);
      probs.push_back(pi0[j]);
    }
    slate.logging_probs = std::move(probs);
    slates.push_back(std::move(slate));
  }
  return slates;
}

}  // namespace pope
