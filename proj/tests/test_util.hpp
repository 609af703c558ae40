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

#ifndef POPE_TESTS_TEST_UTIL_HPP_
#define POPE_TESTS_TEST_UTIL_HPP_

#include <cmath>
#include <string>
#include <vector>

#include "pope/core.hpp"
#include "pope/rng.hpp"

namespace pope::testing {

// Slate whose pool has the given feedback. Logged positions carry
// logging_probs read from `logging` when it is non-empty.
inline LoggedSlate MakeSlate(const std::string& qid,
                             const std::vector<double>& feedback,
                             const std::vector<std::size_t>& logged,
                             const std::vector<double>& logging = {}) {
  LoggedSlate s;
  s.query_id = qid;
  s.query_text = "query " + qid;
  for (std::size_t j = 0; j < feedback.size(); ++j) {
    ResponseRecord r;
    r.id = qid + "_r" + std::to_string(j);
    r.text = "response " + std::to_string(j) + " for " + qid;
    r.feedback = feedback[j];
    if (!logging.empty()) r.token_logps = std::vector<double>{std::log(logging[j])};
    s.pool.push_back(std::move(r));
  }
  for (std::size_t i : logged) s.logged_ids.push_back(s.pool[i].id);
  if (!logging.empty()) {
    std::vector<double> probs;
    for (std::size_t i : logged) probs.push_back(logging[i]);
    s.logging_probs = probs;
  }
  return s;
}

// Tabular policy reproducing `probs` exactly up to rounding.
inline std::vector<double> LogitsFor(const std::vector<double>& probs) {
  std::vector<double> out;
  for (double p : probs) out.push_back(std::log(p));
  return out;
}

inline std::vector<double> RandomSimplex(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double total = 0.0;
  for (auto& v : w) {
    v = 0.2 + rng.Uniform();
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

}  // namespace pope::testing

#endif  // POPE_TESTS_TEST_UTIL_HPP_
