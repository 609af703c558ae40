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

#ifndef POPE_NUMERIC_HPP_
#define POPE_NUMERIC_HPP_

#include <cmath>
#include <functional>
#include <span>
#include <string>

namespace pope {

// Probability floor applied after pool normalization.
inline constexpr double kProbFloor = 1e-8;

// Neumaier-compensated accumulator. All dataset-level reductions go through
// this so results do not depend on how per-slate terms were grouped.
class CompensatedSum {
 public:
  void Add(double x) {
    const double t = sum_ + x;
    if (std::fabs(sum_) >= std::fabs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

inline double Sum(std::span<const double> xs) {
  CompensatedSum acc;
  for (double x : xs) acc.Add(x);
  return acc.value();
}

// Shannon entropy in nats; zero entries contribute nothing.
inline double Entropy(std::span<const double> p) {
  CompensatedSum acc;
  for (double v : p) {
    if (v > 0.0) acc.Add(-v * std::log(v));
  }
  return acc.value();
}

// Warnings for degenerate-but-legal inputs go through a process-wide sink.
// The default sink writes "warning: <msg>" to stderr.
using WarningHandler = std::function<void(const std::string&)>;
void SetWarningHandler(WarningHandler handler);
void Warn(const std::string& message);

}  // namespace pope

#endif  // POPE_NUMERIC_HPP_
