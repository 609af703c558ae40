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

#ifndef POPE_ERROR_HPP_
#define POPE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace pope {

// Validation errors are caused by bad input (files, flags, shapes); runtime
// errors are numerical failures such as divergence or non-finite results.
enum class ErrorKind { kValidation = 1, kRuntime = 2 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ValidationError(const std::string& what) {
  return Error(ErrorKind::kValidation, what);
}

inline Error RuntimeError(const std::string& what) {
  return Error(ErrorKind::kRuntime, what);
}

}  // namespace pope

#endif  // POPE_ERROR_HPP_
