/*
 * Copyright 2026 The xppa Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef XPPA_ERROR_H_
#define XPPA_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace xppa {

// Runtime failure tagged with the pipeline stage that raised it. what() reads
// "[stage] message".
class Error : public std::runtime_error {
 public:
  Error(std::string_view stage, std::string_view message)
      : std::runtime_error("[" + std::string(stage) + "] " +
                           std::string(message)),
        stage_(stage) {}

  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Caller broke a documented precondition (index out of range, width
// mismatch, wrong objective...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace xppa

#endif  // XPPA_ERROR_H_
