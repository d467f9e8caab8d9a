/*
 * Copyright 2026 The roarbench Authors.
 *
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

#pragma once

#include <stdexcept>
#include <string>

namespace roarbench {

// Error categories. The numeric values are shared with the C API status codes.
enum class ErrorCode : int {
  kContractViolation = 1,
  kNumericFailure = 2,
  kUsage = 3,
  kConfiguration = 4,
  kParse = 5,
  kIo = 6,
  kUnsupportedMeasure = 7,
  kUndefinedScore = 8,
  kRunFailures = 9,
  kEmptyInput = 10,
  kValidationFailed = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

#define ROARBENCH_DEFINE_ERROR(Name, Code)                                 \
  class Name : public Error {                                              \
   public:                                                                 \
    explicit Name(const std::string& message) : Error(Code, message) {}    \
  };

ROARBENCH_DEFINE_ERROR(ContractViolation, ErrorCode::kContractViolation)
ROARBENCH_DEFINE_ERROR(NumericFailure, ErrorCode::kNumericFailure)
ROARBENCH_DEFINE_ERROR(UsageError, ErrorCode::kUsage)
ROARBENCH_DEFINE_ERROR(ConfigError, ErrorCode::kConfiguration)
ROARBENCH_DEFINE_ERROR(IoError, ErrorCode::kIo)
ROARBENCH_DEFINE_ERROR(UnsupportedMeasure, ErrorCode::kUnsupportedMeasure)
ROARBENCH_DEFINE_ERROR(UndefinedScore, ErrorCode::kUndefinedScore)
ROARBENCH_DEFINE_ERROR(RunFailures, ErrorCode::kRunFailures)
ROARBENCH_DEFINE_ERROR(EmptyInput, ErrorCode::kEmptyInput)

#undef ROARBENCH_DEFINE_ERROR

// Malformed input record; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line = 0)
      : Error(ErrorCode::kParse,
              line == 0 ? message
                        : "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

inline void Require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace roarbench
