// Copyright 2026 The Spreadcast Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace spreadcast {

enum class ErrorKind {
  kParse,
  kDomain,
  kAlignment,
  kParameter,
  kSingularFit,
  kDegenerateScale,
  kDivergence,
  kOutOfCalendar,
  kUndefined,
  kIo,
  kNetwork,
  kSchema,
};

const char* to_string(ErrorKind kind);

// Every recoverable failure in the library is reported as an Error carrying
// its kind; callers (the CLI in particular) map kinds to exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised by the GKG parser. `column` is the zero-based column index that
// failed, or the number of columns found when the count is wrong.
class ParseError : public Error {
 public:
  ParseError(std::size_t column, const std::string& message)
      : Error(ErrorKind::kParse, message), column_(column) {}

  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t column_;
};

}  // namespace spreadcast
