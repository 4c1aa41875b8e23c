// Copyright 2026 The molct Authors.
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

#ifndef MOLCT_ERRORS_HPP
#define MOLCT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace molct {

// Error categories. The numeric values double as process exit codes for the
// CLI and as status codes of the C API.
enum class ErrorKind : int {
  usage = 1,    // bad command line, bad config key, bad option value
  data = 2,     // unreadable/malformed input files, vocabulary violations
  numeric = 3,  // NaN loss, rejected optimizer step, contract violations
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct UsageError : Error {
  explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct DataError : Error {
  explicit DataError(const std::string& w) : Error(ErrorKind::data, w) {}
};
struct NumericError : Error {
  explicit NumericError(const std::string& w) : Error(ErrorKind::numeric, w) {}
};

}  // namespace molct

#endif  // MOLCT_ERRORS_HPP
