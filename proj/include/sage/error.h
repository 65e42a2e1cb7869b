// Copyright 2026 The SAGE Authors.
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

namespace sage {

// Broad failure classes.  Each maps onto one process exit code of the
// `sage` tool.
enum class ErrorKind {
  kConfig = 2,    // bad flags, unreadable config, missing input paths
  kService = 3,   // LLM endpoint, embedder or coreference sidecar failures
  kData = 4,      // schema violations, inconsistent or mismatched inputs
  kInternal = 5,  // broken invariants inside the pipeline
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string &message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

inline Error ConfigError(const std::string &m) { return {ErrorKind::kConfig, m}; }
inline Error ServiceError(const std::string &m) { return {ErrorKind::kService, m}; }
inline Error DataError(const std::string &m) { return {ErrorKind::kData, m}; }
inline Error InternalError(const std::string &m) { return {ErrorKind::kInternal, m}; }

}  // namespace sage
