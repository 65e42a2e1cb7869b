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

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sage {

enum class Method { kString, kCoref, kLlm, kEnsemble, kManual };

std::string_view MethodName(Method m);
Method ParseMethod(std::string_view name);  // throws ConfigError

// One binary judgment: is `entity_id` mentioned in `summary_id`?
struct AlignmentRecord {
  std::string document_id;
  std::string entity_id;
  std::string summary_id;
  Method method = Method::kString;
  bool label = false;
  // Only ensemble records carry a probability.
  std::optional<double> probability;

  bool operator==(const AlignmentRecord &) const = default;
};

// Checks the probability invariants; returns an empty string when valid.
std::string CheckRecord(const AlignmentRecord &r, double threshold = 0.5);

// JSON-lines persistence, one record per line:
// {"doc":..,"entity":..,"summary":..,"method":..,"label":..,"probability":..}
std::string RecordToJsonLine(const AlignmentRecord &r);
AlignmentRecord RecordFromJsonLine(std::string_view line);
void WriteRecords(const std::filesystem::path &path,
                  std::span<const AlignmentRecord> records);
std::vector<AlignmentRecord> ReadRecords(const std::filesystem::path &path);

// Records of one document, preserving order.
std::vector<AlignmentRecord> RecordsForDocument(
    std::span<const AlignmentRecord> records, std::string_view document_id);

}  // namespace sage
