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

#include "sage/alignment.h"

#include <fstream>

#include "json.hpp"
#include "sage/error.h"

namespace sage {

std::string_view MethodName(Method m) {
  switch (m) {
    case Method::kString: return "string";
    case Method::kCoref: return "coref";
    case Method::kLlm: return "llm";
    case Method::kEnsemble: return "ensemble";
    case Method::kManual: return "manual";
  }
  return "unknown";
}

Method ParseMethod(std::string_view name) {
  for (Method m : {Method::kString, Method::kCoref, Method::kLlm,
                   Method::kEnsemble, Method::kManual}) {
    if (MethodName(m) == name) return m;
  }
  throw ConfigError("unknown alignment method '" + std::string(name) + "'");
}

std::string CheckRecord(const AlignmentRecord &r, double threshold) {
  if (r.probability.has_value() != (r.method == Method::kEnsemble)) {
    return "probability must be present exactly for ensemble records";
  }
  if (r.probability) {
    double p = *r.probability;
    if (!(p >= 0.0 && p <= 1.0)) return "probability outside [0,1]";
    if (r.label != (p >= threshold)) return "label disagrees with probability";
  }
  return {};
}

std::string RecordToJsonLine(const AlignmentRecord &r) {
  nlohmann::ordered_json j;
  j["doc"] = r.document_id;
  j["entity"] = r.entity_id;
  j["summary"] = r.summary_id;
  j["method"] = MethodName(r.method);
  j["label"] = r.label;
  if (r.probability) j["probability"] = *r.probability;
  return j.dump();
}

AlignmentRecord RecordFromJsonLine(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
    AlignmentRecord r;
    r.document_id = j.at("doc").get<std::string>();
    r.entity_id = j.at("entity").get<std::string>();
    r.summary_id = j.at("summary").get<std::string>();
    r.method = ParseMethod(j.at("method").get<std::string>());
    r.label = j.at("label").get<bool>();
    if (j.contains("probability")) r.probability = j["probability"].get<double>();
    if (std::string why = CheckRecord(r); !why.empty()) {
      throw DataError("alignment record for " + r.document_id + "/" +
                      r.entity_id + ": " + why);
    }
    return r;
  } catch (const nlohmann::json::exception &e) {
    throw DataError("malformed alignment record: " + std::string(e.what()));
  }
}

void WriteRecords(const std::filesystem::path &path,
                  std::span<const AlignmentRecord> records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (const AlignmentRecord &r : records) out << RecordToJsonLine(r) << '\n';
  if (!out) throw ConfigError("write failed: " + path.string());
}

std::vector<AlignmentRecord> ReadRecords(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<AlignmentRecord> records;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      records.push_back(RecordFromJsonLine(line));
    } catch (const Error &e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " +
                      e.what());
    }
  }
  return records;
}

std::vector<AlignmentRecord> RecordsForDocument(
    std::span<const AlignmentRecord> records, std::string_view document_id) {
  std::vector<AlignmentRecord> out;
  for (const AlignmentRecord &r : records) {
    if (r.document_id == document_id) out.push_back(r);
  }
  return out;
}

}  // namespace sage
