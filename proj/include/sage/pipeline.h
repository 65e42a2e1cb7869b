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

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "sage/alignment.h"
#include "sage/ensemble.h"
#include "sage/llm_gateway.h"

namespace sage {

inline constexpr std::string_view kSageVersion = "0.1.0";

struct LlmSettings {
  std::string endpoint;  // chat-completions URL, or "mock"
  std::string model = "gpt-4o";
  double temperature = 0.2;
  double top_p = 0.7;
  int max_tokens = 300;
  int batch_size = kDefaultAlignBatch;
  int max_in_flight = 4;
  int max_attempts = 3;
  int backoff_ms = 500;
  int timeout_s = 120;
  std::string api_key;  // falls back to SAGE_API_KEY
  std::string cache;    // path; empty means <run>/cache/llm.jsonl, "none" disables
};

struct CorefSettings {
  std::string command;  // sidecar shell command, or "mock"; falls back to SAGE_COREF_CMD
  std::string order = "document-first";
  int timeout_s = 60;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path out_dir = "runs";
  std::string run_id = "default";
  std::vector<Method> methods = {Method::kString, Method::kCoref, Method::kLlm};
  int partial_min_hits = 3;
  int partial_len_threshold = 3;
  std::filesystem::path stopwords;  // word list overriding the built-in one
  std::filesystem::path pronouns;
  LlmSettings llm;
  CorefSettings coref;
  GenerationConfig generation;
  int target_summaries = 5;
  Hyperparameters ensemble;
  std::filesystem::path model_path;  // empty means <run>/model/ensemble.json
  std::vector<std::pair<double, int>> segment_table = {
      {0.10, 5}, {0.30, 4}, {0.50, 3}, {0.70, 2}, {0.80, 1}, {1.00, 0}};
  bool salient_only = false;
  std::uint64_t seed = 0;
  std::size_t resamples = 10000;
  int workers = 0;  // 0 lets OpenMP decide
  int shots = 3;
  std::string embedder = "tfidf";  // or an embedding endpoint URL

  std::filesystem::path RunDir() const { return out_dir / run_id; }
  std::filesystem::path ModelPath() const;
  std::filesystem::path CachePath() const;
  MatchConfig Matching() const;

  // Snapshot with secrets redacted.
  nlohmann::ordered_json ToJson() const;
  // Unknown keys are rejected.
  static RunConfig FromJson(const nlohmann::json &j);
  void Validate() const;  // throws ConfigError
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;
std::optional<std::string> ProcessEnv(std::string_view name);

// Replaces ${NAME} in every string value; an unset variable is a ConfigError.
nlohmann::json InterpolateEnv(const nlohmann::json &j, const EnvLookup &env = ProcessEnv);
RunConfig LoadRunConfig(const std::filesystem::path &path, const EnvLookup &env = ProcessEnv);

// Per-command record of what a run did, merged into <run>/manifest.json.
class Manifest {
 public:
  Manifest(const RunConfig &config, std::string command);

  void AddWarning(std::string warning);
  void AddOutput(const std::filesystem::path &path);
  void SetCache(const GatewayStats &stats);
  void SetVersion(const std::string &name, const std::string &value);
  // Times `fn` under `stage`.
  void Time(const std::string &stage, const std::function<void()> &fn);
  const std::vector<std::filesystem::path> &outputs() const { return outputs_; }
  const std::vector<std::string> &warnings() const { return warnings_; }

  void Commit() const;

 private:
  const RunConfig &config_;
  std::string command_;
  std::vector<std::string> warnings_;
  std::vector<std::filesystem::path> outputs_;
  std::vector<std::pair<std::string, double>> timings_ms_;
  std::optional<GatewayStats> cache_;
  std::vector<std::pair<std::string, std::string>> versions_;
};

// Writes through a sibling temp file and a rename.
void WriteFileAtomic(const std::filesystem::path &path, std::string_view content);
std::string ReadTextFile(const std::filesystem::path &path);

struct EvalArgs {
  std::filesystem::path predictions;
  std::string gold = "auto";  // auto, manual, corpus, or a score TSV path
  std::optional<std::filesystem::path> compare;
  std::string name;           // output subdirectory; defaults to the prediction stem
};

void CmdIngest(const RunConfig &config, bool fill_summaries, std::ostream &out);
void CmdAlign(const RunConfig &config, std::ostream &out);
void CmdTrainEnsemble(const RunConfig &config, std::ostream &out);
void CmdScore(const RunConfig &config, const std::string &predictor, std::ostream &out);
void CmdEval(const RunConfig &config, const EvalArgs &args, std::ostream &out);
void CmdStats(const RunConfig &config, std::ostream &out);
void CmdSumqual(const RunConfig &config, std::ostream &out);

// File name stem for a predictor's score TSV: "aggregate:llm" -> "aggregate_llm".
std::string PredictorSlug(std::string_view predictor);

}  // namespace sage
