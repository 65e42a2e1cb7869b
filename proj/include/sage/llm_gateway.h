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

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sage/align_string.h"
#include "sage/alignment.h"
#include "sage/corpus.h"
#include "sage/salience.h"

namespace sage {

struct ChatTurn {
  std::string role;  // "user" or "assistant"
  std::string content;
};

struct ChatRequest {
  std::string model_name;
  std::string system_prompt;
  std::vector<ChatTurn> history;  // earlier turns of the same session
  std::string user_prompt;
  double temperature = 0.2;
  double top_p = 0.7;
  int max_tokens = 300;
  std::optional<std::int64_t> seed_hint;

  void Validate() const;  // throws ConfigError
  // OpenAI-compatible chat-completion body.
  std::string ToWireJson() const;
};

// SHA-256 over the endpoint and every request parameter.
std::string CacheKey(std::string_view endpoint, const ChatRequest &req);

// choices[0].message.content of a chat-completion response body.
std::string ExtractChatContent(std::string_view body);
// A minimal chat-completion response carrying `content`.
std::string MakeChatCompletionBody(std::string_view content);

struct HttpResult {
  int status = 0;
  std::string body;
};

// A POST target.  Implementations throw ServiceError on network failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResult Post(const std::string &body) = 0;
  virtual std::string Endpoint() const = 0;
};

class HttpTransport : public Transport {
 public:
  // `url` like "https://api.example.com/v1/chat/completions".
  HttpTransport(std::string url, std::string api_key,
                std::chrono::seconds timeout = std::chrono::seconds(120));

  HttpResult Post(const std::string &body) override;
  std::string Endpoint() const override { return url_; }

 private:
  std::string url_;
  std::string base_;
  std::string path_;
  std::string api_key_;
  std::chrono::seconds timeout_;
};

// JSON-lines cache of responses, one {"key","model","response","timestamp"}
// object per line.  Appends are serialized; a file with duplicate or torn
// lines is rewritten through a temp file and rename on open.
class ResponseCache {
 public:
  ResponseCache() = default;  // memory only
  explicit ResponseCache(std::filesystem::path path);

  std::optional<std::string> Lookup(const std::string &key) const;
  void Insert(const std::string &key, const std::string &model,
              const std::string &response);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
};

struct GatewayOptions {
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{500};
  int max_in_flight = 4;
  // Injected so tests do not sleep.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
  long cache_hits = 0;
  long cache_misses = 0;
  long network_calls = 0;
};

// Chat client with caching, bounded concurrency and retries.  Thread-safe.
class LlmGateway {
 public:
  LlmGateway(Transport &transport, ResponseCache *cache, GatewayOptions options = {});

  std::string Chat(const ChatRequest &req);

  // Posts `body` with the cache, concurrency bound and retry policy of Chat.
  // `extract` maps a 2xx response body to the cached value.
  std::string Call(const std::string &key, const std::string &tag, const std::string &body,
                   const std::function<std::string(std::string_view)> &extract);
  std::string Endpoint() const { return transport_.Endpoint(); }

  GatewayStats stats() const;

 private:
  Transport &transport_;
  ResponseCache *cache_;
  GatewayOptions options_;
  std::counting_semaphore<256> in_flight_;
  std::atomic<long> hits_{0};
  std::atomic<long> misses_{0};
  std::atomic<long> calls_{0};
};

// Which of the built-in system prompts a request carries.
enum class PromptKind { kSummary, kAlign, kSalience, kUnknown };
PromptKind ClassifySystemPrompt(std::string_view system_prompt);

// ---- summary generation ----------------------------------------------

struct GenreExample {
  std::string document_text;
  std::string summary_text;
};

struct GenerationConfig {
  std::string model_name = "gpt-4o";
  int max_tokens = 120;
  double temperature = 1.0;
  double top_p = 1.0;
  int max_reprompts = 2;
  std::size_t max_chars = kMaxSummaryChars;
};

// True when no '.', '?' or '!' ends a sentence before the final character.
bool IsSingleSentence(std::string_view text);
// Turns internal sentence breaks into semicolons: "A. B." -> "A; B.".
std::string RepairSentenceBreaks(std::string_view text);

Summary GenerateSummary(LlmGateway &gateway, const Document &doc,
                        std::span<const GenreExample> examples,
                        const GenerationConfig &config, std::string summary_id);

// ---- alignment ---------------------------------------------------------

struct LlmTaskConfig {
  std::string model_name = "gpt-4o";
  double temperature = 0.2;
  double top_p = 0.7;
  int max_tokens = 300;
};

inline constexpr int kMinAlignBatch = 15;
inline constexpr int kMaxAlignBatch = 20;
inline constexpr int kDefaultAlignBatch = 18;

// Consecutive [begin, end) ranges of at most `batch_size` items.
std::vector<std::pair<std::size_t, std::size_t>> MakeBatches(std::size_t n,
                                                             int batch_size);

// Reads "i. yes" / "i) no" lines (case-insensitive, trailing text ignored).
// Throws DataError on missing, duplicate or out-of-range indices.
std::vector<bool> ParseAlignmentReply(std::string_view reply, std::size_t batch_len);

std::vector<AlignmentRecord> AlignEntitiesLlm(LlmGateway &gateway, const Document &doc,
                                              const Summary &summary,
                                              int batch_size = kDefaultAlignBatch,
                                              const LlmTaskConfig &config = {});

// ---- direct salience prediction ------------------------------------------

struct SalienceShot {
  std::string document_text;
  std::vector<std::pair<std::string, int>> scores;  // entity text, 1..5
};

// A shot built from a document's stored gold scores.
SalienceShot MakeShot(const Document &doc, const MatchConfig &cfg);

// Up to `k` distinct documents from `pool` (never `exclude_id`), drawn from
// the "shots" stream of `seed` keyed by `exclude_id`.
std::vector<const Document *> SelectShots(std::span<const Document> pool,
                                          std::string_view exclude_id, std::size_t k,
                                          std::uint64_t seed);

struct ParsedPrediction {
  std::string entity_text;
  int score = 0;
};

// "entity: score" lines; bullets and numbering are tolerated, lines that do
// not parse are skipped.
std::vector<ParsedPrediction> ParseSalienceReply(std::string_view reply);

struct PredictionResult {
  std::vector<SalienceScore> scores;  // every entity, document order
  long unresolved = 0;
  std::vector<std::string> unresolved_texts;
};

// Maps predicted strings onto entities: normalized exact match against any
// mention first, then the partial string rule.  Unmatched entities score 0.
PredictionResult ResolvePredictions(const Document &doc,
                                    std::span<const ParsedPrediction> predictions,
                                    const MatchConfig &cfg);

PredictionResult PredictSalienceLlm(LlmGateway &gateway, const Document &doc,
                                    std::span<const SalienceShot> shots,
                                    const LlmTaskConfig &config, const MatchConfig &cfg);

}  // namespace sage
