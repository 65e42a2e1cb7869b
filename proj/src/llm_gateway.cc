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

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "sage/llm_gateway.h"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"
#include "sage/embedded_resources.h"
#include "sage/error.h"
#include "sage/hash.h"
#include "sage/random.h"
#include "sage/text.h"

namespace sage {

using nlohmann::json;
using nlohmann::ordered_json;

void ChatRequest::Validate() const {
  if (model_name.empty()) throw ConfigError("chat request without model name");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (!(top_p > 0.0 && top_p <= 1.0)) throw ConfigError("top_p must be in (0, 1]");
  if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
}

std::string ChatRequest::ToWireJson() const {
  ordered_json j;
  j["model"] = model_name;
  ordered_json messages = ordered_json::array();
  if (!system_prompt.empty()) {
    messages.push_back({{"role", "system"}, {"content", system_prompt}});
  }
  for (const ChatTurn &t : history) {
    messages.push_back({{"role", t.role}, {"content", t.content}});
  }
  messages.push_back({{"role", "user"}, {"content", user_prompt}});
  j["messages"] = std::move(messages);
  j["temperature"] = temperature;
  j["top_p"] = top_p;
  j["max_tokens"] = max_tokens;
  if (seed_hint) j["seed"] = *seed_hint;
  return j.dump();
}

std::string CacheKey(std::string_view endpoint, const ChatRequest &req) {
  std::string material(endpoint);
  material.push_back('\n');
  material += req.ToWireJson();
  return Sha256Hex(material);
}

std::string ExtractChatContent(std::string_view body) {
  try {
    json j = json::parse(body);
    const json &content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ServiceError("malformed chat response: content is not a string");
    return content.get<std::string>();
  } catch (const json::exception &e) {
    throw ServiceError("malformed chat response: " + std::string(e.what()));
  }
}

std::string MakeChatCompletionBody(std::string_view content) {
  ordered_json j;
  j["object"] = "chat.completion";
  j["choices"] = ordered_json::array(
      {{{"index", 0},
        {"message", {{"role", "assistant"}, {"content", std::string(content)}}},
        {"finish_reason", "stop"}}});
  return j.dump();
}

HttpTransport::HttpTransport(std::string url, std::string api_key,
                             std::chrono::seconds timeout)
    : url_(std::move(url)), api_key_(std::move(api_key)), timeout_(timeout) {
  const auto scheme_end = url_.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url_);
  const auto path_start = url_.find('/', scheme_end + 3);
  base_ = url_.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url_.substr(path_start);
}

HttpResult HttpTransport::Post(const std::string &body) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    throw ServiceError("request to " + url_ + " failed: " + httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

namespace {

std::string NowIso8601() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string CacheLine(const std::string &key, const std::string &model,
                      const std::string &response, const std::string &timestamp) {
  ordered_json j;
  j["key"] = key;
  j["model"] = model;
  j["response"] = response;
  j["timestamp"] = timestamp;
  return j.dump();
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(path_, std::ios::binary);
  if (!in) return;
  std::vector<std::string> lines;
  std::string line;
  bool dirty = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      auto key = j.at("key").get<std::string>();
      auto response = j.at("response").get<std::string>();
      if (!entries_.emplace(key, response).second) {
        dirty = true;
        continue;
      }
      lines.push_back(line);
    } catch (const json::exception &) {
      dirty = true;  // torn write
    }
  }
  in.close();
  if (dirty) {
    std::filesystem::path tmp = path_;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const std::string &l : lines) out << l << '\n';
    }
    std::filesystem::rename(tmp, path_);
  }
}

std::optional<std::string> ResponseCache::Lookup(const std::string &key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::Insert(const std::string &key, const std::string &model,
                           const std::string &response) {
  std::unique_lock lock(mu_);
  if (!entries_.emplace(key, response).second) return;
  if (path_.empty()) return;
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot append to cache " + path_.string());
  out << CacheLine(key, model, response, NowIso8601()) << '\n';
  out.flush();
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

LlmGateway::LlmGateway(Transport &transport, ResponseCache *cache, GatewayOptions options)
    : transport_(transport),
      cache_(cache),
      options_(std::move(options)),
      in_flight_(std::clamp(options_.max_in_flight, 1, 256)) {
  if (options_.max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  if (!options_.sleep) {
    options_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

std::string LlmGateway::Chat(const ChatRequest &req) {
  req.Validate();
  return Call(CacheKey(transport_.Endpoint(), req), req.model_name, req.ToWireJson(),
              ExtractChatContent);
}

std::string LlmGateway::Call(const std::string &key, const std::string &tag,
                             const std::string &body,
                             const std::function<std::string(std::string_view)> &extract) {
  if (cache_ != nullptr) {
    if (auto hit = cache_->Lookup(key)) {
      ++hits_;
      return *hit;
    }
  }
  ++misses_;

  in_flight_.acquire();
  struct Release {
    std::counting_semaphore<256> &s;
    ~Release() { s.release(); }
  } release{in_flight_};

  std::string last_error;
  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    ++calls_;
    std::optional<HttpResult> res;
    try {
      res = transport_.Post(body);
    } catch (const Error &e) {
      last_error = e.what();
    }
    if (res) {
      if (res->status >= 200 && res->status < 300) {
        std::string value = extract(res->body);
        if (cache_ != nullptr) cache_->Insert(key, tag, value);
        return value;
      }
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) {
        throw ServiceError(transport_.Endpoint() + " returned " + last_error + ": " +
                           res->body.substr(0, 200));
      }
    }
    if (attempt < options_.max_attempts) {
      options_.sleep(options_.backoff_base * (1 << (attempt - 1)));
    }
  }
  throw ServiceError("request to " + transport_.Endpoint() + " failed after " +
                     std::to_string(options_.max_attempts) + " attempts: " + last_error);
}

GatewayStats LlmGateway::stats() const { return {hits_.load(), misses_.load(), calls_.load()}; }

namespace {

// Leading text of a template up to its first placeholder.
std::string_view StablePrefix(std::string_view tmpl) {
  return tmpl.substr(0, std::min(tmpl.find('{'), std::size_t{60}));
}

std::string Render(std::string_view tmpl,
                   std::initializer_list<std::pair<std::string_view, std::string>> values) {
  std::vector<std::pair<std::string_view, std::string>> v(values);
  return FillTemplate(tmpl, v);
}

}  // namespace

PromptKind ClassifySystemPrompt(std::string_view system_prompt) {
  if (system_prompt.starts_with(StablePrefix(resources::k_prompts_summary_system))) {
    return PromptKind::kSummary;
  }
  if (system_prompt.starts_with(StablePrefix(resources::k_prompts_align_system))) {
    return PromptKind::kAlign;
  }
  if (system_prompt.starts_with(StablePrefix(resources::k_prompts_salience_system))) {
    return PromptKind::kSalience;
  }
  return PromptKind::kUnknown;
}

// ---- summary generation ------------------------------------------------

namespace {

bool IsTerminal(char c) { return c == '.' || c == '?' || c == '!'; }
bool IsBlank(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; }

std::string CollapseWhitespace(std::string_view text) {
  std::string out;
  bool blank = false;
  for (char c : Trim(text)) {
    if (IsBlank(c)) {
      blank = true;
      continue;
    }
    if (blank && !out.empty()) out.push_back(' ');
    blank = false;
    out.push_back(c);
  }
  return out;
}

}  // namespace

bool IsSingleSentence(std::string_view text) {
  const std::string t = Trim(text);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (IsTerminal(t[i]) && IsBlank(t[i + 1])) return false;
  }
  return true;
}

std::string RepairSentenceBreaks(std::string_view text) {
  std::string t = Trim(text);
  for (std::size_t i = 0; i + 1 < t.size(); ++i) {
    if (IsTerminal(t[i]) && IsBlank(t[i + 1])) t[i] = ';';
  }
  return t;
}

Summary GenerateSummary(LlmGateway &gateway, const Document &doc,
                        std::span<const GenreExample> examples,
                        const GenerationConfig &config, std::string summary_id) {
  if (examples.empty()) {
    throw DataError("no genre examples available to generate a summary for " + doc.id);
  }
  std::string shown;
  for (const GenreExample &ex : examples) {
    shown += "Document:\n" + ex.document_text + "\nSummary: " + ex.summary_text + "\n\n";
  }
  const std::string limit = std::to_string(config.max_chars);
  ChatRequest req;
  req.model_name = config.model_name;
  req.system_prompt = Render(resources::k_prompts_summary_system, {{"limit", limit}});
  req.user_prompt = Render(resources::k_prompts_summary_user,
                           {{"genre", doc.genre}, {"examples", Trim(shown)}, {"document", doc.Text()}});
  req.temperature = config.temperature;
  req.top_p = config.top_p;
  req.max_tokens = config.max_tokens;

  std::string reply = CollapseWhitespace(gateway.Chat(req));
  for (int reprompt = 0; CodePointCount(reply) > config.max_chars; ++reprompt) {
    if (reprompt >= config.max_reprompts) {
      throw ServiceError("summary generation failed for " + doc.id + ": still " +
                         std::to_string(CodePointCount(reply)) + " characters after " +
                         std::to_string(config.max_reprompts) + " re-prompts");
    }
    req.history.push_back({"user", req.user_prompt});
    req.history.push_back({"assistant", reply});
    req.user_prompt = Render(resources::k_prompts_summary_abbreviate,
                             {{"length", std::to_string(CodePointCount(reply))}, {"limit", limit}});
    reply = CollapseWhitespace(gateway.Chat(req));
  }
  if (reply.empty()) throw ServiceError("summary generation for " + doc.id + " returned no text");
  return MakeSummary(std::move(summary_id), "model:" + config.model_name,
                     RepairSentenceBreaks(reply));
}

// ---- alignment -----------------------------------------------------------

std::vector<std::pair<std::size_t, std::size_t>> MakeBatches(std::size_t n, int batch_size) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t b = 0; b < n; b += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(b, std::min(n, b + static_cast<std::size_t>(batch_size)));
  }
  return out;
}

std::vector<bool> ParseAlignmentReply(std::string_view reply, std::size_t batch_len) {
  static const std::regex line_re(R"(^\s*\**\s*(\d+)\s*\**\s*[.):\-]?\s*\**\s*(yes|no)\b)",
                                  std::regex::icase);
  std::vector<std::optional<bool>> answers(batch_len);
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, line_re)) continue;
    const long idx = std::stol(m[1].str());
    if (idx < 1 || idx > static_cast<long>(batch_len)) {
      throw DataError("alignment reply index " + std::to_string(idx) + " outside 1.." +
                      std::to_string(batch_len));
    }
    auto &slot = answers[static_cast<std::size_t>(idx - 1)];
    if (slot) throw DataError("alignment reply repeats index " + std::to_string(idx));
    slot = Lowercase(m[2].str()) == "yes";
  }
  std::vector<bool> out;
  out.reserve(batch_len);
  for (std::size_t i = 0; i < batch_len; ++i) {
    if (!answers[i]) throw DataError("alignment reply lacks index " + std::to_string(i + 1));
    out.push_back(*answers[i]);
  }
  return out;
}

namespace {

std::string DescribeEntity(const Entity &e) {
  std::vector<std::string> seen;
  for (const Mention &m : e.mentions) {
    if (std::find(seen.begin(), seen.end(), m.surface) == seen.end()) seen.push_back(m.surface);
    if (seen.size() == 3) break;
  }
  return Join(seen, " | ");
}

}  // namespace

std::vector<AlignmentRecord> AlignEntitiesLlm(LlmGateway &gateway, const Document &doc,
                                              const Summary &summary, int batch_size,
                                              const LlmTaskConfig &config) {
  if (batch_size < kMinAlignBatch || batch_size > kMaxAlignBatch) {
    throw ConfigError("alignment batch size must be within [" + std::to_string(kMinAlignBatch) +
                      ", " + std::to_string(kMaxAlignBatch) + "]");
  }
  std::vector<const Entity *> ordered;
  for (const Entity &e : doc.entities) ordered.push_back(&e);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Entity *a, const Entity *b) { return a->position < b->position; });

  std::map<std::string, bool> labels;
  const auto batches = MakeBatches(ordered.size(), batch_size);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto [begin, end] = batches[b];
    std::string listing;
    for (std::size_t i = begin; i < end; ++i) {
      listing += std::to_string(i - begin + 1) + ". " + DescribeEntity(*ordered[i]) + "\n";
    }
    const std::string count = std::to_string(end - begin);
    ChatRequest req;
    req.model_name = config.model_name;
    req.system_prompt = std::string(Trim(resources::k_prompts_align_system));
    req.user_prompt = Render(resources::k_prompts_align_user,
                             {{"summary", summary.text}, {"count", count}, {"entities", Trim(listing)}});
    req.temperature = config.temperature;
    req.top_p = config.top_p;
    req.max_tokens = config.max_tokens;

    std::vector<bool> answers;
    std::string reply = gateway.Chat(req);
    try {
      answers = ParseAlignmentReply(reply, end - begin);
    } catch (const Error &) {
      req.history.push_back({"user", req.user_prompt});
      req.history.push_back({"assistant", reply});
      req.user_prompt = Render(resources::k_prompts_align_strict, {{"count", count}});
      reply = gateway.Chat(req);
      try {
        answers = ParseAlignmentReply(reply, end - begin);
      } catch (const Error &e) {
        throw ServiceError("document " + doc.id + ", summary " + summary.id + ": batch " +
                           std::to_string(b + 1) + " (entities " + std::to_string(begin + 1) +
                           "-" + std::to_string(end) + ") unparseable after re-prompt: " + e.what());
      }
    }
    for (std::size_t i = begin; i < end; ++i) labels[ordered[i]->id] = answers[i - begin];
  }

  std::vector<AlignmentRecord> records;
  records.reserve(doc.entities.size());
  for (const Entity &e : doc.entities) {
    records.push_back({doc.id, e.id, summary.id, Method::kLlm, labels.at(e.id), {}});
  }
  return records;
}

// ---- direct salience prediction ---------------------------------------------

namespace {

std::vector<std::string> MentionTokens(const Document &doc, const Mention &m) {
  std::vector<std::string> tokens;
  for (int i = m.span.start; i < m.span.end; ++i) tokens.push_back(doc.tokens[i].surface);
  return tokens;
}

}  // namespace

SalienceShot MakeShot(const Document &doc, const MatchConfig &cfg) {
  SalienceShot shot;
  shot.document_text = doc.Text();
  std::vector<const Entity *> ordered;
  for (const Entity &e : doc.entities) ordered.push_back(&e);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Entity *a, const Entity *b) { return a->position < b->position; });
  for (const Entity *e : ordered) {
    if (!e->gold_score || *e->gold_score < 1) continue;
    const Mention *name = &e->mentions.front();
    for (const Mention &m : e->mentions) {
      if (!IsPronounOnly(MentionTokens(doc, m), cfg)) {
        name = &m;
        break;
      }
    }
    shot.scores.emplace_back(name->surface, *e->gold_score);
  }
  return shot;
}

std::vector<const Document *> SelectShots(std::span<const Document> pool,
                                          std::string_view exclude_id, std::size_t k,
                                          std::uint64_t seed) {
  std::vector<const Document *> candidates;
  for (const Document &d : pool) {
    if (d.id != exclude_id) candidates.push_back(&d);
  }
  SplitMix64 rng(DeriveSeed(DeriveSeed(seed, "shots"), exclude_id));
  const std::size_t take = std::min(k, candidates.size());
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + UniformIndex(rng, candidates.size() - i);
    std::swap(candidates[i], candidates[j]);
  }
  candidates.resize(take);
  return candidates;
}

std::vector<ParsedPrediction> ParseSalienceReply(std::string_view reply) {
  static const std::regex line_re(R"(^\s*(?:[-*]\s+|\d+[.)]\s+)?(.+):\s*\**\s*(\d+)\b)");
  std::vector<ParsedPrediction> out;
  std::istringstream in{std::string(reply)};
  std::string line;
  while (std::getline(in, line)) {
    std::smatch m;
    if (!std::regex_search(line, m, line_re)) continue;
    std::string text = Trim(m[1].str());
    while (!text.empty() && (text.front() == '*' || text.front() == '"')) text.erase(0, 1);
    while (!text.empty() && (text.back() == '*' || text.back() == '"')) text.pop_back();
    text = Trim(text);
    int score = 0;
    try {
      score = std::stoi(m[2].str());
    } catch (const std::exception &) {
      continue;
    }
    if (text.empty() || score < 1 || score > 5) continue;
    out.push_back({std::move(text), score});
  }
  return out;
}

PredictionResult ResolvePredictions(const Document &doc,
                                    std::span<const ParsedPrediction> predictions,
                                    const MatchConfig &cfg) {
  std::vector<const Entity *> ordered;
  for (const Entity &e : doc.entities) ordered.push_back(&e);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Entity *a, const Entity *b) { return a->position < b->position; });

  std::map<std::string, int> best;
  PredictionResult result;
  for (const ParsedPrediction &p : predictions) {
    const std::vector<std::string> words = SplitWords(p.entity_text);
    const std::vector<std::string> norm = Normalize(words, cfg);
    const SummaryIndex as_text(p.entity_text, cfg);
    const Entity *match = nullptr;
    for (const Entity *e : ordered) {
      for (const Mention &m : e->mentions) {
        const auto tokens = MentionTokens(doc, m);
        if (!norm.empty() && Normalize(tokens, cfg) == norm && !IsPronounOnly(tokens, cfg)) {
          match = e;
          break;
        }
      }
      if (match) break;
    }
    if (!match) {
      for (const Entity *e : ordered) {
        for (const Mention &m : e->mentions) {
          if (MentionMatches(MentionTokens(doc, m), as_text, cfg)) {
            match = e;
            break;
          }
        }
        if (match) break;
      }
    }
    if (!match) {
      result.unresolved += 1;
      result.unresolved_texts.push_back(p.entity_text);
      continue;
    }
    int &slot = best[match->id];
    slot = std::max(slot, p.score);
  }
  const int n = static_cast<int>(doc.summaries.size());
  for (const Entity &e : doc.entities) {
    auto it = best.find(e.id);
    result.scores.push_back({e.id, it == best.end() ? 0 : it->second, n});
  }
  return result;
}

PredictionResult PredictSalienceLlm(LlmGateway &gateway, const Document &doc,
                                    std::span<const SalienceShot> shots,
                                    const LlmTaskConfig &config, const MatchConfig &cfg) {
  std::string shown;
  for (const SalienceShot &s : shots) {
    std::string lines;
    for (const auto &[text, score] : s.scores) lines += text + ": " + std::to_string(score) + "\n";
    shown += Render(resources::k_prompts_salience_shot,
                    {{"document", s.document_text}, {"scores", Trim(lines)}});
  }
  ChatRequest req;
  req.model_name = config.model_name;
  req.system_prompt = std::string(Trim(resources::k_prompts_salience_system));
  req.user_prompt = Render(resources::k_prompts_salience_user,
                           {{"shots", shown}, {"document", doc.Text()}});
  req.temperature = config.temperature;
  req.top_p = config.top_p;
  req.max_tokens = config.max_tokens;

  std::string reply = gateway.Chat(req);
  std::vector<ParsedPrediction> parsed = ParseSalienceReply(reply);
  if (parsed.empty()) {
    req.history.push_back({"user", req.user_prompt});
    req.history.push_back({"assistant", reply});
    req.user_prompt = std::string(Trim(resources::k_prompts_salience_strict));
    reply = gateway.Chat(req);
    parsed = ParseSalienceReply(reply);
    if (parsed.empty()) {
      throw ServiceError("salience reply for document " + doc.id + " unparseable after re-prompt");
    }
  }
  return ResolvePredictions(doc, parsed, cfg);
}

}  // namespace sage
