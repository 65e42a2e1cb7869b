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

#include "sage/llm_mock.h"

#include <algorithm>
#include <cctype>
#include <map>
#include <regex>
#include <sstream>

#include "json.hpp"
#include "sage/error.h"
#include "sage/text.h"

namespace sage {

using nlohmann::json;

void ScriptedTransport::Push(HttpResult result) {
  std::lock_guard lock(mu_);
  queue_.push_back(std::move(result));
}

void ScriptedTransport::PushContent(std::string_view content) {
  Push({200, MakeChatCompletionBody(content)});
}

HttpResult ScriptedTransport::Post(const std::string &body) {
  std::lock_guard lock(mu_);
  bodies_.push_back(body);
  if (queue_.empty()) throw ServiceError("scripted transport exhausted");
  HttpResult r = std::move(queue_.front());
  queue_.pop_front();
  return r;
}

std::vector<std::string> ScriptedTransport::bodies() const {
  std::lock_guard lock(mu_);
  return bodies_;
}

std::size_t ScriptedTransport::calls() const {
  std::lock_guard lock(mu_);
  return bodies_.size();
}

namespace {

std::vector<std::string> Lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// Text following the last "Document:\n" up to the next blank line.
std::string DocumentSection(std::string_view prompt) {
  const auto at = prompt.rfind("Document:\n");
  if (at == std::string_view::npos) return {};
  std::string_view rest = prompt.substr(at + 10);
  return std::string(rest.substr(0, rest.find("\n\n")));
}

std::string FitWords(std::string_view text, std::size_t limit) {
  std::vector<std::string> words = SplitWords(text);
  std::string out = Join(words, " ");
  while (CodePointCount(out) > limit && !words.empty()) {
    words.pop_back();
    out = Join(words, " ");
  }
  return out;
}

bool IsContent(const std::string &w, const MatchConfig &cfg) {
  return !w.empty() && !cfg.pronouns.contains(w);
}

}  // namespace

std::string HeuristicMockTransport::Reply(const std::string &body) const {
  json req;
  try {
    req = json::parse(body);
  } catch (const json::exception &e) {
    throw ServiceError(std::string("mock transport got invalid JSON: ") + e.what());
  }
  const json &messages = req.at("messages");
  std::string system;
  std::vector<std::string> users;
  std::string last_assistant;
  for (const json &m : messages) {
    const std::string role = m.at("role").get<std::string>();
    if (role == "system") system = m.at("content").get<std::string>();
    if (role == "user") users.push_back(m.at("content").get<std::string>());
    if (role == "assistant") last_assistant = m.at("content").get<std::string>();
  }
  if (users.empty()) throw ServiceError("mock transport got no user message");
  const std::string &first_user = users.front();

  switch (ClassifySystemPrompt(system)) {
    case PromptKind::kSummary: {
      if (users.size() > 1) {
        std::smatch m;
        static const std::regex limit_re(R"(at most (\d+) characters)");
        std::size_t limit = kMaxSummaryChars;
        if (std::regex_search(users.back(), m, limit_re)) limit = std::stoul(m[1].str());
        return FitWords(last_assistant, limit);
      }
      const auto lines = Lines(DocumentSection(first_user));
      return lines.empty() ? std::string("Nothing happens.") : lines.front();
    }
    case PromptKind::kAlign: {
      const auto lines = Lines(first_user);
      std::string summary = lines.size() > 1 ? lines[1] : std::string();
      const SummaryIndex index(summary, cfg_);
      static const std::regex entity_re(R"(^(\d+)\. (.*)$)");
      bool listing = false;
      std::string out;
      for (const std::string &line : lines) {
        if (line.starts_with("For each of the following")) listing = true;
        std::smatch m;
        if (!listing || !std::regex_match(line, m, entity_re)) continue;
        bool yes = false;
        for (const std::string &w : Normalize(SplitWords(m[2].str()), cfg_)) {
          if (w != "|" && IsContent(w, cfg_) && index.ContainsWord(w)) yes = true;
        }
        out += m[1].str() + ". " + (yes ? "yes" : "no") + "\n";
      }
      return out;
    }
    case PromptKind::kSalience: {
      std::map<std::string, int> counts;
      std::vector<std::string> order;
      for (const std::string &line : Lines(DocumentSection(first_user))) {
        const auto words = SplitWords(line);
        for (std::size_t i = 1; i < words.size(); ++i) {
          const std::string &w = words[i];
          if (!std::isupper(static_cast<unsigned char>(w.front()))) continue;
          const std::string lower = Lowercase(w);
          if (cfg_.stopwords.contains(lower) || cfg_.pronouns.contains(lower)) continue;
          if (counts[w]++ == 0) order.push_back(w);
        }
      }
      std::stable_sort(order.begin(), order.end(), [&](const auto &a, const auto &b) {
        return counts.at(a) > counts.at(b);
      });
      std::string out;
      for (std::size_t i = 0; i < order.size() && i < 4; ++i) {
        out += order[i] + ": " + std::to_string(5 - static_cast<int>(i)) + "\n";
      }
      return out.empty() ? std::string("none: 1\n") : out;
    }
    case PromptKind::kUnknown:
      break;
  }
  throw ServiceError("mock transport cannot answer an unrecognized prompt");
}

HttpResult HeuristicMockTransport::Post(const std::string &body) {
  return {200, MakeChatCompletionBody(Reply(body))};
}

}  // namespace sage
