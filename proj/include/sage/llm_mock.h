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

#include <deque>
#include <mutex>
#include <string>
#include <vector>

#include "sage/align_string.h"
#include "sage/llm_gateway.h"

namespace sage {

// Replays canned results in order and records every request body.
class ScriptedTransport : public Transport {
 public:
  explicit ScriptedTransport(std::string endpoint = "scripted://chat")
      : endpoint_(std::move(endpoint)) {}

  void Push(HttpResult result);
  void PushContent(std::string_view content);  // 200 with a chat body
  HttpResult Post(const std::string &body) override;
  std::string Endpoint() const override { return endpoint_; }

  std::vector<std::string> bodies() const;
  std::size_t calls() const;

 private:
  std::string endpoint_;
  mutable std::mutex mu_;
  std::deque<HttpResult> queue_;
  std::vector<std::string> bodies_;
};

// Offline stand-in for a chat model.  Replies are a pure function of the
// request: summaries copy the document's first sentence, alignment answers
// "yes" when a content word of the entity occurs in the summary, and
// salience lists the most frequent capitalized words.
class HeuristicMockTransport : public Transport {
 public:
  explicit HeuristicMockTransport(MatchConfig cfg = {}) : cfg_(std::move(cfg)) {}

  HttpResult Post(const std::string &body) override;
  std::string Endpoint() const override { return "mock://heuristic"; }

  // The reply content for a chat-completion request body.
  std::string Reply(const std::string &body) const;

 private:
  MatchConfig cfg_;
};

}  // namespace sage
