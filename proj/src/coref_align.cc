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

#include "sage/coref_align.h"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>

#include "json.hpp"
#include "sage/error.h"

namespace sage {

MockCorefResolver::MockCorefResolver(WordSet stopwords, WordSet pronouns)
    : stopwords_(std::move(stopwords)), pronouns_(std::move(pronouns)) {}

std::vector<CorefCluster> MockCorefResolver::Resolve(std::span<const std::string> tokens) {
  if (tokens.empty()) throw DataError("coreference request without tokens");
  std::vector<std::string> order;
  std::map<std::string, std::vector<Span>> groups;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    std::string form = Lowercase(StripPunctuation(tokens[i]));
    if (form.empty() || stopwords_.contains(form) || pronouns_.contains(form)) continue;
    auto [it, inserted] = groups.try_emplace(form);
    if (inserted) order.push_back(form);
    const int at = static_cast<int>(i);
    it->second.push_back({at, at + 1});
  }
  std::vector<CorefCluster> clusters;
  for (const std::string &form : order) {
    auto &spans = groups[form];
    if (spans.size() >= 2) clusters.push_back({std::move(spans)});
  }
  return clusters;
}

std::string EncodeCorefRequest(const std::string &id, std::span<const std::string> tokens) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["tokens"] = std::vector<std::string>(tokens.begin(), tokens.end());
  return j.dump();
}

std::string EncodeCorefResponse(const std::string &id,
                                std::span<const CorefCluster> clusters) {
  nlohmann::ordered_json j;
  j["id"] = id;
  nlohmann::ordered_json cs = nlohmann::ordered_json::array();
  for (const CorefCluster &c : clusters) {
    nlohmann::ordered_json spans = nlohmann::ordered_json::array();
    for (const Span &s : c.spans) spans.push_back({s.start, s.end});
    cs.push_back(std::move(spans));
  }
  j["clusters"] = std::move(cs);
  return j.dump();
}

std::vector<CorefCluster> DecodeCorefResponse(std::string_view line,
                                              const std::string &expected_id,
                                              std::size_t token_count) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception &e) {
    throw ServiceError("coref sidecar protocol violation: invalid JSON: " + std::string(e.what()));
  }
  if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
    throw ServiceError("coref sidecar protocol violation: response without id");
  }
  if (j["id"].get<std::string>() != expected_id) {
    throw ServiceError("coref sidecar protocol violation: expected id " + expected_id +
                       ", got " + j["id"].get<std::string>());
  }
  if (j.contains("error")) {
    throw ServiceError("coref sidecar error: " + j["error"].dump());
  }
  if (!j.contains("clusters") || !j["clusters"].is_array()) {
    throw ServiceError("coref sidecar protocol violation: missing clusters");
  }
  std::vector<CorefCluster> clusters;
  for (const auto &jc : j["clusters"]) {
    if (!jc.is_array()) throw ServiceError("coref sidecar protocol violation: cluster is not an array");
    CorefCluster c;
    for (const auto &js : jc) {
      if (!js.is_array() || js.size() != 2 || !js[0].is_number_integer() ||
          !js[1].is_number_integer()) {
        throw ServiceError("coref sidecar protocol violation: span must be [start, end]");
      }
      Span s{js[0].get<int>(), js[1].get<int>()};
      if (s.start < 0 || s.start >= s.end || s.end > static_cast<int>(token_count)) {
        throw ServiceError("coref sidecar protocol violation: span [" + std::to_string(s.start) +
                           "," + std::to_string(s.end) + ") out of bounds");
      }
      if (std::find(c.spans.begin(), c.spans.end(), s) != c.spans.end()) {
        throw ServiceError("coref sidecar protocol violation: duplicate span in cluster");
      }
      c.spans.push_back(s);
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

SidecarCorefResolver::SidecarCorefResolver(std::string command,
                                           std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  if (command_.empty()) throw ConfigError("coref sidecar command is empty");
}

SidecarCorefResolver::~SidecarCorefResolver() { Stop(); }

void SidecarCorefResolver::Start() {
  int fds[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw ServiceError("cannot create sidecar channel: " + std::string(std::strerror(errno)));
  }
  pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw ServiceError("cannot fork coref sidecar: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDIN_FILENO);
    dup2(fds[1], STDOUT_FILENO);
    execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char *>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  setpgid(pid, pid);
  pid_ = pid;
  to_child_ = fds[0];
  from_child_ = fds[0];
  pending_.clear();
}

void SidecarCorefResolver::Stop() {
  if (pid_ < 0) return;
  const pid_t pid = pid_;
  shutdown(to_child_, SHUT_WR);
  // Give a well-behaved sidecar a moment to exit on EOF, then kill it.
  int status = 0;
  for (int i = 0; i < 50; ++i) {
    if (waitpid(pid_, &status, WNOHANG) == pid_) {
      pid_ = -1;
      break;
    }
    usleep(2000);
  }
  if (pid_ > 0) {
    kill(-pid_, SIGKILL);
    waitpid(pid_, &status, 0);
  } else {
    // The shell may have exited while a grandchild still holds the channel.
    kill(-pid, SIGKILL);
  }
  close(to_child_);
  pid_ = -1;
  to_child_ = from_child_ = -1;
  pending_.clear();
}

std::string SidecarCorefResolver::ReadLine() {
  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  for (;;) {
    if (auto nl = pending_.find('\n'); nl != std::string::npos) {
      std::string line = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) throw ServiceError("coref sidecar timed out");
    pollfd pfd{from_child_, POLLIN, 0};
    int rc = poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0 && errno == EINTR) continue;
    if (rc < 0) throw ServiceError("coref sidecar poll failed: " + std::string(std::strerror(errno)));
    if (rc == 0) throw ServiceError("coref sidecar timed out");
    char buf[4096];
    ssize_t n = read(from_child_, buf, sizeof buf);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) throw ServiceError("coref sidecar exited or closed its output");
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

std::vector<CorefCluster> SidecarCorefResolver::Resolve(std::span<const std::string> tokens) {
  if (tokens.empty()) throw DataError("coreference request without tokens");
  std::lock_guard<std::mutex> lock(mu_);
  if (pid_ < 0) Start();
  const std::string id = "r" + std::to_string(next_id_++);
  std::string line = EncodeCorefRequest(id, tokens) + "\n";
  try {
    std::size_t sent = 0;
    while (sent < line.size()) {
      ssize_t n = send(to_child_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
      if (n < 0 && errno == EINTR) continue;
      if (n < 0) throw ServiceError("coref sidecar write failed: " + std::string(std::strerror(errno)));
      sent += static_cast<std::size_t>(n);
    }
    return DecodeCorefResponse(ReadLine(), id, tokens.size());
  } catch (const Error &) {
    Stop();
    throw;
  }
}

int ConcatLayout::doc_offset() const {
  return order == ConcatOrder::kDocumentFirst ? 0 : summary_token_count + separator_len;
}

int ConcatLayout::summary_offset() const {
  return order == ConcatOrder::kDocumentFirst ? doc_token_count + separator_len : 0;
}

bool ConcatLayout::InSummary(const Span &s) const {
  return s.start >= summary_offset() && s.end <= summary_offset() + summary_token_count;
}

std::vector<AlignmentRecord> AlignCoref(const Document &doc, const Summary &summary,
                                        CorefResolver &resolver,
                                        const CorefOptions &options) {
  const std::vector<std::string> summary_tokens = Tokenize(summary.text);
  ConcatLayout layout;
  layout.doc_token_count = static_cast<int>(doc.tokens.size());
  layout.summary_token_count = static_cast<int>(summary_tokens.size());
  layout.order = options.order;

  std::vector<std::string> concat;
  concat.reserve(layout.total());
  auto append_doc = [&] {
    for (const Token &t : doc.tokens) concat.push_back(t.surface);
  };
  auto append_summary = [&] {
    concat.insert(concat.end(), summary_tokens.begin(), summary_tokens.end());
  };
  if (options.order == ConcatOrder::kDocumentFirst) {
    append_doc();
    concat.emplace_back(kConcatSeparator);
    append_summary();
  } else {
    append_summary();
    concat.emplace_back(kConcatSeparator);
    append_doc();
  }

  const std::vector<CorefCluster> clusters = resolver.Resolve(concat);
  // Clusters that reach into the summary.
  std::vector<const CorefCluster *> linked;
  for (const CorefCluster &c : clusters) {
    if (std::any_of(c.spans.begin(), c.spans.end(),
                    [&](const Span &s) { return layout.InSummary(s); })) {
      linked.push_back(&c);
    }
  }

  std::vector<AlignmentRecord> records;
  records.reserve(doc.entities.size());
  const int shift = layout.doc_offset();
  for (const Entity &e : doc.entities) {
    bool label = false;
    for (const CorefCluster *c : linked) {
      for (const Span &s : c->spans) {
        if (layout.InSummary(s)) continue;
        for (const Mention &m : e.mentions) {
          if (s.Overlaps({m.span.start + shift, m.span.end + shift})) {
            label = true;
            break;
          }
        }
        if (label) break;
      }
      if (label) break;
    }
    records.push_back({doc.id, e.id, summary.id, Method::kCoref, label, {}});
  }
  return records;
}

}  // namespace sage
