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

#include <sys/types.h>

#include <chrono>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "sage/alignment.h"
#include "sage/corpus.h"
#include "sage/text.h"

namespace sage {

struct CorefCluster {
  std::vector<Span> spans;

  bool operator==(const CorefCluster &) const = default;
};

class CorefResolver {
 public:
  virtual ~CorefResolver() = default;
  virtual std::vector<CorefCluster> Resolve(std::span<const std::string> tokens) = 0;
  virtual std::string Name() const = 0;
};

// Deterministic stand-in for a neural resolver: single tokens with the same
// lowercased, punctuation-stripped form form one cluster, unless that form
// is a stopword or pronoun.  Clusters are ordered by first occurrence.
class MockCorefResolver : public CorefResolver {
 public:
  MockCorefResolver(WordSet stopwords = DefaultStopwords(),
                    WordSet pronouns = DefaultPronouns());

  std::vector<CorefCluster> Resolve(std::span<const std::string> tokens) override;
  std::string Name() const override { return "mock"; }

 private:
  WordSet stopwords_;
  WordSet pronouns_;
};

// Wire format of the stdio sidecar protocol.
std::string EncodeCorefRequest(const std::string &id,
                               std::span<const std::string> tokens);
std::string EncodeCorefResponse(const std::string &id,
                                std::span<const CorefCluster> clusters);
// Parses and validates one response line against the request it answers.
std::vector<CorefCluster> DecodeCorefResponse(std::string_view line,
                                              const std::string &expected_id,
                                              std::size_t token_count);

// Client for an external resolver speaking line-delimited JSON over stdio.
// The command runs under /bin/sh; requests are serialized.
class SidecarCorefResolver : public CorefResolver {
 public:
  explicit SidecarCorefResolver(std::string command,
                                std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~SidecarCorefResolver() override;

  SidecarCorefResolver(const SidecarCorefResolver &) = delete;
  SidecarCorefResolver &operator=(const SidecarCorefResolver &) = delete;

  std::vector<CorefCluster> Resolve(std::span<const std::string> tokens) override;
  std::string Name() const override { return "sidecar"; }

 private:
  void Start();
  void Stop();
  std::string ReadLine();

  std::string command_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string pending_;
  long next_id_ = 0;
};

enum class ConcatOrder { kDocumentFirst, kSummaryFirst };

// Where the document and summary land in the concatenated token stream.
struct ConcatLayout {
  int doc_token_count = 0;
  int summary_token_count = 0;
  int separator_len = 1;
  ConcatOrder order = ConcatOrder::kDocumentFirst;

  int doc_offset() const;
  int summary_offset() const;
  int total() const { return doc_token_count + separator_len + summary_token_count; }
  bool InSummary(const Span &s) const;
  // Concatenated index of summary token `i`, and back.
  int SummaryToConcat(int i) const { return summary_offset() + i; }
  int ConcatToSummary(int c) const { return c - summary_offset(); }
};

// Token placed between document and summary; chosen to never occur in text.
inline constexpr std::string_view kConcatSeparator = "@@SAGE_SEP@@";

struct CorefOptions {
  ConcatOrder order = ConcatOrder::kDocumentFirst;
};

// An entity is aligned when some cluster contains both a span overlapping
// one of its mentions and a span inside the summary region.
std::vector<AlignmentRecord> AlignCoref(const Document &doc, const Summary &summary,
                                        CorefResolver &resolver,
                                        const CorefOptions &options = {});

}  // namespace sage
