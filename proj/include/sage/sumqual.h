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

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sage/corpus.h"
#include "sage/llm_gateway.h"

namespace sage {

// Lowercased, punctuation-stripped word tokens.
std::vector<std::string> MetricTokens(std::string_view text);

class NgramProfile {
 public:
  NgramProfile(std::span<const std::string> tokens, int n);

  int n() const { return n_; }
  std::size_t total() const { return total_; }
  const std::map<std::vector<std::string>, std::size_t> &counts() const { return counts_; }
  // Sum over shared n-grams of min(count here, count there).
  std::size_t ClippedOverlap(const NgramProfile &other) const;

 private:
  int n_;
  std::size_t total_ = 0;
  std::map<std::vector<std::string>, std::size_t> counts_;
};

struct Prf3 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Prf3 RougeN(std::string_view candidate, std::string_view reference, int n);
Prf3 RougeL(std::string_view candidate, std::string_view reference);

std::size_t LcsLength(std::span<const std::string> a, std::span<const std::string> b);

// Sentence BLEU with uniform weights up to 4-grams, the brevity penalty, and
// add-one smoothing on 2- to 4-gram precisions.
double Bleu(std::string_view candidate, std::string_view reference);
// Mean BLEU over ordered pairs (i as candidate, j != i as reference).
double SelfBleu(std::span<const std::string> texts);

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<std::vector<double>> Embed(std::span<const std::string> texts) = 0;
  virtual std::string Name() const = 0;
};

// Bag-of-words tf-idf fit on the texts being embedded.  Term weight is
// raw count times ln((1 + N) / (1 + df)) + 1; the vocabulary is sorted.
class TfidfEmbedder : public Embedder {
 public:
  std::vector<std::vector<double>> Embed(std::span<const std::string> texts) override;
  std::string Name() const override { return "tfidf"; }
  const std::vector<std::string> &vocabulary() const { return vocabulary_; }

 private:
  std::vector<std::string> vocabulary_;
};

// POSTs {"texts": [...]} and reads {"vectors": [[...], ...]} through the
// gateway's cache and retry policy.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(LlmGateway &gateway) : gateway_(gateway) {}
  std::vector<std::vector<double>> Embed(std::span<const std::string> texts) override;
  std::string Name() const override { return "remote:" + gateway_.Endpoint(); }

 private:
  LlmGateway &gateway_;
};

double Cosine(std::span<const double> a, std::span<const double> b);

struct SimilarityResult {
  double mean = 0.0;
  std::size_t pairs = 0;
  std::size_t skipped_pairs = 0;  // a zero vector on either side
};

// Mean cosine over unordered pairs.  Throws DataError when every pair is skipped.
SimilarityResult PairwiseSimilarity(std::span<const std::string> texts, Embedder &embedder);

struct DocumentQuality {
  std::string document_id;
  std::size_t human = 0;
  std::size_t generated = 0;
  // Generated summaries against each human reference; absent without both.
  std::optional<Prf3> rouge1, rouge2, rougel;
  std::optional<double> self_bleu_human, self_bleu_generated;
  std::optional<SimilarityResult> similarity_human, similarity_generated;
};

DocumentQuality AssessDocument(const Document &doc, Embedder &embedder);

}  // namespace sage
