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
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/alignment.h"

namespace sage {

// Generated summaries may not exceed this many characters.
inline constexpr std::size_t kMaxSummaryChars = 380;

struct Token {
  int doc_index = 0;
  int sentence_index = 0;
  std::string surface;
};

// Half-open token interval [start, end).
struct Span {
  int start = 0;
  int end = 0;

  bool Overlaps(const Span &o) const { return start < o.end && o.start < end; }
  bool operator==(const Span &) const = default;
  auto operator<=>(const Span &) const = default;
};

struct Mention {
  std::string entity_id;
  Span span;
  std::string surface;
};

struct Entity {
  std::string id;
  std::string type;
  std::vector<Mention> mentions;  // ordered by span start
  int position = 0;               // 1-based order of first mention
  std::optional<int> gold_score;
};

enum class Partition { kTrain, kDev, kTest };

std::string_view PartitionName(Partition p);
Partition ParsePartition(std::string_view name);

struct Summary {
  std::string id;
  std::string source;  // "human" or "model:<name>"
  std::string text;
  std::size_t char_len = 0;

  bool IsGenerated() const { return source.starts_with("model:"); }
};

Summary MakeSummary(std::string id, std::string source, std::string text);

struct Document {
  std::string id;
  std::string genre;
  Partition partition = Partition::kTrain;
  std::vector<Token> tokens;
  int sentence_count = 0;
  std::vector<Entity> entities;
  std::vector<Summary> summaries;

  const Entity *FindEntity(std::string_view entity_id) const;
  const Summary *FindSummary(std::string_view summary_id) const;
  // Sentence of the entity's earliest mention.
  int FirstMentionSentence(const Entity &e) const;
  // Surfaces of `span` joined by single spaces.
  std::string SpanText(const Span &span) const;
  // Token surfaces, one sentence per line.
  std::string Text() const;
};

// Closed vocabularies the loader validates against.
struct CorpusSchema {
  std::vector<std::string> entity_types;
  std::vector<std::string> genres;

  static CorpusSchema Default();
  bool HasType(std::string_view t) const;
  bool HasGenre(std::string_view g) const;
};

struct Corpus {
  CorpusSchema schema;
  std::vector<Document> documents;  // sorted by id
  // Gold alignments (method=manual), when the corpus ships them.
  std::vector<AlignmentRecord> manual;

  const Document *Find(std::string_view id) const;
};

struct Violation {
  std::string rule;    // e.g. "duplicate entity position"
  std::string detail;  // offending element
};

// Empty iff every data-model invariant holds.
std::vector<Violation> ValidateDocument(const Document &doc,
                                        const CorpusSchema &schema);

// Parses one document from its JSON text; recomputes doc_index, positions
// and mention surfaces.  Throws DataError on schema violations.
Document ParseDocument(std::string_view json_text, const CorpusSchema &schema,
                       std::string_view origin = "<memory>");
std::string SerializeDocument(const Document &doc);

// Loads every *.json file under `path` (or the single file `path`), plus
// `manual_alignments.jsonl` when present.  Any violation rejects the load.
Corpus LoadCorpus(const std::filesystem::path &path,
                  const CorpusSchema &schema = CorpusSchema::Default());

// Per-genre and total descriptive statistics.
struct StatsRow {
  long documents = 0;
  long tokens = 0;
  long mentions = 0;
  long entities = 0;
  double avg_entities_per_doc = 0.0;
  // Percentages; absent when any entity in the group lacks a gold score.
  std::optional<double> pct_salient;
  std::optional<double> pct_top1;
  std::optional<double> pct_top3;
};

struct StatsTable {
  std::map<std::string, StatsRow> by_genre;
  StatsRow total;

  std::string ToTsv() const;
};

StatsTable ComputeCorpusStats(const Corpus &corpus);

}  // namespace sage
