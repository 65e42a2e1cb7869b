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

#include <span>
#include <string>
#include <vector>

#include "sage/alignment.h"
#include "sage/corpus.h"
#include "sage/text.h"

namespace sage {

struct MatchConfig {
  WordSet stopwords = DefaultStopwords();
  WordSet pronouns = DefaultPronouns();
  // Distinct content words a long mention must share with the summary.
  int partial_min_hits = 3;
  // Mentions with at least this many tokens may use the partial rule.
  int partial_len_threshold = 3;

  void Validate() const;  // throws ConfigError
};

// Lowercase, strip punctuation, drop stopwords.  Order is preserved.
std::vector<std::string> Normalize(std::span<const std::string> words,
                                   const MatchConfig &cfg);

// A summary prepared once for repeated matching.
class SummaryIndex {
 public:
  SummaryIndex(std::string_view text, const MatchConfig &cfg);

  // True iff `needle` occurs as a contiguous run of normalized words.
  bool ContainsSequence(std::span<const std::string> needle) const;
  bool ContainsWord(const std::string &word) const;

 private:
  std::vector<std::string> words_;
  WordSet vocabulary_;
};

// True when every word of the mention is a pronoun (after stripping
// punctuation), e.g. "he", "Their".
bool IsPronounOnly(std::span<const std::string> mention_words,
                   const MatchConfig &cfg);

// Exact contiguous match for short mentions; contiguous match or enough
// distinct shared content words for long ones.  Pronoun-only mentions
// never match.
bool MentionMatches(std::span<const std::string> mention_words,
                    const SummaryIndex &summary, const MatchConfig &cfg);
bool MentionMatches(const Mention &mention, const Summary &summary,
                    const MatchConfig &cfg);

// One record per entity of `doc`, in document order.
std::vector<AlignmentRecord> AlignString(const Document &doc,
                                         const Summary &summary,
                                         const MatchConfig &cfg);

}  // namespace sage
