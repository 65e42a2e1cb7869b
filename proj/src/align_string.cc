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

#include "sage/align_string.h"

#include <algorithm>

#include "sage/error.h"

namespace sage {

void MatchConfig::Validate() const {
  if (partial_min_hits < 1) throw ConfigError("partial_min_hits must be >= 1");
  if (partial_len_threshold < 1) throw ConfigError("partial_len_threshold must be >= 1");
  if (stopwords.empty()) throw ConfigError("stopword list is empty");
  if (pronouns.empty()) throw ConfigError("pronoun list is empty");
}

std::vector<std::string> Normalize(std::span<const std::string> words,
                                   const MatchConfig &cfg) {
  return NormalizeWords(words, cfg.stopwords);
}

SummaryIndex::SummaryIndex(std::string_view text, const MatchConfig &cfg) {
  const std::vector<std::string> raw = SplitWords(text);
  words_ = Normalize(raw, cfg);
  vocabulary_.insert(words_.begin(), words_.end());
}

bool SummaryIndex::ContainsSequence(std::span<const std::string> needle) const {
  if (needle.empty()) return false;
  return std::search(words_.begin(), words_.end(), needle.begin(),
                     needle.end()) != words_.end();
}

bool SummaryIndex::ContainsWord(const std::string &word) const {
  return vocabulary_.contains(word);
}

bool IsPronounOnly(std::span<const std::string> mention_words,
                   const MatchConfig &cfg) {
  bool any = false;
  for (const std::string &w : mention_words) {
    std::string norm = Lowercase(StripPunctuation(w));
    if (norm.empty()) continue;
    if (!cfg.pronouns.contains(norm)) return false;
    any = true;
  }
  return any;
}

bool MentionMatches(std::span<const std::string> mention_words,
                    const SummaryIndex &summary, const MatchConfig &cfg) {
  if (IsPronounOnly(mention_words, cfg)) return false;
  const std::vector<std::string> content = Normalize(mention_words, cfg);
  if (content.empty()) return false;
  if (summary.ContainsSequence(content)) return true;
  if (static_cast<int>(mention_words.size()) < cfg.partial_len_threshold) {
    return false;
  }
  WordSet hits;
  for (const std::string &w : content) {
    if (summary.ContainsWord(w)) hits.insert(w);
  }
  return static_cast<int>(hits.size()) >= cfg.partial_min_hits;
}

bool MentionMatches(const Mention &mention, const Summary &summary,
                    const MatchConfig &cfg) {
  // Mention surfaces are token surfaces joined by single spaces; pure
  // punctuation tokens still count toward the mention length.
  std::vector<std::string> tokens;
  std::size_t start = 0;
  const std::string &s = mention.surface;
  while (start < s.size()) {
    std::size_t sp = s.find(' ', start);
    if (sp == std::string::npos) sp = s.size();
    if (sp > start) tokens.push_back(s.substr(start, sp - start));
    start = sp + 1;
  }
  return MentionMatches(tokens, SummaryIndex(summary.text, cfg), cfg);
}

std::vector<AlignmentRecord> AlignString(const Document &doc,
                                         const Summary &summary,
                                         const MatchConfig &cfg) {
  const SummaryIndex index(summary.text, cfg);
  std::vector<AlignmentRecord> records;
  records.reserve(doc.entities.size());
  for (const Entity &e : doc.entities) {
    bool label = false;
    for (const Mention &m : e.mentions) {
      std::vector<std::string> tokens;
      tokens.reserve(m.span.end - m.span.start);
      for (int i = m.span.start; i < m.span.end; ++i) {
        tokens.push_back(doc.tokens[i].surface);
      }
      if (MentionMatches(tokens, index, cfg)) {
        label = true;
        break;
      }
    }
    records.push_back({doc.id, e.id, summary.id, Method::kString, label, {}});
  }
  return records;
}

}  // namespace sage
