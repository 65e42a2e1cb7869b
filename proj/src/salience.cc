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

#include "sage/salience.h"

#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "sage/error.h"

namespace sage {

SegmentTable::SegmentTable()
    : SegmentTable({{0.10, 5}, {0.30, 4}, {0.50, 3}, {0.70, 2}, {0.80, 1}, {1.00, 0}}) {}

SegmentTable::SegmentTable(std::vector<std::pair<double, int>> entries)
    : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("segment table is empty");
  for (std::size_t i = 1; i < entries_.size(); ++i) {
    if (!(entries_[i].first > entries_[i - 1].first)) {
      throw ConfigError("segment bounds must be strictly increasing");
    }
    if (!(entries_[i].second < entries_[i - 1].second)) {
      throw ConfigError("segment scores must be strictly decreasing");
    }
  }
  if (entries_.back().first != 1.0) throw ConfigError("final segment bound must be 1.0");
  if (entries_.front().first <= 0.0) throw ConfigError("segment bounds must be positive");
}

int SegmentTable::ScoreFor(double fraction) const {
  for (const auto &[bound, score] : entries_) {
    if (fraction < bound) return score;
  }
  return entries_.back().second;
}

std::vector<SalienceScore> Aggregate(std::span<const std::string> entity_ids,
                                     std::span<const AlignmentRecord> records,
                                     int n_summaries) {
  std::map<std::string, int> counts;
  for (const std::string &id : entity_ids) counts[id] = 0;
  std::set<std::pair<std::string, std::string>> seen;
  std::set<std::string> summaries;
  std::optional<Method> method;
  for (const AlignmentRecord &r : records) {
    if (method && *method != r.method) {
      throw DataError("aggregate: records mix methods " +
                      std::string(MethodName(*method)) + " and " +
                      std::string(MethodName(r.method)));
    }
    method = r.method;
    if (!seen.insert({r.entity_id, r.summary_id}).second) {
      throw DataError("aggregate: duplicate record for entity " + r.entity_id +
                      " and summary " + r.summary_id);
    }
    auto it = counts.find(r.entity_id);
    if (it == counts.end()) {
      throw DataError("aggregate: record for unknown entity " + r.entity_id);
    }
    summaries.insert(r.summary_id);
    if (r.label) it->second += 1;
  }
  if (static_cast<int>(summaries.size()) > n_summaries) {
    throw DataError("aggregate: records span more summaries than the document has");
  }
  std::vector<SalienceScore> out;
  out.reserve(entity_ids.size());
  for (const std::string &id : entity_ids) out.push_back({id, counts[id], n_summaries});
  return out;
}

std::vector<SalienceScore> Aggregate(const Document &doc,
                                     std::span<const AlignmentRecord> records) {
  std::vector<std::string> ids;
  for (const Entity &e : doc.entities) ids.push_back(e.id);
  for (const AlignmentRecord &r : records) {
    if (r.document_id != doc.id) {
      throw DataError("aggregate: record for document " + r.document_id +
                      " passed with document " + doc.id);
    }
    if (doc.FindSummary(r.summary_id) == nullptr) {
      throw DataError("aggregate: unknown summary " + r.summary_id + " in " + doc.id);
    }
  }
  return Aggregate(ids, records, static_cast<int>(doc.summaries.size()));
}

std::vector<SalienceScore> PositionBaseline(const Document &doc,
                                            const SegmentTable &table) {
  if (doc.sentence_count < 1) throw DataError("document " + doc.id + " has no sentences");
  std::vector<SalienceScore> out;
  const int n = static_cast<int>(doc.summaries.size());
  for (const Entity &e : doc.entities) {
    const double fraction = static_cast<double>(doc.FirstMentionSentence(e)) /
                            static_cast<double>(doc.sentence_count);
    out.push_back({e.id, table.ScoreFor(fraction), n});
  }
  return out;
}

std::vector<SalienceScore> GoldScores(const Document &doc,
                                      std::span<const AlignmentRecord> manual) {
  std::vector<AlignmentRecord> mine;
  for (const AlignmentRecord &r : manual) {
    if (r.document_id != doc.id) continue;
    if (r.method != Method::kManual) {
      throw DataError("gold scores need manual records, got " +
                      std::string(MethodName(r.method)));
    }
    mine.push_back(r);
  }
  std::set<std::pair<std::string, std::string>> covered;
  for (const AlignmentRecord &r : mine) covered.insert({r.summary_id, r.entity_id});
  for (const Summary &s : doc.summaries) {
    bool any = false;
    for (const Entity &e : doc.entities) {
      if (covered.contains({s.id, e.id})) {
        any = true;
      }
    }
    if (!any && !doc.entities.empty()) {
      throw DataError("document " + doc.id + ": no manual alignments for summary " + s.id);
    }
    for (const Entity &e : doc.entities) {
      if (!covered.contains({s.id, e.id})) {
        throw DataError("document " + doc.id + ": no manual alignment for entity " +
                        e.id + " in summary " + s.id);
      }
    }
  }
  std::vector<SalienceScore> scores = Aggregate(doc, mine);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const Entity &e = doc.entities[i];
    if (e.gold_score && *e.gold_score != scores[i].score) {
      throw DataError("document " + doc.id + ": entity " + e.id + ": stored gold_score " +
                      std::to_string(*e.gold_score) + " but manual alignments give " +
                      std::to_string(scores[i].score));
    }
  }
  return scores;
}

std::string ScoresToTsv(std::span<const ScoreRow> rows) {
  std::ostringstream out;
  out << "document_id\tentity_id\tmethod\tscore\n";
  for (const ScoreRow &r : rows) {
    out << r.document_id << '\t' << r.entity_id << '\t' << r.method << '\t' << r.score << '\n';
  }
  return out.str();
}

std::vector<ScoreRow> ScoresFromTsv(std::string_view text) {
  std::vector<ScoreRow> rows;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.starts_with("document_id\t")) continue;
    std::istringstream fields(line);
    ScoreRow r;
    std::string score;
    if (!std::getline(fields, r.document_id, '\t') ||
        !std::getline(fields, r.entity_id, '\t') ||
        !std::getline(fields, r.method, '\t') || !std::getline(fields, score, '\t')) {
      throw DataError("score TSV line " + std::to_string(lineno) + ": expected 4 columns");
    }
    try {
      std::size_t used = 0;
      r.score = std::stoi(score, &used);
      if (used != score.size()) throw std::invalid_argument(score);
    } catch (const std::exception &) {
      throw DataError("score TSV line " + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace sage
