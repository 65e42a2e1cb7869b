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
#include <utility>
#include <vector>

#include "sage/alignment.h"
#include "sage/corpus.h"

namespace sage {

struct SalienceScore {
  std::string entity_id;
  int score = 0;
  int n_summaries = 0;

  bool operator==(const SalienceScore &) const = default;
};

// Maps the sentence fraction of an entity's first mention to a score.
// Entries are (upper bound, score); an entity takes the score of the first
// bound strictly greater than its fraction, and the final bound (1.0) is
// inclusive.
class SegmentTable {
 public:
  SegmentTable();  // (0.10,5) (0.30,4) (0.50,3) (0.70,2) (0.80,1) (1.00,0)
  explicit SegmentTable(std::vector<std::pair<double, int>> entries);

  int ScoreFor(double fraction) const;
  const std::vector<std::pair<double, int>> &entries() const { return entries_; }

 private:
  std::vector<std::pair<double, int>> entries_;
};

// Score of each entity = number of summaries whose record is positive.
// Records must belong to one method and hold at most one record per
// (entity, summary); entities without positive records score 0.
std::vector<SalienceScore> Aggregate(std::span<const std::string> entity_ids,
                                     std::span<const AlignmentRecord> records,
                                     int n_summaries);
std::vector<SalienceScore> Aggregate(const Document &doc,
                                     std::span<const AlignmentRecord> records);

std::vector<SalienceScore> PositionBaseline(
    const Document &doc, const SegmentTable &table = SegmentTable());

// Gold scores from manual alignments of `doc`; every (entity, summary) pair
// must be annotated, and stored gold_score values must agree.
std::vector<SalienceScore> GoldScores(const Document &doc,
                                      std::span<const AlignmentRecord> manual);

// TSV with header "document_id\tentity_id\tmethod\tscore".
struct ScoreRow {
  std::string document_id;
  std::string entity_id;
  std::string method;
  int score = 0;
};

std::string ScoresToTsv(std::span<const ScoreRow> rows);
std::vector<ScoreRow> ScoresFromTsv(std::string_view text);

}  // namespace sage
