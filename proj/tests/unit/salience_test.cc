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

#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "sage/error.h"
#include "sage/salience.h"
#include "test_support.h"

namespace sage {
namespace {

std::vector<AlignmentRecord> Records(const std::vector<std::string> &entities,
                                     const std::vector<std::vector<bool>> &labels) {
  std::vector<AlignmentRecord> out;
  for (std::size_t e = 0; e < entities.size(); ++e) {
    for (std::size_t s = 0; s < labels[e].size(); ++s) {
      out.push_back({"d", entities[e], "s" + std::to_string(s + 1), Method::kString, labels[e][s],
                     std::nullopt});
    }
  }
  return out;
}

TEST(Aggregate, CountsPositiveSummaries) {
  const std::vector<std::string> ids = {"all", "none", "some"};
  const auto recs = Records(ids, {{true, true, true, true, true},
                                  {false, false, false, false, false},
                                  {true, false, true, true, false}});
  const auto scores = Aggregate(ids, recs, 5);
  ASSERT_EQ(scores.size(), 3u);
  EXPECT_EQ(scores[0].score, 5);
  EXPECT_EQ(scores[1].score, 0);
  EXPECT_EQ(scores[2].score, 3);
  EXPECT_EQ(scores[2].n_summaries, 5);
}

TEST(Aggregate, EntityWithoutRecordsScoresZero) {
  const std::vector<std::string> ids = {"a", "b"};
  const auto recs = Records({"a"}, {{true, true}});
  const auto scores = Aggregate(ids, recs, 5);
  EXPECT_EQ(scores[0].score, 2);
  EXPECT_EQ(scores[1].score, 0);
}

TEST(Aggregate, RejectsDuplicatesAndMixedMethods) {
  const std::vector<std::string> ids = {"a"};
  auto recs = Records(ids, {{true, false}});
  auto dup = recs;
  dup.push_back(recs[0]);
  EXPECT_THROW(Aggregate(ids, dup, 5), Error);
  auto mixed = recs;
  mixed[1].method = Method::kLlm;
  EXPECT_THROW(Aggregate(ids, mixed, 5), Error);
}

TEST(AggregateProperty, ScoreIsPositiveCountAndPermutationInvariant) {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.45);
  std::uniform_int_distribution<int> n_ent(1, 12);
  for (int t = 0; t < 300; ++t) {
    std::vector<std::string> ids;
    std::vector<std::vector<bool>> labels;
    for (int e = n_ent(rng); e > 0; --e) {
      ids.push_back("e" + std::to_string(e));
      std::vector<bool> l(5);
      for (std::size_t s = 0; s < 5; ++s) l[s] = coin(rng);
      labels.push_back(l);
    }
    auto recs = Records(ids, labels);
    const auto scores = Aggregate(ids, recs, 5);
    std::shuffle(recs.begin(), recs.end(), rng);
    const auto shuffled = Aggregate(ids, recs, 5);
    EXPECT_EQ(scores, shuffled);
    for (std::size_t e = 0; e < ids.size(); ++e) {
      const int count = static_cast<int>(std::count(labels[e].begin(), labels[e].end(), true));
      EXPECT_EQ(scores[e].score, count);
      EXPECT_GE(scores[e].score, 0);
      EXPECT_LE(scores[e].score, 5);
    }
    // Flipping a negative label to positive never lowers a score.
    for (auto &r : recs) {
      if (!r.label) {
        r.label = true;
        break;
      }
    }
    const auto flipped = Aggregate(ids, recs, 5);
    for (std::size_t e = 0; e < ids.size(); ++e) EXPECT_GE(flipped[e].score, scores[e].score);
  }
}

TEST(PositionBaseline, TwentySentenceMapping) {
  std::vector<int> first(20);
  for (int s = 0; s < 20; ++s) first[s] = s;
  const Document d = testing::MakePositionDocument(20, first);
  const auto scores = PositionBaseline(d);
  const int want[20] = {5, 5, 4, 4, 4, 4, 3, 3, 3, 3, 2, 2, 2, 2, 1, 1, 0, 0, 0, 0};
  ASSERT_EQ(scores.size(), 20u);
  for (int s = 0; s < 20; ++s) EXPECT_EQ(scores[s].score, want[s]) << "sentence " << s;
}

TEST(PositionBaseline, SingleSentenceDocumentScoresFive) {
  const Document d = testing::MakeDocument(
      "one", {"Einstein met Bohr"},
      {{"a", "person", {{0, 1}}, std::nullopt}, {"b", "person", {{2, 3}}, std::nullopt}}, {"x"});
  for (const auto &s : PositionBaseline(d)) EXPECT_EQ(s.score, 5);
}

TEST(PositionBaselineProperty, NonIncreasingInFirstMention) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> n_sent(1, 60);
  for (int t = 0; t < 200; ++t) {
    const int n = n_sent(rng);
    std::uniform_int_distribution<int> sent(0, n - 1);
    std::vector<int> first(6);
    for (int &f : first) f = sent(rng);
    std::sort(first.begin(), first.end());
    first.erase(std::unique(first.begin(), first.end()), first.end());
    const Document d = testing::MakePositionDocument(n, first);
    const auto scores = PositionBaseline(d);
    for (std::size_t i = 1; i < scores.size(); ++i) EXPECT_LE(scores[i].score, scores[i - 1].score);
  }
}

TEST(SegmentTable, ValidatesEntries) {
  EXPECT_THROW(SegmentTable(std::vector<std::pair<double, int>>{}), Error);
  EXPECT_THROW(SegmentTable({{0.5, 2}, {0.4, 1}, {1.0, 0}}), Error);
  EXPECT_THROW(SegmentTable({{0.5, 2}, {0.9, 1}}), Error);
  const SegmentTable t({{0.5, 1}, {1.0, 0}});
  EXPECT_EQ(t.ScoreFor(0.49), 1);
  EXPECT_EQ(t.ScoreFor(0.5), 0);
  EXPECT_EQ(t.ScoreFor(1.0), 0);
}

Document GoldDoc() {
  return testing::MakeDocument(
      "g", {"Einstein met Bohr"},
      {{"einstein", "person", {{0, 1}}, 5}, {"bohr", "person", {{2, 3}}, 3}},
      {"a", "b", "c", "d", "e"});
}

std::vector<AlignmentRecord> Manual(const std::vector<std::vector<bool>> &labels) {
  auto recs = Records({"einstein", "bohr"}, labels);
  for (auto &r : recs) {
    r.document_id = "g";
    r.method = Method::kManual;
  }
  return recs;
}

TEST(GoldScores, AgreesWithStoredScores) {
  const auto scores = GoldScores(GoldDoc(), Manual({{true, true, true, true, true},
                                                    {true, false, true, false, true}}));
  EXPECT_EQ(scores[0].score, 5);
  EXPECT_EQ(scores[1].score, 3);
}

TEST(GoldScores, MissingSummaryIsNamed) {
  auto recs = Manual({{true, true, true, true, true}, {true, false, true, false, true}});
  std::erase_if(recs, [](const AlignmentRecord &r) { return r.summary_id == "s4"; });
  try {
    GoldScores(GoldDoc(), recs);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("s4"), std::string::npos);
  }
}

TEST(GoldScores, InconsistentStoredScoreIsAnError) {
  EXPECT_THROW(GoldScores(GoldDoc(), Manual({{true, true, true, true, true},
                                             {true, false, false, false, true}})),
               Error);
}

TEST(ScoreTsv, RoundTrip) {
  const std::vector<ScoreRow> rows = {{"d1", "e1", "baseline", 5}, {"d1", "e2", "baseline", 0}};
  const std::string tsv = ScoresToTsv(rows);
  EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "document_id\tentity_id\tmethod\tscore");
  const auto back = ScoresFromTsv(tsv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].entity_id, "e2");
  EXPECT_EQ(back[0].score, 5);
  EXPECT_THROW(ScoresFromTsv("document_id\tentity_id\tmethod\tscore\nd\te\tm\tx\n"), Error);
}

}  // namespace
}  // namespace sage
