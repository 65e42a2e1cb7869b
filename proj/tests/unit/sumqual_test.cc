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
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "sage/error.h"
#include "sage/llm_mock.h"
#include "sage/sumqual.h"
#include "test_support.h"

namespace sage {
namespace {

TEST(Rouge, HandDerivedCases) {
  const Prf3 r1 = RougeN("the cat", "the cat sat", 1);
  EXPECT_NEAR(r1.precision, 1.0, 1e-12);
  EXPECT_NEAR(r1.recall, 2.0 / 3.0, 1e-12);
  EXPECT_NEAR(r1.f1, 0.8, 1e-12);

  const Prf3 rl = RougeL("a b c d", "a c d e");
  EXPECT_NEAR(rl.precision, 0.75, 1e-12);
  EXPECT_NEAR(rl.recall, 0.75, 1e-12);
  EXPECT_NEAR(rl.f1, 0.75, 1e-12);

  // Bigrams shared: "the cat", "on the", "the mat" of five each.
  const Prf3 r2 = RougeN("The cat sat on the mat.", "the cat lay on the mat", 2);
  EXPECT_NEAR(r2.precision, 0.6, 1e-12);
  EXPECT_NEAR(r2.recall, 0.6, 1e-12);
  EXPECT_NEAR(r2.f1, 0.6, 1e-12);
}

TEST(Rouge, IdentityAndEmpty) {
  const std::string s = "Einstein debated Bohr about quantum theory.";
  for (int n : {1, 2}) EXPECT_EQ(RougeN(s, s, n).f1, 1.0);
  EXPECT_EQ(RougeL(s, s).f1, 1.0);
  EXPECT_EQ(RougeN("", s, 1).f1, 0.0);
  EXPECT_EQ(RougeL(s, "").f1, 0.0);
}

TEST(Rouge, ClippedCounts) {
  const Prf3 r = RougeN("the the the", "the cat", 1);
  EXPECT_NEAR(r.precision, 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(r.recall, 0.5, 1e-12);
}

TEST(RougeProperty, FIsSymmetric) {
  std::mt19937_64 rng(1);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(1, 8);
  auto text = [&] {
    std::string s;
    for (std::size_t i = len(rng); i > 0; --i) s += vocab[pick(rng)] + " ";
    return s;
  };
  for (int t = 0; t < 300; ++t) {
    const std::string x = text(), y = text();
    EXPECT_NEAR(RougeN(x, y, 1).f1, RougeN(y, x, 1).f1, 1e-15);
    EXPECT_NEAR(RougeN(x, y, 2).f1, RougeN(y, x, 2).f1, 1e-15);
    EXPECT_NEAR(RougeL(x, y).f1, RougeL(y, x).f1, 1e-15);
  }
}

TEST(Bleu, HandDerivedCases) {
  EXPECT_EQ(Bleu("the cat sat on the mat", "the cat sat on the mat"), 1.0);
  EXPECT_EQ(Bleu("a b", "a b"), 1.0);
  // All precisions are 1 after smoothing; only the brevity penalty remains.
  EXPECT_NEAR(Bleu("the cat", "the cat sat"), std::exp(-0.5), 1e-12);
  EXPECT_EQ(Bleu("", "the cat"), 0.0);
  EXPECT_EQ(Bleu("dog", "the cat"), 0.0);
}

TEST(Bleu, MatchesOracle) {
  const std::vector<std::string> texts = {
      "Einstein and Bohr debated quantum theory for years.",
      "For years Bohr debated Einstein on quantum mechanics.",
      "The debate between Einstein and Bohr shaped physics.",
  };
  for (const auto &a : texts) {
    for (const auto &b : texts) EXPECT_NEAR(Bleu(a, b), testing::OracleBleu(a, b), 1e-12);
  }
}

TEST(SelfBleu, IdenticalDisjointOracleAndPermutation) {
  const std::vector<std::string> same(5, "Einstein debated Bohr in Copenhagen.");
  EXPECT_EQ(SelfBleu(same), 1.0);

  const std::vector<std::string> disjoint = {"alpha beta gamma delta", "one two three four",
                                             "red green blue cyan", "north south east west",
                                             "spring summer autumn winter"};
  EXPECT_LT(SelfBleu(disjoint), 0.05);

  std::vector<std::string> three = {
      "Einstein and Bohr debated quantum theory for years.",
      "For years Bohr debated Einstein on quantum mechanics.",
      "The debate between Einstein and Bohr shaped physics.",
  };
  double want = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      if (i != j) want += testing::OracleBleu(three[i], three[j]);
    }
  }
  EXPECT_NEAR(SelfBleu(three), want / 6, 1e-12);
  const double base = SelfBleu(three);
  std::sort(three.begin(), three.end());
  do {
    EXPECT_NEAR(SelfBleu(three), base, 1e-12);
  } while (std::next_permutation(three.begin(), three.end()));

  EXPECT_THROW(SelfBleu(std::vector<std::string>{"only one"}), Error);
}

TEST(Tfidf, HandComputedCosine) {
  TfidfEmbedder e;
  const std::vector<std::string> texts = {"x y", "x z"};
  const auto v = e.Embed(texts);
  EXPECT_EQ(e.vocabulary(), (std::vector<std::string>{"x", "y", "z"}));
  const double idf_rare = std::log(3.0 / 2.0) + 1.0;
  ASSERT_EQ(v[0].size(), 3u);
  EXPECT_NEAR(v[0][0], 1.0, 1e-15);
  EXPECT_NEAR(v[0][1], idf_rare, 1e-15);
  EXPECT_EQ(v[0][2], 0.0);
  EXPECT_NEAR(Cosine(v[0], v[1]), 1.0 / (1.0 + idf_rare * idf_rare), 1e-12);
}

TEST(Tfidf, OrthogonalAndIdentical) {
  TfidfEmbedder e;
  const std::vector<std::string> texts = {"p q", "r s", "p q"};
  const auto v = e.Embed(texts);
  EXPECT_EQ(Cosine(v[0], v[1]), 0.0);
  EXPECT_NEAR(Cosine(v[0], v[2]), 1.0, 1e-15);
  const std::vector<double> zero(v[0].size(), 0.0);
  EXPECT_TRUE(std::isnan(Cosine(zero, v[0])));
}

TEST(PairwiseSimilarity, SkipsZeroVectors) {
  TfidfEmbedder e;
  const std::vector<std::string> same = {"a b c", "a b c", "a b c"};
  const auto s = PairwiseSimilarity(same, e);
  EXPECT_NEAR(s.mean, 1.0, 1e-12);
  EXPECT_EQ(s.pairs, 3u);
  const std::vector<std::string> with_empty = {"a b", "a b", "..."};
  const auto t = PairwiseSimilarity(with_empty, e);
  EXPECT_EQ(t.pairs, 1u);
  EXPECT_EQ(t.skipped_pairs, 2u);
  const std::vector<std::string> empties = {"", "!"};
  EXPECT_THROW(PairwiseSimilarity(empties, e), Error);
}

TEST(RemoteEmbedder, UsesGatewayAndValidatesShape) {
  ScriptedTransport t("scripted://embed");
  t.Push({200, R"({"vectors": [[1, 0], [0, 1]]})"});
  t.Push({200, R"({"vectors": [[1, 0]]})"});
  GatewayOptions o;
  o.sleep = [](std::chrono::milliseconds) {};
  LlmGateway gw(t, nullptr, o);
  RemoteEmbedder e(gw);
  const std::vector<std::string> texts = {"a", "b"};
  const auto v = e.Embed(texts);
  ASSERT_EQ(v.size(), 2u);
  EXPECT_EQ(v[1], (std::vector<double>{0, 1}));
  EXPECT_EQ(nlohmann::json::parse(t.bodies()[0])["texts"], nlohmann::json(texts));
  EXPECT_THROW(e.Embed(std::vector<std::string>{"c", "d"}), Error);
}

TEST(AssessDocument, HumanOnlyDocument) {
  const Document d = testing::MakeDocument(
      "q", {"Einstein met Bohr ."}, {{"e", "person", {{0, 1}}, 2}},
      {"Einstein met Bohr.", "Bohr met Einstein.", "They met."});
  TfidfEmbedder e;
  const DocumentQuality q = AssessDocument(d, e);
  EXPECT_EQ(q.human, 3u);
  EXPECT_EQ(q.generated, 0u);
  EXPECT_FALSE(q.rouge1.has_value());
  ASSERT_TRUE(q.self_bleu_human.has_value());
  EXPECT_FALSE(q.self_bleu_generated.has_value());
  EXPECT_TRUE(q.similarity_human.has_value());
}

}  // namespace
}  // namespace sage
