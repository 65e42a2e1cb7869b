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
#include <numeric>
#include <random>
#include <vector>

#include "json.hpp"
#include "sage/error.h"
#include "sage/metrics.h"
#include "test_support.h"

namespace sage {
namespace {

std::vector<double> D(std::initializer_list<double> v) { return v; }

TEST(Spearman, Examples) {
  EXPECT_DOUBLE_EQ(SpearmanRho(D({1, 2, 3}), D({10, 20, 30})), 1.0);
  EXPECT_DOUBLE_EQ(SpearmanRho(D({1, 2, 3}), D({3, 2, 1})), -1.0);
  const auto a = D({1, 2, 2, 4}), b = D({1, 3, 2, 4});
  EXPECT_NEAR(SpearmanRho(a, b), testing::OracleSpearman(a, b), 1e-12);
}

TEST(Spearman, AverageRanksShareTies) {
  EXPECT_EQ(AverageRanks(D({10, 20, 20, 5})), D({2, 3.5, 3.5, 1}));
}

TEST(Spearman, UndefinedInputsAreErrors) {
  EXPECT_THROW(SpearmanRho(D({1, 1, 1}), D({1, 2, 3})), Error);
  EXPECT_THROW(SpearmanRho(D({1}), D({1})), Error);
  EXPECT_THROW(SpearmanRho(D({1, 2}), D({1, 2, 3})), Error);
  EXPECT_FALSE(TrySpearmanRho(D({2, 2}), D({1, 2})).has_value());
}

TEST(SpearmanProperty, MatchesOracleOnRandomIntegerVectors) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(2, 12), val(0, 5);
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const int n = len(rng);
    std::vector<double> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = val(rng);
      b[i] = val(rng);
    }
    const auto rho = TrySpearmanRho(a, b);
    const bool constant = std::all_of(a.begin(), a.end(), [&](double x) { return x == a[0]; }) ||
                          std::all_of(b.begin(), b.end(), [&](double x) { return x == b[0]; });
    ASSERT_EQ(rho.has_value(), !constant);
    if (!rho) continue;
    EXPECT_NEAR(*rho, testing::OracleSpearman(a, b), 1e-9);
    ++checked;
  }
  EXPECT_GT(checked, 1500);
}

TEST(SpearmanProperty, IdentityReversalAndMonotoneTransform) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int t = 0; t < 200; ++t) {
    std::vector<double> x(3 + t % 20);
    for (double &v : x) v = g(rng);
    std::vector<double> rev(x.size()), tx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      rev[i] = -x[i];
      tx[i] = std::exp(x[i]) * 3 + 7;
    }
    EXPECT_NEAR(SpearmanRho(x, x), 1.0, 1e-12);
    EXPECT_NEAR(SpearmanRho(x, rev), -1.0, 1e-12);
    std::vector<double> y(x.size());
    for (double &v : y) v = g(rng);
    EXPECT_NEAR(SpearmanRho(tx, y), SpearmanRho(x, y), 1e-12);
  }
}

TEST(Rmse, Examples) {
  EXPECT_EQ(Rmse(D({1, 2}), D({1, 2})), 0.0);
  EXPECT_DOUBLE_EQ(Rmse(D({5, 0}), D({0, 5})), 5.0);
  EXPECT_NEAR(Rmse(D({1, 2, 3}), D({2, 2, 5})), std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_THROW(Rmse(D({}), D({})), Error);
}

TEST(RmseProperty, SymmetricNonNegativeZeroOnlyWhenEqual) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> val(0, 5);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(1 + t % 9), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = val(rng);
      b[i] = val(rng);
    }
    EXPECT_EQ(Rmse(a, b), Rmse(b, a));
    EXPECT_GE(Rmse(a, b), 0.0);
    EXPECT_EQ(Rmse(a, b) == 0.0, a == b);
  }
}

TEST(Tiers, RoundingAndMembership) {
  EXPECT_EQ(RoundHalfUp(2.5), 3);
  EXPECT_EQ(RoundHalfUp(2.49), 2);
  EXPECT_EQ(RoundHalfUp(0.5), 1);
  EXPECT_TRUE(InTier(5, Tier::kTop1));
  EXPECT_FALSE(InTier(4, Tier::kTop1));
  EXPECT_TRUE(InTier(3, Tier::kTop3));
  EXPECT_FALSE(InTier(2, Tier::kTop3));
  EXPECT_TRUE(InTier(1, Tier::kTop3, 3));
}

TEST(TopKPrf, Examples) {
  const std::vector<int> g = {5, 3, 0, 1}, same = g;
  for (Tier t : {Tier::kTop1, Tier::kTop3}) {
    const Prf p = TopKPrf(same, g, t);
    EXPECT_EQ(p.precision, 1.0);
    EXPECT_EQ(p.recall, 1.0);
    EXPECT_EQ(p.f1, 1.0);
  }
  const std::vector<int> pred = {5, 5}, gold = {5, 3};
  const Prf p = TopKPrf(pred, gold, Tier::kTop1);
  EXPECT_DOUBLE_EQ(p.precision, 0.5);
  EXPECT_DOUBLE_EQ(p.recall, 1.0);
  EXPECT_DOUBLE_EQ(p.f1, 2.0 / 3.0);
}

TEST(TopKPrf, GoldZeroEntityIsIgnored) {
  const std::vector<int> pred = {5, 2}, gold = {5, 4};
  const std::vector<int> pred_x = {5, 2, 5}, gold_x = {5, 4, 0};
  const Prf a = TopKPrf(pred, gold, Tier::kTop1), b = TopKPrf(pred_x, gold_x, Tier::kTop1);
  EXPECT_EQ(a.precision, b.precision);
  EXPECT_EQ(a.recall, b.recall);
  EXPECT_EQ(a.f1, b.f1);
}

TEST(TopKPrf, EmptySets) {
  const std::vector<int> none = {1, 2}, gold = {5, 1};
  EXPECT_EQ(TopKPrf(none, gold, Tier::kTop1).f1, 0.0);
  EXPECT_EQ(TopKPrf(none, gold, Tier::kTop1).precision, 0.0);
  const std::vector<int> gold_none = {1, 2};
  const Prf both = TopKPrf(none, gold_none, Tier::kTop1);
  EXPECT_EQ(both.precision, 1.0);
  EXPECT_EQ(both.recall, 1.0);
  EXPECT_EQ(both.f1, 1.0);
}

TEST(TopKPrfProperty, MatchesSetOracleAndIgnoresGoldZeroInsertions) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> val(0, 5), len(1, 15), extra(1, 5);
  for (int t = 0; t < 300; ++t) {
    std::vector<int> pred(len(rng)), gold(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      pred[i] = val(rng);
      gold[i] = val(rng);
    }
    for (auto [tier, lo] : {std::pair{Tier::kTop1, 5}, std::pair{Tier::kTop3, 3}}) {
      const Prf got = TopKPrf(pred, gold, tier);
      const auto want = testing::OracleTopK(pred, gold, lo, 5);
      EXPECT_NEAR(got.precision, want.p, 1e-12);
      EXPECT_NEAR(got.recall, want.r, 1e-12);
      EXPECT_NEAR(got.f1, want.f, 1e-12);

      auto p2 = pred, g2 = gold;
      for (int k = extra(rng); k > 0; --k) {
        std::uniform_int_distribution<std::size_t> at(0, p2.size());
        const std::size_t i = at(rng);
        p2.insert(p2.begin() + static_cast<long>(i), val(rng));
        g2.insert(g2.begin() + static_cast<long>(i), 0);
      }
      const Prf again = TopKPrf(p2, g2, tier);
      EXPECT_EQ(again.precision, got.precision);
      EXPECT_EQ(again.recall, got.recall);
      EXPECT_EQ(again.f1, got.f1);
    }
  }
}

AlignmentRecord Rec(int i, bool label) {
  return {"d", "e" + std::to_string(i), "s1", Method::kString, label, std::nullopt};
}

TEST(AlignmentPrf, TwoFalsePositivesOneFalseNegativeOfTwenty) {
  // 20 decisions: tp 5, fp 2, fn 1, tn 12.
  std::vector<AlignmentRecord> pred, gold;
  for (int i = 0; i < 20; ++i) {
    const bool g = i < 6;
    const bool p = (i < 5) || i == 10 || i == 11;
    gold.push_back(Rec(i, g));
    pred.push_back(Rec(i, p));
  }
  const AlignmentScores s = AlignmentPrf(pred, gold);
  EXPECT_EQ(s.tp, 5);
  EXPECT_EQ(s.fp, 2);
  EXPECT_EQ(s.fn, 1);
  EXPECT_EQ(s.tn, 12);
  EXPECT_NEAR(s.positive.precision, 5.0 / 7, 1e-15);
  EXPECT_NEAR(s.positive.recall, 5.0 / 6, 1e-15);
  const double pos_f = 2 * (5.0 / 7) * (5.0 / 6) / (5.0 / 7 + 5.0 / 6);
  EXPECT_NEAR(s.positive.f1, pos_f, 1e-15);
  const double neg_p = 12.0 / 13, neg_r = 12.0 / 14;
  const double neg_f = 2 * neg_p * neg_r / (neg_p + neg_r);
  EXPECT_NEAR(s.macro.precision, (5.0 / 7 + neg_p) / 2, 1e-15);
  EXPECT_NEAR(s.macro.recall, (5.0 / 6 + neg_r) / 2, 1e-15);
  EXPECT_NEAR(s.macro.f1, (pos_f + neg_f) / 2, 1e-15);
  EXPECT_NEAR(s.micro.precision, 17.0 / 20, 1e-15);
  EXPECT_NEAR(s.micro.recall, 17.0 / 20, 1e-15);
  EXPECT_NEAR(s.micro.f1, 17.0 / 20, 1e-15);
}

TEST(AlignmentPrf, PerfectAndAllNegative) {
  std::vector<AlignmentRecord> gold, neg;
  for (int i = 0; i < 6; ++i) {
    gold.push_back(Rec(i, i % 2 == 0));
    neg.push_back(Rec(i, false));
  }
  const AlignmentScores perfect = AlignmentPrf(gold, gold);
  EXPECT_EQ(perfect.micro.f1, 1.0);
  EXPECT_EQ(perfect.macro.f1, 1.0);
  EXPECT_EQ(perfect.positive.f1, 1.0);
  EXPECT_EQ(AlignmentPrf(neg, gold).positive.recall, 0.0);
}

TEST(AlignmentPrf, KeyMismatchIsAnError) {
  std::vector<AlignmentRecord> a = {Rec(1, true)}, b = {Rec(2, true)};
  EXPECT_THROW(AlignmentPrf(a, b), Error);
}

TEST(Percentile, LinearInterpolation) {
  EXPECT_DOUBLE_EQ(Percentile(D({4, 1, 3, 2}), 0.5), 2.5);
  EXPECT_DOUBLE_EQ(Percentile(D({4, 1, 3, 2}), 0.025), 1.075);
  EXPECT_DOUBLE_EQ(Percentile(D({4, 1, 3, 2}), 1.0), 4.0);
}

kernels::ResampleMetric MeanOf(std::vector<double> values) {
  return [values](std::span<const std::size_t> idx) -> std::optional<double> {
    double s = 0;
    for (std::size_t i : idx) s += values[i];
    return s / static_cast<double>(idx.size());
  };
}

TEST(Bootstrap, ConstantDataGivesZeroWidth) {
  const Interval ci = BootstrapCi(MeanOf(std::vector<double>(8, 2.5)), 8, 500, 1);
  EXPECT_EQ(ci.low, 2.5);
  EXPECT_EQ(ci.high, 2.5);
}

TEST(Bootstrap, SeededAndContainsPoint) {
  std::vector<double> v;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(1.0, 2.0);
  for (int i = 0; i < 40; ++i) v.push_back(g(rng));
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / 40;
  const Interval a = BootstrapCi(MeanOf(v), 40, 2000, 1);
  const Interval a2 = BootstrapCi(MeanOf(v), 40, 2000, 1);
  const Interval b = BootstrapCi(MeanOf(v), 40, 2000, 2);
  EXPECT_EQ(a.low, a2.low);
  EXPECT_EQ(a.high, a2.high);
  EXPECT_TRUE(a.low != b.low || a.high != b.high);
  EXPECT_LT(std::max(a.low, b.low), std::min(a.high, b.high));
  EXPECT_LE(a.low, mean);
  EXPECT_GE(a.high, mean);
}

TEST(Bootstrap, RedrawsUndefinedSamplesThenFails) {
  kernels::ResampleMetric never = [](std::span<const std::size_t>) -> std::optional<double> {
    return std::nullopt;
  };
  EXPECT_THROW(BootstrapCi(never, 5, 10, 1), Error);
  // Undefined unless item 0 is drawn: redraws recover.
  kernels::ResampleMetric sometimes = [](std::span<const std::size_t> idx) -> std::optional<double> {
    for (std::size_t i : idx) {
      if (i == 0) return 1.0;
    }
    return std::nullopt;
  };
  EXPECT_NO_THROW(BootstrapCi(sometimes, 3, 200, 1));
}

TEST(Wilcoxon, Examples) {
  const WilcoxonResult a = WilcoxonSignedRank(D({1, 2, 3}));
  EXPECT_EQ(a.statistic, 6.0);
  EXPECT_DOUBLE_EQ(a.p_value, 0.25);
  EXPECT_TRUE(a.exact);
  EXPECT_EQ(a.n_pairs, 3);
  EXPECT_DOUBLE_EQ(WilcoxonSignedRank(D({1, -1})).p_value, 1.0);
  EXPECT_EQ(WilcoxonSignedRank(D({0, 0, 1, 2, 3})).n_pairs, 3);
  EXPECT_THROW(WilcoxonSignedRank(D({0, 0})), Error);
}

TEST(WilcoxonProperty, ExactMatchesEnumerationOracle) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> len(1, 12), val(-4, 4);
  for (int t = 0; t < 300; ++t) {
    std::vector<double> d(len(rng));
    for (double &x : d) x = val(rng);
    if (std::all_of(d.begin(), d.end(), [](double x) { return x == 0; })) d[0] = 1;
    const WilcoxonResult got = WilcoxonSignedRank(d);
    const auto want = testing::OracleWilcoxonExact(d);
    EXPECT_TRUE(got.exact);
    EXPECT_DOUBLE_EQ(got.statistic, want.w_plus);
    EXPECT_DOUBLE_EQ(got.p_value, want.p_value);
  }
}

TEST(WilcoxonProperty, ApproximationIsBoundedAndMonotone) {
  // 25 distinct magnitudes; negating the k smallest moves W+ toward its mean.
  const int n = 25;
  const double mean = n * (n + 1) / 4.0;
  double last_dev = 1e9, last_p = -1;
  for (int k = 0; k <= 17; ++k) {
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i) d[i] = (i < k ? -1.0 : 1.0) * (i + 1);
    const WilcoxonResult r = WilcoxonSignedRank(d);
    EXPECT_FALSE(r.exact);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
    const double dev = std::abs(r.statistic - mean);
    ASSERT_LT(dev, last_dev);
    EXPECT_GE(r.p_value, last_p);
    last_dev = dev;
    last_p = r.p_value;
  }
}

EntityRow Row(std::string genre, std::string type, int gold, int pred, bool first) {
  static int k = 0;
  return {"doc", "e" + std::to_string(k++), std::move(genre), std::move(type), gold, pred, first};
}

TEST(Breakdowns, TwelveRowHandTally) {
  const std::vector<EntityRow> rows = {
      Row("news", "person", 5, 5, true),  Row("news", "person", 4, 2, true),
      Row("news", "place", 0, 4, true),   Row("news", "place", 2, 3, false),
      Row("news", "object", 1, 1, false), Row("news", "person", 3, 3, true),
      Row("bio", "person", 5, 4, false),  Row("bio", "person", 2, 4, true),
      Row("bio", "place", 3, 1, false),   Row("bio", "object", 1, 3, true),
      Row("bio", "object", 0, 0, false),  Row("bio", "person", 4, 5, true),
  };
  const Breakdowns b = ComputeBreakdowns(rows);
  EXPECT_EQ(b.first_half.fp, 2);
  EXPECT_EQ(b.first_half.fn, 1);
  EXPECT_EQ(b.second_half.fp, 1);
  EXPECT_EQ(b.second_half.fn, 1);
  ASSERT_EQ(b.confusion.size(), 6u);
  for (int g = 0; g <= 5; ++g) {
    EXPECT_EQ(std::accumulate(b.confusion[g].begin(), b.confusion[g].end(), 0L), 2) << g;
  }
  EXPECT_EQ(b.confusion[0][4], 1);
  EXPECT_EQ(b.confusion[4][2], 1);
  EXPECT_EQ(b.confusion[5][5], 1);
  EXPECT_EQ(b.per_type.at("person").entities, 6);
  EXPECT_EQ(b.per_type.at("place").entities, 3);
  EXPECT_EQ(b.per_type.at("object").entities, 3);
  EXPECT_DOUBLE_EQ(b.per_type.at("person").top3.precision, 0.8);
  EXPECT_DOUBLE_EQ(b.per_type.at("person").top3.recall, 0.8);
  EXPECT_EQ(b.per_genre.at("news").entities, 6);
  EXPECT_NEAR(b.per_genre.at("news").rmse, std::sqrt(21.0 / 6), 1e-12);
  EXPECT_NEAR(b.per_genre.at("bio").rmse, std::sqrt(14.0 / 6), 1e-12);
}

TEST(Breakdowns, AllCorrectIsDiagonal) {
  std::vector<EntityRow> rows;
  for (int s = 0; s <= 5; ++s) rows.push_back(Row("news", "person", s, s, s % 2 == 0));
  const Breakdowns b = ComputeBreakdowns(rows);
  for (int g = 0; g <= 5; ++g) {
    for (int p = 0; p <= 5; ++p) EXPECT_EQ(b.confusion[g][p], g == p ? 1 : 0);
  }
}

TEST(Breakdowns, SentenceThreeOfTenIsFirstHalf) {
  const Document d = testing::MakePositionDocument(10, {3, 5});
  ASSERT_EQ(d.sentence_count, 10);
  EXPECT_LT(d.FirstMentionSentence(d.entities[0]) * 2, d.sentence_count);
  EXPECT_FALSE(d.FirstMentionSentence(d.entities[1]) * 2 < d.sentence_count);
}

std::vector<EntityRow> DocRows(int docs, std::mt19937_64 &rng, bool copy_gold) {
  std::uniform_int_distribution<int> val(0, 5);
  std::vector<EntityRow> rows;
  for (int d = 0; d < docs; ++d) {
    for (int e = 0; e < 6; ++e) {
      EntityRow r{"doc" + std::to_string(d), "e" + std::to_string(e), "news", "person", e % 6, 0,
                  e < 3};
      r.pred = copy_gold ? r.gold : val(rng);
      rows.push_back(r);
    }
  }
  return rows;
}

TEST(Evaluate, PerfectPredictions) {
  std::mt19937_64 rng(7);
  const auto rows = DocRows(4, rng, true);
  EvalOptions opt;
  opt.resamples = 200;
  const EvalReport r = Evaluate(rows, opt);
  ASSERT_TRUE(r.spearman.has_value());
  EXPECT_DOUBLE_EQ(r.spearman->value, 1.0);
  EXPECT_EQ(r.rmse.value, 0.0);
  EXPECT_EQ(r.top1.f1, 1.0);
  EXPECT_EQ(r.top3.f1, 1.0);
  EXPECT_EQ(r.entities, 24);
  EXPECT_EQ(r.documents, 4);
}

TEST(Evaluate, IntervalsContainPointsAndReportIsDeterministic) {
  std::mt19937_64 rng(8);
  const auto rows = DocRows(6, rng, false);
  std::mt19937_64 rng2(9);
  const auto base = DocRows(6, rng2, false);
  EvalOptions opt;
  opt.resamples = 500;
  opt.seed = 3;
  const EvalReport r = Evaluate(rows, opt, base);
  ASSERT_TRUE(r.spearman.has_value());
  EXPECT_LE(r.spearman->ci.low, r.spearman->value);
  EXPECT_GE(r.spearman->ci.high, r.spearman->value);
  EXPECT_LE(r.rmse.ci.low, r.rmse.value);
  EXPECT_GE(r.rmse.ci.high, r.rmse.value);
  ASSERT_TRUE(r.wilcoxon.has_value());
  EXPECT_EQ(r.ToJson(), Evaluate(rows, opt, base).ToJson());
  const auto j = nlohmann::json::parse(r.ToJson());
  EXPECT_TRUE(j.contains("spearman"));
  EXPECT_TRUE(j.contains("wilcoxon"));
}

TEST(Evaluate, SalientOnlyDropsGoldZero) {
  std::mt19937_64 rng(10);
  const auto rows = DocRows(3, rng, false);
  EvalOptions opt;
  opt.resamples = 100;
  opt.salient_only = true;
  std::vector<double> p, g;
  for (const auto &r : rows) {
    if (r.gold >= 1) {
      p.push_back(r.pred);
      g.push_back(r.gold);
    }
  }
  EXPECT_EQ(Evaluate(rows, opt).rmse.value, Rmse(p, g));
}

}  // namespace
}  // namespace sage
