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

#include <cmath>
#include <random>
#include <vector>

#include "sage/ensemble.h"
#include "sage/error.h"
#include "test_support.h"

namespace sage {
namespace {

using kernels::DesignMatrix;

double Accuracy(const LogRegModel &m, const DesignMatrix &data) {
  int correct = 0;
  for (std::size_t i = 0; i < data.rows; ++i) {
    correct += PredictLabel(m, data.Row(i)) == (data.targets[i] > 0.5);
  }
  return static_cast<double>(correct) / static_cast<double>(data.rows);
}

TEST(Gradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> dim(1, 8), rows(1, 30);
  std::uniform_real_distribution<double> l2(0.0, 0.1);
  std::bernoulli_distribution coin(0.5);
  for (int t = 0; t < 100; ++t) {
    DesignMatrix data;
    data.cols = static_cast<std::size_t>(dim(rng));
    std::vector<double> x(data.cols);
    for (int r = rows(rng); r > 0; --r) {
      for (double &v : x) v = g(rng);
      data.AddRow(x, coin(rng));
    }
    std::vector<double> w(data.cols);
    for (double &v : w) v = g(rng);
    EXPECT_LE(testing::GradientCheckError(data, w, g(rng), l2(rng)), 1e-5) << "case " << t;
  }
}

TEST(Gradient, SingleExampleZeroModelLossIsLn2) {
  DesignMatrix data;
  data.cols = 3;
  const double x[3] = {1, -2, 0.5};
  data.AddRow(x, true);
  LogRegModel m;
  m.weights.assign(3, 0.0);
  EXPECT_NEAR(NllAndGradient(m, data).loss, std::log(2.0), 1e-15);
}

TEST(Gradient, PerfectFitWithoutPenaltyIsStationary) {
  DesignMatrix data;
  data.cols = 1;
  for (double v : {-2.0, -1.0, 1.0, 2.0}) {
    const double x[1] = {v};
    data.AddRow(x, v > 0);
  }
  LogRegModel m;
  m.weights = {50.0};
  EXPECT_LT(NllAndGradient(m, data).MaxNorm(), 1e-8);
}

TEST(Train, SeparableFixtureReachesFullAccuracy) {
  const DesignMatrix data = testing::LoadSeparableFixture();
  ASSERT_EQ(data.rows, 60u);
  const TrainResult r = Train(data, Hyperparameters());
  EXPECT_LE(r.iterations, 5000);
  EXPECT_EQ(Accuracy(r.model, data), 1.0);
  // A held-out positive well inside the positive region.
  const double probe[2] = {1.5, -0.4};
  EXPECT_GT(PredictProbability(r.model, probe), 0.5);
}

TEST(Train, ZeroIterationsLeavesZeroModel) {
  Hyperparameters hp;
  hp.max_iters = 0;
  const DesignMatrix data = testing::LoadSeparableFixture();
  const TrainResult r = Train(data, hp);
  EXPECT_EQ(r.iterations, 0);
  for (double w : r.model.weights) EXPECT_EQ(w, 0.0);
  EXPECT_EQ(r.model.bias, 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) EXPECT_EQ(PredictProbability(r.model, data.Row(i)), 0.5);
}

TEST(Train, SmallLearningRateGivesMonotoneLoss) {
  Hyperparameters hp;
  hp.learning_rate = 0.01;
  hp.max_iters = 2000;
  const TrainResult r = Train(testing::LoadSeparableFixture(), hp);
  ASSERT_GT(r.loss_history.size(), 1u);
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) {
    ASSERT_LE(r.loss_history[i], r.loss_history[i - 1]) << "iteration " << i;
  }
}

TEST(Train, DuplicatedDatasetGivesSameLabels) {
  const DesignMatrix data = testing::LoadSeparableFixture();
  DesignMatrix twice;
  twice.cols = data.cols;
  for (int copy = 0; copy < 2; ++copy) {
    for (std::size_t i = 0; i < data.rows; ++i) twice.AddRow(data.Row(i), data.targets[i] > 0.5);
  }
  const LogRegModel a = Train(data, Hyperparameters()).model;
  const LogRegModel b = Train(twice, Hyperparameters()).model;
  for (std::size_t i = 0; i < data.rows; ++i) {
    EXPECT_EQ(PredictLabel(a, data.Row(i)), PredictLabel(b, data.Row(i)));
  }
}

TEST(Train, RejectsSingleClassAndBadHyperparameters) {
  DesignMatrix data;
  data.cols = 1;
  const double x[1] = {1};
  data.AddRow(x, true);
  data.AddRow(x, true);
  EXPECT_THROW(Train(data, Hyperparameters()), Error);
  data.AddRow(x, false);
  Hyperparameters hp;
  hp.learning_rate = 0;
  EXPECT_THROW(Train(data, hp), Error);
  EXPECT_THROW(Train(DesignMatrix{}, Hyperparameters()), Error);
}

TEST(Predict, TieResolvesPositive) {
  LogRegModel m;
  m.weights = {1.0, -1.0};
  m.bias = 0.0;
  const double x[2] = {2.0, 2.0};
  EXPECT_EQ(PredictProbability(m, x), 0.5);
  EXPECT_TRUE(PredictLabel(m, x));
}

TEST(Predict, LabelDependsOnlyOnLogitSign) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  LogRegModel m;
  m.weights = {0.7, -1.3, 0.2};
  m.bias = 0.1;
  m.threshold = 0.8;
  const double cut = std::log(0.8 / 0.2);
  for (int t = 0; t < 1000; ++t) {
    const double x[3] = {g(rng), g(rng), g(rng)};
    const double z = m.bias + 0.7 * x[0] - 1.3 * x[1] + 0.2 * x[2];
    if (std::abs(z - cut) < 1e-9) continue;
    EXPECT_EQ(PredictLabel(m, x), z > cut);
  }
}

Document FeatureDoc() {
  std::vector<testing::EntitySpec> ents;
  for (int i = 0; i < 10; ++i) ents.push_back({"e" + std::to_string(i), "person", {{i, i + 1}}, 1});
  return testing::MakeDocument("f", {"a b c d e f g h i j"}, ents, {"a"}, "news");
}

TEST(Features, AllTruePersonNewsFirstOfTen) {
  const CorpusSchema cs = CorpusSchema::Default();
  const FeatureSchema schema(cs);
  const Document d = FeatureDoc();
  const FeatureVector fv = ExtractFeatures(
      d.entities[0], d, {{Method::kString, true}, {Method::kCoref, true}, {Method::kLlm, true}},
      schema);
  std::vector<double> want(3 + cs.entity_types.size() + cs.genres.size() + 1, 0.0);
  want[0] = want[1] = want[2] = 1;
  want[3 + 5] = 1;                            // person
  want[3 + cs.entity_types.size() + 5] = 1;   // news
  want.back() = 0.1;
  EXPECT_EQ(fv.Dense(schema), want);
  EXPECT_EQ(schema.size(), 3u + 10 + 12 + 1);

  const FeatureVector off = ExtractFeatures(
      d.entities[9], d, {{Method::kString, false}, {Method::kCoref, false}, {Method::kLlm, false}},
      schema);
  const auto dense = off.Dense(schema);
  EXPECT_EQ(dense[0] + dense[1] + dense[2], 0.0);
  EXPECT_EQ(dense.back(), 1.0);
}

TEST(Features, ErrorsNameTheProblem) {
  const FeatureSchema schema{CorpusSchema::Default()};
  Document d = FeatureDoc();
  try {
    ExtractFeatures(d.entities[0], d, {{Method::kString, true}, {Method::kLlm, true}}, schema);
    FAIL();
  } catch (const Error &e) {
    EXPECT_NE(std::string(e.what()).find("coref"), std::string::npos);
  }
  d.genre = "poetry";
  EXPECT_THROW(ExtractFeatures(d.entities[0], d,
                               {{Method::kString, true}, {Method::kCoref, true}, {Method::kLlm, true}},
                               schema),
               Error);
}

TEST(Model, SaveLoadIsBitIdentical) {
  const FeatureSchema schema{CorpusSchema::Default()};
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<int> type(0, 9), genre(0, 11);
  std::uniform_real_distribution<double> pos(0.01, 1.0);
  DesignMatrix data;
  data.cols = schema.size();
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 80; ++i) {
    FeatureVector fv{coin(rng), coin(rng), coin(rng), type(rng), genre(rng), pos(rng)};
    rows.push_back(fv.Dense(schema));
    data.AddRow(rows.back(), fv.string_label && fv.llm_label);
  }
  Hyperparameters hp;
  hp.max_iters = 300;
  const LogRegModel m = Train(data, schema, hp).model;
  EXPECT_EQ(m.fingerprint, schema.fingerprint());
  const auto path = testing::MakeTempDir("model") / "m.json";
  m.Save(path);
  const LogRegModel back = LogRegModel::Load(path);
  EXPECT_EQ(back.weights, m.weights);
  EXPECT_EQ(back.bias, m.bias);
  EXPECT_EQ(back.ToJson(), m.ToJson());
  for (const auto &x : rows) EXPECT_EQ(PredictProbability(back, x), PredictProbability(m, x));
  EXPECT_NO_THROW(CheckSchema(back, schema));
}

TEST(Model, SchemaMismatchIsRejected) {
  CorpusSchema small = CorpusSchema::Default();
  small.genres.pop_back();
  const FeatureSchema full{CorpusSchema::Default()}, fewer{small};
  EXPECT_NE(full.fingerprint(), fewer.fingerprint());
  EXPECT_THROW(CheckSchema(ZeroModel(full), fewer), Error);
  EXPECT_THROW(LogRegModel::FromJson("{\"weights\": [1]}"), Error);
}

}  // namespace
}  // namespace sage
