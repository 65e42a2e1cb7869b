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

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sage/alignment.h"
#include "sage/corpus.h"
#include "sage/kernels.h"

namespace sage {

// Ordered feature layout: the three aligner labels, one-hot entity type,
// one-hot genre, and scaled position.
class FeatureSchema {
 public:
  explicit FeatureSchema(const CorpusSchema &corpus_schema);
  explicit FeatureSchema(std::vector<std::string> names);

  const std::vector<std::string> &names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  const std::string &fingerprint() const { return fingerprint_; }
  const std::vector<std::string> &types() const { return types_; }
  const std::vector<std::string> &genres() const { return genres_; }

 private:
  void Index();

  std::vector<std::string> names_;
  std::vector<std::string> types_;
  std::vector<std::string> genres_;
  std::string fingerprint_;
};

struct FeatureVector {
  bool string_label = false;
  bool coref_label = false;
  bool llm_label = false;
  int type_index = 0;
  int genre_index = 0;
  double position_scaled = 1.0;  // position / entity count, in (0, 1]

  std::vector<double> Dense(const FeatureSchema &schema) const;
};

// `labels` must hold string, coref and llm judgments for the pair.
FeatureVector ExtractFeatures(const Entity &entity, const Document &doc,
                              const std::map<Method, bool> &labels,
                              const FeatureSchema &schema);

struct Hyperparameters {
  double learning_rate = 0.1;
  double l2_lambda = 1e-3;
  int max_iters = 5000;
  double tolerance = 1e-8;
  std::uint64_t seed = 0;
};

struct LogRegModel {
  std::vector<double> weights;
  double bias = 0.0;
  double l2_lambda = 0.0;
  double threshold = 0.5;
  std::vector<std::string> schema;
  std::string fingerprint;

  std::string ToJson() const;
  static LogRegModel FromJson(std::string_view text);
  void Save(const std::filesystem::path &path) const;
  static LogRegModel Load(const std::filesystem::path &path);
};

// An untrained (all-zero) model for `schema`.
LogRegModel ZeroModel(const FeatureSchema &schema, double l2_lambda = 0.0);

struct TrainResult {
  LogRegModel model;
  int iterations = 0;
  bool converged = false;
  double final_loss = 0.0;
  std::vector<double> loss_history;  // loss before each update
};

// Full-batch gradient descent from zero weights on the regularized mean
// negative log-likelihood.  Stops when the gradient max-norm drops below
// the tolerance or after max_iters updates.
TrainResult Train(const kernels::DesignMatrix &data, const FeatureSchema &schema,
                  const Hyperparameters &hp);
// Same, without a feature schema; the model carries no schema or fingerprint.
TrainResult Train(const kernels::DesignMatrix &data, const Hyperparameters &hp);

kernels::LossGradient NllAndGradient(const LogRegModel &model,
                                     const kernels::DesignMatrix &data);

// sigmoid(w.x + b) for a dense row.
double PredictProbability(const LogRegModel &model, std::span<const double> x);
bool PredictLabel(const LogRegModel &model, std::span<const double> x);
// Checks the model was trained on `schema`.
void CheckSchema(const LogRegModel &model, const FeatureSchema &schema);

// Ensemble records for one (document, summary), from the three aligners'
// records of that pair.
std::vector<AlignmentRecord> AlignEnsemble(
    const Document &doc, const Summary &summary,
    std::span<const AlignmentRecord> method_records, const LogRegModel &model,
    const FeatureSchema &schema);

}  // namespace sage
