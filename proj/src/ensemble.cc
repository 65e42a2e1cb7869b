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

#include "sage/ensemble.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sage/error.h"
#include "sage/hash.h"
#include "sage/text.h"

namespace sage {

FeatureSchema::FeatureSchema(const CorpusSchema &corpus_schema) {
  names_ = {"string", "coref", "llm"};
  for (const std::string &t : corpus_schema.entity_types) names_.push_back("type=" + t);
  for (const std::string &g : corpus_schema.genres) names_.push_back("genre=" + g);
  names_.push_back("position");
  Index();
}

FeatureSchema::FeatureSchema(std::vector<std::string> names) : names_(std::move(names)) {
  Index();
}

void FeatureSchema::Index() {
  if (names_.size() < 4 || names_[0] != "string" || names_[1] != "coref" ||
      names_[2] != "llm" || names_.back() != "position") {
    throw ConfigError("feature schema must be string, coref, llm, ..., position");
  }
  for (std::size_t i = 3; i + 1 < names_.size(); ++i) {
    if (names_[i].starts_with("type=")) {
      if (!genres_.empty()) throw ConfigError("type features must precede genre features");
      types_.push_back(names_[i].substr(5));
    } else if (names_[i].starts_with("genre=")) {
      genres_.push_back(names_[i].substr(6));
    } else {
      throw ConfigError("unexpected feature " + names_[i]);
    }
  }
  if (types_.empty() || genres_.empty()) throw ConfigError("feature schema lacks type or genre block");
  fingerprint_ = Sha256Hex(Join(names_, "\n")).substr(0, 16);
}

std::vector<double> FeatureVector::Dense(const FeatureSchema &schema) const {
  std::vector<double> x(schema.size(), 0.0);
  x[0] = string_label;
  x[1] = coref_label;
  x[2] = llm_label;
  x[3 + type_index] = 1.0;
  x[3 + schema.types().size() + genre_index] = 1.0;
  x.back() = position_scaled;
  return x;
}

FeatureVector ExtractFeatures(const Entity &entity, const Document &doc,
                              const std::map<Method, bool> &labels,
                              const FeatureSchema &schema) {
  FeatureVector fv;
  auto label = [&labels](Method m) {
    auto it = labels.find(m);
    if (it == labels.end()) {
      throw DataError("missing " + std::string(MethodName(m)) + " alignment label");
    }
    return it->second;
  };
  fv.string_label = label(Method::kString);
  fv.coref_label = label(Method::kCoref);
  fv.llm_label = label(Method::kLlm);
  const auto &types = schema.types();
  const auto &genres = schema.genres();
  auto t = std::find(types.begin(), types.end(), entity.type);
  if (t == types.end()) throw DataError("entity type '" + entity.type + "' not in feature schema");
  auto g = std::find(genres.begin(), genres.end(), doc.genre);
  if (g == genres.end()) throw DataError("genre '" + doc.genre + "' not in feature schema");
  fv.type_index = static_cast<int>(t - types.begin());
  fv.genre_index = static_cast<int>(g - genres.begin());
  if (doc.entities.empty() || entity.position < 1 ||
      entity.position > static_cast<int>(doc.entities.size())) {
    throw DataError("entity " + entity.id + " has position outside its document");
  }
  fv.position_scaled = static_cast<double>(entity.position) /
                       static_cast<double>(doc.entities.size());
  return fv;
}

LogRegModel ZeroModel(const FeatureSchema &schema, double l2_lambda) {
  LogRegModel m;
  m.weights.assign(schema.size(), 0.0);
  m.l2_lambda = l2_lambda;
  m.schema = schema.names();
  m.fingerprint = schema.fingerprint();
  return m;
}

kernels::LossGradient NllAndGradient(const LogRegModel &model,
                                     const kernels::DesignMatrix &data) {
  return kernels::parallel::NllGradient(data, model.weights, model.bias, model.l2_lambda);
}

TrainResult Train(const kernels::DesignMatrix &data, const Hyperparameters &hp) {
  if (data.rows == 0) throw DataError("train: no examples");
  if (hp.l2_lambda < 0) throw ConfigError("train: l2_lambda must be >= 0");
  if (!(hp.learning_rate > 0)) throw ConfigError("train: learning_rate must be > 0");
  if (hp.max_iters < 0) throw ConfigError("train: max_iters must be >= 0");
  bool has_pos = false, has_neg = false;
  for (double y : data.targets) (y > 0.5 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw DataError("train: examples contain a single class");

  TrainResult result;
  LogRegModel &m = result.model;
  m.weights.assign(data.cols, 0.0);
  m.l2_lambda = hp.l2_lambda;
  for (int it = 0;; ++it) {
    kernels::LossGradient lg = NllAndGradient(m, data);
    if (!std::isfinite(lg.loss)) throw DataError("train: non-finite loss");
    result.final_loss = lg.loss;
    if (lg.MaxNorm() < hp.tolerance) {
      result.converged = true;
      break;
    }
    if (it >= hp.max_iters) break;
    result.loss_history.push_back(lg.loss);
    for (std::size_t j = 0; j < m.weights.size(); ++j) {
      m.weights[j] -= hp.learning_rate * lg.weight_grad[j];
    }
    m.bias -= hp.learning_rate * lg.bias_grad;
    result.iterations = it + 1;
  }
  return result;
}

TrainResult Train(const kernels::DesignMatrix &data, const FeatureSchema &schema,
                  const Hyperparameters &hp) {
  if (data.cols != schema.size()) throw InternalError("train: feature width does not match schema");
  TrainResult result = Train(data, hp);
  result.model.schema = schema.names();
  result.model.fingerprint = schema.fingerprint();
  return result;
}

void CheckSchema(const LogRegModel &model, const FeatureSchema &schema) {
  if (model.fingerprint != schema.fingerprint()) {
    throw DataError("model schema fingerprint " + model.fingerprint +
                    " does not match feature schema " + schema.fingerprint());
  }
}

double PredictProbability(const LogRegModel &model, std::span<const double> x) {
  if (x.size() != model.weights.size()) {
    throw DataError("feature vector width " + std::to_string(x.size()) +
                    " does not match model width " + std::to_string(model.weights.size()));
  }
  double z = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += model.weights[j] * x[j];
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

bool PredictLabel(const LogRegModel &model, std::span<const double> x) {
  return PredictProbability(model, x) >= model.threshold;
}

std::string LogRegModel::ToJson() const {
  nlohmann::ordered_json j;
  j["weights"] = weights;
  j["bias"] = bias;
  j["l2_lambda"] = l2_lambda;
  j["threshold"] = threshold;
  j["schema"] = schema;
  j["fingerprint"] = fingerprint;
  return j.dump(1) + "\n";
}

LogRegModel LogRegModel::FromJson(std::string_view text) {
  try {
    auto j = nlohmann::json::parse(text);
    LogRegModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.l2_lambda = j.at("l2_lambda").get<double>();
    m.threshold = j.at("threshold").get<double>();
    m.schema = j.at("schema").get<std::vector<std::string>>();
    m.fingerprint = j.at("fingerprint").get<std::string>();
    if (m.weights.size() != m.schema.size()) throw DataError("model weight dimension does not match schema");
    if (FeatureSchema(m.schema).fingerprint() != m.fingerprint) {
      throw DataError("model fingerprint does not match its schema");
    }
    if (m.l2_lambda < 0) throw DataError("model l2_lambda is negative");
    return m;
  } catch (const nlohmann::json::exception &e) {
    throw DataError(std::string("malformed model file: ") + e.what());
  }
}

void LogRegModel::Save(const std::filesystem::path &path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << ToJson();
}

LogRegModel LogRegModel::Load(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read model " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return FromJson(buffer.str());
}

std::vector<AlignmentRecord> AlignEnsemble(
    const Document &doc, const Summary &summary,
    std::span<const AlignmentRecord> method_records, const LogRegModel &model,
    const FeatureSchema &schema) {
  CheckSchema(model, schema);
  std::map<std::string, std::map<Method, bool>> labels;
  for (const AlignmentRecord &r : method_records) {
    if (r.document_id != doc.id || r.summary_id != summary.id) continue;
    labels[r.entity_id][r.method] = r.label;
  }
  std::vector<AlignmentRecord> out;
  out.reserve(doc.entities.size());
  for (const Entity &e : doc.entities) {
    FeatureVector fv;
    try {
      fv = ExtractFeatures(e, doc, labels[e.id], schema);
    } catch (const Error &err) {
      throw DataError("document " + doc.id + ", entity " + e.id + ", summary " +
                      summary.id + ": " + err.what());
    }
    const double p = PredictProbability(model, fv.Dense(schema));
    out.push_back({doc.id, e.id, summary.id, Method::kEnsemble, p >= model.threshold, p});
  }
  return out;
}

}  // namespace sage
