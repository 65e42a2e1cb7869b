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

#include "sage/sumqual.h"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "sage/error.h"
#include "sage/hash.h"
#include "sage/text.h"

namespace sage {

std::vector<std::string> MetricTokens(std::string_view text) {
  std::vector<std::string> out;
  for (const std::string &w : SplitWords(text)) out.push_back(Lowercase(w));
  return out;
}

NgramProfile::NgramProfile(std::span<const std::string> tokens, int n) : n_(n) {
  if (n < 1) throw ConfigError("n-gram order must be >= 1");
  const auto k = static_cast<std::size_t>(n);
  for (std::size_t i = 0; i + k <= tokens.size(); ++i) {
    ++counts_[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + k)];
    ++total_;
  }
}

std::size_t NgramProfile::ClippedOverlap(const NgramProfile &other) const {
  std::size_t overlap = 0;
  for (const auto &[gram, count] : counts_) {
    auto it = other.counts_.find(gram);
    if (it != other.counts_.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

namespace {

Prf3 FromCounts(double overlap, double cand_total, double ref_total) {
  Prf3 r;
  r.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  r.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  const double s = r.precision + r.recall;
  r.f1 = s > 0 ? 2.0 * r.precision * r.recall / s : 0.0;
  return r;
}

}  // namespace

Prf3 RougeN(std::string_view candidate, std::string_view reference, int n) {
  const auto c = MetricTokens(candidate);
  const auto r = MetricTokens(reference);
  const NgramProfile pc(c, n);
  const NgramProfile pr(r, n);
  return FromCounts(static_cast<double>(pc.ClippedOverlap(pr)), static_cast<double>(pc.total()),
                    static_cast<double>(pr.total()));
}

std::size_t LcsLength(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

Prf3 RougeL(std::string_view candidate, std::string_view reference) {
  const auto c = MetricTokens(candidate);
  const auto r = MetricTokens(reference);
  return FromCounts(static_cast<double>(LcsLength(c, r)), static_cast<double>(c.size()),
                    static_cast<double>(r.size()));
}

double Bleu(std::string_view candidate, std::string_view reference) {
  const auto c = MetricTokens(candidate);
  const auto r = MetricTokens(reference);
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    const NgramProfile pc(c, n);
    const NgramProfile pr(r, n);
    double matched = static_cast<double>(pc.ClippedOverlap(pr));
    double total = static_cast<double>(pc.total());
    if (n > 1) {
      matched += 1.0;
      total += 1.0;
    }
    if (matched == 0.0) return 0.0;
    log_sum += std::log(matched / total) / 4.0;
  }
  const double cl = static_cast<double>(c.size());
  const double rl = static_cast<double>(r.size());
  const double bp = cl > rl ? 1.0 : std::exp(1.0 - rl / cl);
  return bp * std::exp(log_sum);
}

double SelfBleu(std::span<const std::string> texts) {
  if (texts.size() < 2) throw DataError("self-BLEU needs at least two texts");
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    for (std::size_t j = 0; j < texts.size(); ++j) {
      if (i == j) continue;
      sum += Bleu(texts[i], texts[j]);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

std::vector<std::vector<double>> TfidfEmbedder::Embed(std::span<const std::string> texts) {
  std::vector<std::vector<std::string>> docs;
  std::map<std::string, std::size_t> df;
  for (const std::string &t : texts) {
    docs.push_back(MetricTokens(t));
    std::vector<std::string> uniq = docs.back();
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const std::string &w : uniq) ++df[w];
  }
  vocabulary_.clear();
  std::map<std::string, std::size_t> column;
  for (const auto &[w, _] : df) {
    column[w] = vocabulary_.size();
    vocabulary_.push_back(w);
  }
  const double n = static_cast<double>(texts.size());
  std::vector<std::vector<double>> out;
  for (const auto &words : docs) {
    std::vector<double> v(vocabulary_.size(), 0.0);
    for (const std::string &w : words) v[column.at(w)] += 1.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double d = static_cast<double>(df.at(vocabulary_[k]));
      v[k] *= std::log((1.0 + n) / (1.0 + d)) + 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::vector<double>> RemoteEmbedder::Embed(std::span<const std::string> texts) {
  nlohmann::ordered_json req;
  req["texts"] = std::vector<std::string>(texts.begin(), texts.end());
  const std::string body = req.dump();
  const std::string key = Sha256Hex(gateway_.Endpoint() + "\n" + body);
  const std::string raw = gateway_.Call(key, "embedding", body, [](std::string_view b) {
    try {
      return nlohmann::json::parse(b).at("vectors").dump();
    } catch (const nlohmann::json::exception &e) {
      throw ServiceError(std::string("malformed embedding response: ") + e.what());
    }
  });
  std::vector<std::vector<double>> vectors;
  try {
    vectors = nlohmann::json::parse(raw).get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception &e) {
    throw ServiceError(std::string("malformed embedding vectors: ") + e.what());
  }
  if (vectors.size() != texts.size()) {
    throw ServiceError("embedding endpoint returned " + std::to_string(vectors.size()) +
                       " vectors for " + std::to_string(texts.size()) + " texts");
  }
  for (const auto &v : vectors) {
    if (v.size() != vectors.front().size()) {
      throw ServiceError("embedding endpoint returned vectors of differing dimension");
    }
  }
  return vectors;
}

double Cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InternalError("cosine of vectors with different dimension");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return std::nan("");
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

SimilarityResult PairwiseSimilarity(std::span<const std::string> texts, Embedder &embedder) {
  if (texts.size() < 2) throw DataError("pairwise similarity needs at least two texts");
  const auto vectors = embedder.Embed(texts);
  SimilarityResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = i + 1; j < vectors.size(); ++j) {
      const double c = Cosine(vectors[i], vectors[j]);
      if (std::isnan(c)) {
        ++r.skipped_pairs;
        continue;
      }
      sum += c;
      ++r.pairs;
    }
  }
  if (r.pairs == 0) throw DataError("every summary pair has a zero embedding");
  r.mean = sum / static_cast<double>(r.pairs);
  return r;
}

DocumentQuality AssessDocument(const Document &doc, Embedder &embedder) {
  DocumentQuality q;
  q.document_id = doc.id;
  std::vector<std::string> human, generated;
  for (const Summary &s : doc.summaries) {
    (s.IsGenerated() ? generated : human).push_back(s.text);
  }
  q.human = human.size();
  q.generated = generated.size();
  if (!human.empty() && !generated.empty()) {
    Prf3 r1, r2, rl;
    const double pairs = static_cast<double>(human.size() * generated.size());
    auto add = [pairs](Prf3 &acc, const Prf3 &x) {
      acc.precision += x.precision / pairs;
      acc.recall += x.recall / pairs;
      acc.f1 += x.f1 / pairs;
    };
    for (const std::string &g : generated) {
      for (const std::string &h : human) {
        add(r1, RougeN(g, h, 1));
        add(r2, RougeN(g, h, 2));
        add(rl, RougeL(g, h));
      }
    }
    q.rouge1 = r1;
    q.rouge2 = r2;
    q.rougel = rl;
  }
  auto group = [&embedder](const std::vector<std::string> &texts, std::optional<double> &bleu,
                           std::optional<SimilarityResult> &sim) {
    if (texts.size() < 2) return;
    bleu = SelfBleu(texts);
    try {
      sim = PairwiseSimilarity(texts, embedder);
    } catch (const Error &e) {
      if (e.kind() != ErrorKind::kData) throw;
    }
  };
  group(human, q.self_bleu_human, q.similarity_human);
  group(generated, q.self_bleu_generated, q.similarity_generated);
  return q;
}

}  // namespace sage
