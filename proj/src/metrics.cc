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

#include "sage/metrics.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "sage/error.h"
#include "sage/random.h"

namespace sage {
namespace {

void CheckPaired(std::span<const double> a, std::span<const double> b,
                 std::size_t min_len, const char *what) {
  if (a.size() != b.size()) {
    throw DataError(std::string(what) + ": length mismatch (" +
                    std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  }
  if (a.size() < min_len) {
    throw DataError(std::string(what) + ": needs at least " +
                    std::to_string(min_len) + " items");
  }
}

double Harmonic(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

std::optional<double> PearsonOfRanks(std::span<const double> pred,
                                     std::span<const double> gold) {
  const std::vector<double> rp = AverageRanks(pred);
  const std::vector<double> rg = AverageRanks(gold);
  const double n = static_cast<double>(rp.size());
  const double mp = std::accumulate(rp.begin(), rp.end(), 0.0) / n;
  const double mg = std::accumulate(rg.begin(), rg.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    const double dx = rp[i] - mp, dy = rg[i] - mg;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string Fixed(double v, int digits = 6) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

std::vector<double> AverageRanks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

double SpearmanRho(std::span<const double> pred, std::span<const double> gold) {
  CheckPaired(pred, gold, 2, "spearman");
  auto rho = PearsonOfRanks(pred, gold);
  if (!rho) throw DataError("spearman: undefined correlation (constant input)");
  return *rho;
}

std::optional<double> TrySpearmanRho(std::span<const double> pred,
                                     std::span<const double> gold) {
  CheckPaired(pred, gold, 0, "spearman");
  if (pred.size() < 2) return std::nullopt;
  return PearsonOfRanks(pred, gold);
}

double Rmse(std::span<const double> pred, std::span<const double> gold) {
  CheckPaired(pred, gold, 1, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gold[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(pred.size()));
}

bool InTier(int score, Tier tier, int n_summaries) {
  if (tier == Tier::kTop1) return score == n_summaries;
  return score >= n_summaries - 2 && score <= n_summaries && score >= 1;
}

int RoundHalfUp(double score) { return static_cast<int>(std::floor(score + 0.5)); }

Prf TopKPrf(std::span<const int> pred, std::span<const int> gold, Tier tier,
            int n_summaries) {
  if (pred.size() != gold.size()) throw DataError("topk: length mismatch");
  long predicted = 0, relevant = 0, hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 1) continue;
    const bool p = InTier(pred[i], tier, n_summaries);
    const bool g = InTier(gold[i], tier, n_summaries);
    predicted += p;
    relevant += g;
    hits += p && g;
  }
  if (predicted == 0) {
    if (relevant == 0) return {1.0, 1.0, 1.0};
    return {0.0, 0.0, 0.0};
  }
  Prf out;
  out.precision = static_cast<double>(hits) / predicted;
  out.recall = relevant > 0 ? static_cast<double>(hits) / relevant : 0.0;
  out.f1 = Harmonic(out.precision, out.recall);
  return out;
}

AlignmentScores AlignmentPrfFromCounts(long tp, long fp, long fn, long tn) {
  auto class_prf = [](long hit, long false_pos, long false_neg) {
    Prf p;
    const long predicted = hit + false_pos, relevant = hit + false_neg;
    if (predicted == 0 && relevant == 0) return Prf{1.0, 1.0, 1.0};
    p.precision = predicted > 0 ? static_cast<double>(hit) / predicted : 0.0;
    p.recall = relevant > 0 ? static_cast<double>(hit) / relevant : 0.0;
    p.f1 = Harmonic(p.precision, p.recall);
    return p;
  };
  AlignmentScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.tn = tn;
  s.positive = class_prf(tp, fp, fn);
  const Prf negative = class_prf(tn, fn, fp);
  s.macro = {(s.positive.precision + negative.precision) / 2,
             (s.positive.recall + negative.recall) / 2,
             (s.positive.f1 + negative.f1) / 2};
  // Pooling both classes: correct decisions are hits, errors count once as
  // a false positive and once as a false negative.
  s.micro = class_prf(tp + tn, fp + fn, fn + fp);
  return s;
}

AlignmentScores AlignmentPrf(std::span<const AlignmentRecord> pred,
                             std::span<const AlignmentRecord> gold) {
  using Key = std::tuple<std::string, std::string, std::string>;
  std::map<Key, bool> gold_labels;
  for (const AlignmentRecord &r : gold) {
    if (!gold_labels.emplace(Key{r.document_id, r.entity_id, r.summary_id}, r.label).second) {
      throw DataError("duplicate gold alignment " + r.document_id + "/" + r.entity_id + "/" + r.summary_id);
    }
  }
  if (pred.size() != gold_labels.size()) {
    throw DataError("alignment key mismatch: " + std::to_string(pred.size()) +
                    " predicted vs " + std::to_string(gold_labels.size()) + " gold");
  }
  long tp = 0, fp = 0, fn = 0, tn = 0;
  std::set<Key> seen;
  for (const AlignmentRecord &r : pred) {
    Key key{r.document_id, r.entity_id, r.summary_id};
    auto it = gold_labels.find(key);
    if (it == gold_labels.end() || !seen.insert(key).second) {
      throw DataError("alignment key mismatch at " + r.document_id + "/" +
                      r.entity_id + "/" + r.summary_id);
    }
    const bool g = it->second;
    if (r.label && g) ++tp;
    else if (r.label) ++fp;
    else if (g) ++fn;
    else ++tn;
  }
  return AlignmentPrfFromCounts(tp, fp, fn, tn);
}

double Percentile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("percentile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

Interval BootstrapCi(const kernels::ResampleMetric &metric, std::size_t n_items,
                     std::size_t resamples, std::uint64_t seed) {
  if (n_items < 2) throw DataError("bootstrap needs at least 2 items");
  if (resamples == 0) throw ConfigError("bootstrap needs at least one resample");
  std::vector<double> reps =
      kernels::parallel::BootstrapReplicates(metric, n_items, resamples, seed);
  return {Percentile(reps, 0.025), Percentile(std::move(reps), 0.975)};
}

WilcoxonResult WilcoxonSignedRank(std::span<const double> diffs) {
  std::vector<double> nonzero;
  for (double d : diffs) {
    if (d != 0.0) nonzero.push_back(d);
  }
  if (nonzero.empty()) throw DataError("wilcoxon: all differences are zero");
  std::vector<double> magnitudes(nonzero.size());
  for (std::size_t i = 0; i < nonzero.size(); ++i) magnitudes[i] = std::abs(nonzero[i]);
  const std::vector<double> ranks = AverageRanks(magnitudes);

  WilcoxonResult out;
  out.n_pairs = static_cast<int>(nonzero.size());
  std::vector<std::int64_t> doubled(ranks.size());
  std::int64_t total = 0, positive = 0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    doubled[i] = std::llround(2.0 * ranks[i]);
    total += doubled[i];
    if (nonzero[i] > 0) positive += doubled[i];
  }
  out.statistic = static_cast<double>(positive) / 2.0;

  const int n = out.n_pairs;
  if (n <= kWilcoxonExactLimit) {
    const std::int64_t observed = std::llabs(2 * positive - total);
    const std::uint64_t count = kernels::parallel::CountExtremeSignings(doubled, observed);
    out.p_value = static_cast<double>(count) / std::ldexp(1.0, n);
    out.exact = true;
    return out;
  }

  // Normal approximation with tie and continuity corrections.
  const double nn = n;
  const double mean = nn * (nn + 1) / 4.0;
  double tie_term = 0.0;
  std::map<double, long> groups;
  for (double m : magnitudes) groups[m] += 1;
  for (const auto &[_, t] : groups) {
    tie_term += static_cast<double>(t) * t * t - static_cast<double>(t);
  }
  const double variance = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  const double dev = std::max(0.0, std::abs(out.statistic - mean) - 0.5);
  const double z = variance > 0 ? dev / std::sqrt(variance) : 0.0;
  out.p_value = std::clamp(std::erfc(z / std::sqrt(2.0)), 0.0, 1.0);
  out.exact = false;
  return out;
}

Breakdowns ComputeBreakdowns(std::span<const EntityRow> rows, int n_summaries) {
  Breakdowns b;
  const int size = n_summaries + 1;
  b.confusion.assign(size, std::vector<long>(size, 0));
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> genre_vals;
  std::map<std::string, std::pair<std::vector<int>, std::vector<int>>> type_vals;
  for (const EntityRow &r : rows) {
    if (r.gold < 0 || r.gold > n_summaries || r.pred < 0 || r.pred > n_summaries) {
      throw DataError("score out of range for " + r.document_id + "/" + r.entity_id);
    }
    b.confusion[r.gold][r.pred] += 1;
    auto &[gp, gg] = genre_vals[r.genre];
    gp.push_back(r.pred);
    gg.push_back(r.gold);
    auto &[tp, tg] = type_vals[r.type];
    tp.push_back(r.pred);
    tg.push_back(r.gold);
    if (r.gold >= 1) {
      const bool p = InTier(r.pred, Tier::kTop3, n_summaries);
      const bool g = InTier(r.gold, Tier::kTop3, n_summaries);
      ErrorCounts &half = r.first_half ? b.first_half : b.second_half;
      if (p && !g) half.fp += 1;
      if (g && !p) half.fn += 1;
    }
  }
  for (const auto &[genre, vals] : genre_vals) {
    GenreBreakdown g;
    g.entities = static_cast<long>(vals.first.size());
    g.spearman = TrySpearmanRho(vals.first, vals.second);
    g.rmse = Rmse(vals.first, vals.second);
    b.per_genre[genre] = g;
  }
  for (const auto &[type, vals] : type_vals) {
    b.per_type[type] = {static_cast<long>(vals.first.size()),
                        TopKPrf(vals.first, vals.second, Tier::kTop3, n_summaries)};
  }
  return b;
}

namespace {

std::map<std::string, std::pair<std::vector<double>, std::vector<double>>>
GroupByDocument(std::span<const EntityRow> rows) {
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> out;
  for (const EntityRow &r : rows) {
    auto &[p, g] = out[r.document_id];
    p.push_back(r.pred);
    g.push_back(r.gold);
  }
  return out;
}

}  // namespace

EvalReport Evaluate(std::span<const EntityRow> rows, const EvalOptions &options,
                    std::span<const EntityRow> baseline) {
  if (rows.empty()) throw DataError("nothing to evaluate");
  EvalReport report;
  report.options = options;
  report.entities = static_cast<long>(rows.size());
  {
    std::set<std::string> docs;
    for (const EntityRow &r : rows) docs.insert(r.document_id);
    report.documents = static_cast<long>(docs.size());
  }

  std::vector<double> pred, gold;
  std::vector<int> pred_i, gold_i;
  for (const EntityRow &r : rows) {
    pred_i.push_back(r.pred);
    gold_i.push_back(r.gold);
    if (options.salient_only && r.gold < 1) continue;
    pred.push_back(r.pred);
    gold.push_back(r.gold);
  }
  if (pred.empty()) throw DataError("no entities left after salient-only filter");

  auto rmse_metric = [&pred, &gold](std::span<const std::size_t> idx) -> std::optional<double> {
    double sum = 0.0;
    for (std::size_t i : idx) {
      const double d = pred[i] - gold[i];
      sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(idx.size()));
  };
  auto rho_metric = [&pred, &gold](std::span<const std::size_t> idx) -> std::optional<double> {
    std::vector<double> p, g;
    p.reserve(idx.size());
    g.reserve(idx.size());
    for (std::size_t i : idx) {
      p.push_back(pred[i]);
      g.push_back(gold[i]);
    }
    return TrySpearmanRho(p, g);
  };

  report.rmse.value = Rmse(pred, gold);
  if (pred.size() >= 2) {
    report.rmse.ci = BootstrapCi(rmse_metric, pred.size(), options.resamples,
                                 DeriveSeed(options.seed, "bootstrap/rmse"));
  } else {
    report.rmse.ci = {report.rmse.value, report.rmse.value};
  }
  if (auto rho = TrySpearmanRho(pred, gold)) {
    PointWithCi s;
    s.value = *rho;
    try {
      s.ci = BootstrapCi(rho_metric, pred.size(), options.resamples,
                         DeriveSeed(options.seed, "bootstrap/spearman"));
    } catch (const Error &e) {
      s.ci = {s.value, s.value};
      report.warnings.push_back(std::string("spearman interval unavailable: ") + e.what());
    }
    report.spearman = s;
  } else {
    report.warnings.push_back("pooled spearman undefined (constant scores)");
  }

  report.top1 = TopKPrf(pred_i, gold_i, Tier::kTop1, options.n_summaries);
  report.top3 = TopKPrf(pred_i, gold_i, Tier::kTop3, options.n_summaries);
  report.breakdowns = ComputeBreakdowns(rows, options.n_summaries);

  if (!baseline.empty()) {
    auto ours = GroupByDocument(rows);
    auto theirs = GroupByDocument(baseline);
    std::vector<double> diffs;
    long skipped = 0;
    for (const auto &[doc, vals] : ours) {
      auto it = theirs.find(doc);
      if (it == theirs.end()) throw DataError("baseline lacks document " + doc);
      if (it->second.second != vals.second) {
        throw DataError("baseline gold scores differ for document " + doc);
      }
      auto a = TrySpearmanRho(vals.first, vals.second);
      auto b = TrySpearmanRho(it->second.first, it->second.second);
      if (a && b) {
        diffs.push_back(*a - *b);
      } else {
        ++skipped;
      }
    }
    if (skipped > 0) {
      report.warnings.push_back(std::to_string(skipped) +
                                " documents without defined per-document rho skipped in wilcoxon pairing");
    }
    bool any_nonzero = std::any_of(diffs.begin(), diffs.end(), [](double d) { return d != 0.0; });
    if (any_nonzero) {
      report.wilcoxon = WilcoxonSignedRank(diffs);
    } else {
      report.warnings.push_back("wilcoxon skipped: no non-zero per-document differences");
    }
  }
  return report;
}

namespace {

nlohmann::ordered_json PrfJson(const Prf &p) {
  return {{"precision", p.precision}, {"recall", p.recall}, {"f1", p.f1}};
}

nlohmann::ordered_json PointJson(const PointWithCi &p) {
  return {{"value", p.value}, {"ci_low", p.ci.low}, {"ci_high", p.ci.high}};
}

}  // namespace

std::string EvalReport::ToJson() const {
  nlohmann::ordered_json j;
  j["documents"] = documents;
  j["entities"] = entities;
  j["spearman"] = spearman ? PointJson(*spearman) : nlohmann::ordered_json(nullptr);
  j["rmse"] = PointJson(rmse);
  j["top1"] = PrfJson(top1);
  j["top3"] = PrfJson(top3);
  if (wilcoxon) {
    j["wilcoxon"] = {{"statistic", wilcoxon->statistic},
                     {"p_value", wilcoxon->p_value},
                     {"n_pairs", wilcoxon->n_pairs},
                     {"exact", wilcoxon->exact}};
  } else {
    j["wilcoxon"] = nullptr;
  }
  j["confusion"] = breakdowns.confusion;
  nlohmann::ordered_json genres = nlohmann::ordered_json::object();
  for (const auto &[genre, g] : breakdowns.per_genre) {
    genres[genre] = {{"entities", g.entities},
                     {"spearman", g.spearman ? nlohmann::ordered_json(*g.spearman)
                                             : nlohmann::ordered_json(nullptr)},
                     {"rmse", g.rmse}};
  }
  j["per_genre"] = std::move(genres);
  nlohmann::ordered_json types = nlohmann::ordered_json::object();
  for (const auto &[type, t] : breakdowns.per_type) {
    types[type] = {{"entities", t.entities}, {"top3", PrfJson(t.top3)}};
  }
  j["per_type"] = std::move(types);
  j["fp_fn_by_half"] = {
      {"first", {{"fp", breakdowns.first_half.fp}, {"fn", breakdowns.first_half.fn}}},
      {"second", {{"fp", breakdowns.second_half.fp}, {"fn", breakdowns.second_half.fn}}}};
  j["unresolved_predictions"] = unresolved_predictions;
  j["warnings"] = warnings;
  j["metadata"] = {
      {"seed", options.seed},
      {"resamples", options.resamples},
      {"salient_only", options.salient_only},
      {"n_summaries", options.n_summaries},
      {"ci_method", "percentile bootstrap (2.5, 97.5); entities resampled jointly"},
      {"spearman_pooling", "pooled over all (document, entity) pairs"},
      {"wilcoxon_pairing", "per-document spearman rho, documents with defined rho only"},
      {"topk_universe", "entities with gold score >= 1"}};
  return j.dump(2) + "\n";
}

std::string EvalReport::ConfusionTsv() const {
  std::ostringstream out;
  out << "gold\\pred";
  for (std::size_t p = 0; p < breakdowns.confusion.size(); ++p) out << '\t' << p;
  out << '\n';
  for (std::size_t g = 0; g < breakdowns.confusion.size(); ++g) {
    out << g;
    for (long c : breakdowns.confusion[g]) out << '\t' << c;
    out << '\n';
  }
  return out.str();
}

std::string EvalReport::PerGenreTsv() const {
  std::ostringstream out;
  out << "genre\tentities\tspearman\trmse\n";
  for (const auto &[genre, g] : breakdowns.per_genre) {
    out << genre << '\t' << g.entities << '\t'
        << (g.spearman ? Fixed(*g.spearman) : std::string("NA")) << '\t'
        << Fixed(g.rmse) << '\n';
  }
  return out.str();
}

std::string EvalReport::PerTypeTsv() const {
  std::ostringstream out;
  out << "type\tentities\tprecision_top3\trecall_top3\tf1_top3\n";
  for (const auto &[type, t] : breakdowns.per_type) {
    out << type << '\t' << t.entities << '\t' << Fixed(t.top3.precision) << '\t'
        << Fixed(t.top3.recall) << '\t' << Fixed(t.top3.f1) << '\n';
  }
  return out.str();
}

std::string EvalReport::ErrorsByHalfTsv() const {
  std::ostringstream out;
  out << "half\tfp\tfn\n";
  out << "first\t" << breakdowns.first_half.fp << '\t' << breakdowns.first_half.fn << '\n';
  out << "second\t" << breakdowns.second_half.fp << '\t' << breakdowns.second_half.fn << '\n';
  return out.str();
}

}  // namespace sage
