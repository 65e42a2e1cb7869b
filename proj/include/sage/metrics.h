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

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sage/alignment.h"
#include "sage/kernels.h"

namespace sage {

// Average (fractional) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> AverageRanks(std::span<const double> values);

// Pearson correlation of average ranks.  Throws DataError when lengths
// differ, fewer than two items are given, or either side is constant.
double SpearmanRho(std::span<const double> pred, std::span<const double> gold);
std::optional<double> TrySpearmanRho(std::span<const double> pred,
                                     std::span<const double> gold);

double Rmse(std::span<const double> pred, std::span<const double> gold);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Top-1: score == N.  Top-3: score in {N-2, N-1, N}.
enum class Tier { kTop1, kTop3 };
bool InTier(int score, Tier tier, int n_summaries = 5);

// Real-valued predictions are rounded half-up before tiering.
int RoundHalfUp(double score);

// Retrieval scores over the salient universe: entities whose gold score is
// zero are ignored entirely.  An empty predicted set scores 0 unless the
// gold set is empty as well, in which case all three are 1.
Prf TopKPrf(std::span<const int> pred, std::span<const int> gold, Tier tier,
            int n_summaries = 5);

struct AlignmentScores {
  Prf micro;     // pooled over both classes
  Prf macro;     // mean of per-class scores
  Prf positive;  // the "mentioned" class alone
  long tp = 0, fp = 0, fn = 0, tn = 0;
};

// Records are matched on (document, entity, summary); both sides must cover
// the same keys.
AlignmentScores AlignmentPrf(std::span<const AlignmentRecord> pred,
                             std::span<const AlignmentRecord> gold);
AlignmentScores AlignmentPrfFromCounts(long tp, long fp, long fn, long tn);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Linear-interpolation percentile (numpy's default) of unsorted values.
double Percentile(std::vector<double> values, double q);

// 95% percentile bootstrap interval of `metric` over resampled item indices.
Interval BootstrapCi(const kernels::ResampleMetric &metric, std::size_t n_items,
                     std::size_t resamples, std::uint64_t seed);

struct WilcoxonResult {
  double statistic = 0.0;  // W+, sum of ranks of positive differences
  double p_value = 1.0;    // two-sided
  int n_pairs = 0;         // non-zero differences
  bool exact = true;
};

// Exact enumeration for up to this many non-zero differences.
inline constexpr int kWilcoxonExactLimit = 20;

WilcoxonResult WilcoxonSignedRank(std::span<const double> diffs);

// One scored entity, with the attributes the breakdowns need.
struct EntityRow {
  std::string document_id;
  std::string entity_id;
  std::string genre;
  std::string type;
  int gold = 0;
  int pred = 0;
  bool first_half = true;  // first mention in the first half of sentences
};

struct GenreBreakdown {
  long entities = 0;
  std::optional<double> spearman;
  double rmse = 0.0;
};

struct TypeBreakdown {
  long entities = 0;
  Prf top3;
};

struct ErrorCounts {
  long fp = 0;
  long fn = 0;
};

struct Breakdowns {
  std::vector<std::vector<long>> confusion;  // [gold][pred], 0..N
  std::map<std::string, GenreBreakdown> per_genre;
  std::map<std::string, TypeBreakdown> per_type;
  ErrorCounts first_half;
  ErrorCounts second_half;
};

Breakdowns ComputeBreakdowns(std::span<const EntityRow> rows,
                             int n_summaries = 5);

struct EvalOptions {
  std::uint64_t seed = 0;
  std::size_t resamples = 10000;
  bool salient_only = false;  // restrict rho/RMSE to gold >= 1
  int n_summaries = 5;
};

struct PointWithCi {
  double value = 0.0;
  Interval ci;
};

struct EvalReport {
  std::optional<PointWithCi> spearman;
  PointWithCi rmse;
  Prf top1;
  Prf top3;
  std::optional<WilcoxonResult> wilcoxon;
  Breakdowns breakdowns;
  long unresolved_predictions = 0;
  long entities = 0;
  long documents = 0;
  std::vector<std::string> warnings;
  EvalOptions options;

  // Stable, ordered JSON (keys and number formatting are deterministic).
  std::string ToJson() const;
  std::string ConfusionTsv() const;
  std::string PerGenreTsv() const;
  std::string PerTypeTsv() const;
  std::string ErrorsByHalfTsv() const;
};

// Scores `rows`; when `baseline` is given (same entities, another
// predictor) the report includes a Wilcoxon test on per-document rho.
EvalReport Evaluate(std::span<const EntityRow> rows, const EvalOptions &options,
                    std::span<const EntityRow> baseline = {});

}  // namespace sage
