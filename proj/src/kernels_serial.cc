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

#include <algorithm>
#include <cmath>
#include <string>

#include "kernels_common.h"

namespace sage::kernels {

void DesignMatrix::AddRow(std::span<const double> x, bool target) {
  if (rows == 0 && values.empty()) cols = x.size();
  if (x.size() != cols) throw InternalError("row width mismatch");
  values.insert(values.end(), x.begin(), x.end());
  targets.push_back(target ? 1.0 : 0.0);
  ++rows;
}

double LossGradient::MaxNorm() const {
  double m = std::abs(bias_grad);
  for (double g : weight_grad) m = std::max(m, std::abs(g));
  return m;
}

namespace serial {

LossGradient NllGradient(const DesignMatrix &data, std::span<const double> w,
                         double bias, double l2) {
  detail::CheckShapes(data, w.size());
  LossGradient out;
  out.weight_grad.assign(w.size(), 0.0);
  for (std::size_t i = 0; i < data.rows; ++i) {
    auto x = data.Row(i);
    double z = bias;
    for (std::size_t j = 0; j < x.size(); ++j) z += w[j] * x[j];
    const double y = data.targets[i];
    out.loss += detail::Softplus(z) - y * z;
    const double residual = detail::Sigmoid(z) - y;
    for (std::size_t j = 0; j < x.size(); ++j) out.weight_grad[j] += residual * x[j];
    out.bias_grad += residual;
  }
  const double n = static_cast<double>(data.rows);
  double sq = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    out.weight_grad[j] = out.weight_grad[j] / n + l2 * w[j];
    sq += w[j] * w[j];
  }
  out.loss = out.loss / n + 0.5 * l2 * sq;
  out.bias_grad /= n;
  return out;
}

std::uint64_t CountExtremeSignings(std::span<const std::int64_t> doubled_ranks,
                                   std::int64_t observed_dev) {
  const std::size_t n = doubled_ranks.size();
  std::int64_t total = 0;
  for (std::int64_t r : doubled_ranks) total += r;
  // Gray-code walk: consecutive masks differ in one bit.
  std::uint64_t count = 0;
  std::int64_t positive = 0;
  const std::uint64_t masks = std::uint64_t{1} << n;
  std::uint64_t gray = 0;
  for (std::uint64_t k = 0; k < masks; ++k) {
    if (k > 0) {
      const int bit = __builtin_ctzll(k);
      gray ^= std::uint64_t{1} << bit;
      positive += (gray >> bit & 1) ? doubled_ranks[bit] : -doubled_ranks[bit];
    }
    if (std::llabs(2 * positive - total) >= observed_dev) ++count;
  }
  return count;
}

std::vector<double> BootstrapReplicates(const ResampleMetric &metric,
                                        std::size_t n_items,
                                        std::size_t resamples,
                                        std::uint64_t seed) {
  std::vector<double> out(resamples);
  std::vector<std::size_t> sample;
  for (std::size_t r = 0; r < resamples; ++r) {
    auto v = detail::Replicate(metric, n_items, seed, r, sample);
    if (!v) {
      throw DataError("bootstrap metric undefined on replicate " +
                      std::to_string(r) + " after redraws");
    }
    out[r] = *v;
  }
  return out;
}

}  // namespace serial
}  // namespace sage::kernels
