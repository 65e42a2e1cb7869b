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

#include <omp.h>

#include <atomic>
#include <cmath>
#include <string>

#include "kernels_common.h"

namespace sage::kernels::parallel {
namespace {

// Rows per partial sum.  Partials are combined in block order, which keeps
// the floating-point result independent of the thread count.
constexpr std::size_t kBlockRows = 256;

}  // namespace

LossGradient NllGradient(const DesignMatrix &data, std::span<const double> w,
                         double bias, double l2) {
  detail::CheckShapes(data, w.size());
  const std::size_t dim = w.size();
  const std::size_t stride = dim + 2;  // weights, bias, loss
  const std::size_t blocks = (data.rows + kBlockRows - 1) / kBlockRows;
  std::vector<double> partial(blocks * stride, 0.0);

#pragma omp parallel for schedule(static)
  for (std::size_t b = 0; b < blocks; ++b) {
    double *acc = partial.data() + b * stride;
    const std::size_t end = std::min(data.rows, (b + 1) * kBlockRows);
    for (std::size_t i = b * kBlockRows; i < end; ++i) {
      const double *x = data.values.data() + i * dim;
      double z = bias;
      for (std::size_t j = 0; j < dim; ++j) z += w[j] * x[j];
      const double y = data.targets[i];
      const double residual = detail::Sigmoid(z) - y;
      for (std::size_t j = 0; j < dim; ++j) acc[j] += residual * x[j];
      acc[dim] += residual;
      acc[dim + 1] += detail::Softplus(z) - y * z;
    }
  }

  LossGradient out;
  out.weight_grad.assign(dim, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    const double *acc = partial.data() + b * stride;
    for (std::size_t j = 0; j < dim; ++j) out.weight_grad[j] += acc[j];
    out.bias_grad += acc[dim];
    out.loss += acc[dim + 1];
  }
  const double n = static_cast<double>(data.rows);
  double sq = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    out.weight_grad[j] = out.weight_grad[j] / n + l2 * w[j];
    sq += w[j] * w[j];
  }
  out.loss = out.loss / n + 0.5 * l2 * sq;
  out.bias_grad /= n;
  return out;
}

std::uint64_t CountExtremeSignings(std::span<const std::int64_t> doubled_ranks,
                                   std::int64_t observed_dev) {
  const int n = static_cast<int>(doubled_ranks.size());
  std::int64_t total = 0;
  for (std::int64_t r : doubled_ranks) total += r;
  const std::int64_t masks = std::int64_t{1} << n;
  std::uint64_t count = 0;
#pragma omp parallel for reduction(+ : count) schedule(static)
  for (std::int64_t mask = 0; mask < masks; ++mask) {
    std::int64_t positive = 0;
    for (int i = 0; i < n; ++i) {
      if (mask >> i & 1) positive += doubled_ranks[i];
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
  std::atomic<long long> failed{-1};
  std::atomic<bool> threw{false};
  std::string error;
#pragma omp parallel
  {
    std::vector<std::size_t> sample;
#pragma omp for schedule(static)
    for (std::size_t r = 0; r < resamples; ++r) {
      if (failed.load() >= 0 || threw.load()) continue;
      try {
        auto v = detail::Replicate(metric, n_items, seed, r, sample);
        if (v) {
          out[r] = *v;
        } else {
          long long expected = -1;
          failed.compare_exchange_strong(expected, static_cast<long long>(r));
        }
      } catch (const std::exception &e) {
#pragma omp critical(sage_bootstrap_error)
        {
          if (!threw.exchange(true)) error = e.what();
        }
      }
    }
  }
  if (threw) throw DataError("bootstrap metric failed: " + error);
  if (failed >= 0) {
    throw DataError("bootstrap metric undefined on replicate " +
                    std::to_string(failed.load()) + " after redraws");
  }
  return out;
}

}  // namespace sage::kernels::parallel
