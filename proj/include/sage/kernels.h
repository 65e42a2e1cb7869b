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

// Hot loops of the pipeline.  Each kernel has an OpenMP implementation in
// `parallel` and a plain single-threaded one in `serial`; the serial
// versions are the reference the tests and the benchmark compare against.
// Parallel results do not depend on the thread count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace sage::kernels {

// Row-major design matrix with one binary target per row.
struct DesignMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;   // rows * cols
  std::vector<double> targets;  // rows, each 0 or 1

  std::span<const double> Row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  void AddRow(std::span<const double> x, bool target);
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> weight_grad;
  double bias_grad = 0.0;

  double MaxNorm() const;
};

// Mean negative log-likelihood of a logistic model plus (l2/2)*|w|^2 (bias
// unregularized), and its analytic gradient.
namespace parallel {
LossGradient NllGradient(const DesignMatrix &data, std::span<const double> w,
                         double bias, double l2);
}
namespace serial {
LossGradient NllGradient(const DesignMatrix &data, std::span<const double> w,
                         double bias, double l2);
}

// Number of the 2^n sign assignments whose signed-rank statistic lies at
// least as far from its null mean as the observed one.  `doubled_ranks`
// are twice the (average) ranks so ties stay integral; `observed_dev` is
// |2*W+ - sum(doubled_ranks)| for the observed signs.  n <= 30.
namespace parallel {
std::uint64_t CountExtremeSignings(std::span<const std::int64_t> doubled_ranks,
                                   std::int64_t observed_dev);
}
namespace serial {
std::uint64_t CountExtremeSignings(std::span<const std::int64_t> doubled_ranks,
                                   std::int64_t observed_dev);
}

// A statistic over a with-replacement sample of item indices; nullopt when
// undefined on that sample.  Must be safe to call concurrently.
using ResampleMetric =
    std::function<std::optional<double>(std::span<const std::size_t>)>;

// Bootstrap replicates.  Replicate r draws from its own seeded stream, so
// results are identical however the range is split.  An undefined sample
// is redrawn up to 10 times before the call fails with DataError.
namespace parallel {
std::vector<double> BootstrapReplicates(const ResampleMetric &metric,
                                        std::size_t n_items,
                                        std::size_t resamples,
                                        std::uint64_t seed);
}
namespace serial {
std::vector<double> BootstrapReplicates(const ResampleMetric &metric,
                                        std::size_t n_items,
                                        std::size_t resamples,
                                        std::uint64_t seed);
}

}  // namespace sage::kernels
