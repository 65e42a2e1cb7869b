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

#include <cmath>
#include <optional>
#include <vector>

#include "sage/error.h"
#include "sage/kernels.h"
#include "sage/random.h"

namespace sage::kernels::detail {

inline constexpr int kMaxRedraws = 10;

// log(1 + e^z) without overflow.
inline double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline void CheckShapes(const DesignMatrix &data, std::size_t dim) {
  if (data.cols != dim) throw InternalError("weight dimension does not match design matrix");
  if (data.rows == 0) throw DataError("no training examples");
}

// One bootstrap replicate; nullopt when every redraw was undefined.
inline std::optional<double> Replicate(const ResampleMetric &metric,
                                       std::size_t n_items, std::uint64_t seed,
                                       std::size_t r,
                                       std::vector<std::size_t> &sample) {
  SplitMix64 rng(DeriveSeed(seed, "replicate", r));
  sample.resize(n_items);
  for (int attempt = 0; attempt <= kMaxRedraws; ++attempt) {
    for (std::size_t &idx : sample) idx = UniformIndex(rng, n_items);
    if (auto v = metric(sample)) return v;
  }
  return std::nullopt;
}

}  // namespace sage::kernels::detail
