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
#include <omp.h>

#include <cmath>
#include <random>
#include <vector>

#include "sage/kernels.h"
#include "test_support.h"

namespace sage::kernels {
namespace {

DesignMatrix RandomData(std::mt19937_64 &rng, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.4);
  DesignMatrix m;
  m.cols = cols;
  std::vector<double> x(cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (double &v : x) v = g(rng);
    m.AddRow(x, coin(rng));
  }
  return m;
}

TEST(NllGradientKernels, ParallelMatchesSerial) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t rows : {1, 7, 255, 256, 257, 2000}) {
    const DesignMatrix data = RandomData(rng, rows, 9);
    std::vector<double> w(9);
    for (double &v : w) v = g(rng);
    const LossGradient a = serial::NllGradient(data, w, 0.3, 1e-3);
    const LossGradient b = parallel::NllGradient(data, w, 0.3, 1e-3);
    EXPECT_NEAR(a.loss, b.loss, 1e-12 * std::max(1.0, std::abs(a.loss)));
    EXPECT_NEAR(a.bias_grad, b.bias_grad, 1e-12);
    for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(a.weight_grad[j], b.weight_grad[j], 1e-12);
    EXPECT_NEAR(a.loss, testing::OracleLoss(data, w, 0.3, 1e-3), 1e-10);
  }
}

TEST(NllGradientKernels, ParallelIndependentOfThreadCount) {
  std::mt19937_64 rng(2);
  const DesignMatrix data = RandomData(rng, 3000, 5);
  const std::vector<double> w = {0.1, -0.2, 0.3, 0.0, 1.0};
  omp_set_num_threads(1);
  const LossGradient one = parallel::NllGradient(data, w, 0.0, 0.0);
  omp_set_num_threads(4);
  const LossGradient four = parallel::NllGradient(data, w, 0.0, 0.0);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(one.loss, four.loss);
  EXPECT_EQ(one.weight_grad, four.weight_grad);
  EXPECT_EQ(one.bias_grad, four.bias_grad);
}

TEST(SigningKernels, ParallelMatchesSerial) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::int64_t> rank(1, 40);
  for (int n = 1; n <= 16; ++n) {
    std::vector<std::int64_t> r(n);
    std::int64_t total = 0;
    for (auto &x : r) total += (x = rank(rng));
    for (std::int64_t dev : {std::int64_t{0}, total / 3, total}) {
      EXPECT_EQ(serial::CountExtremeSignings(r, dev), parallel::CountExtremeSignings(r, dev));
    }
  }
  const std::vector<std::int64_t> r = {2, 4, 6};
  EXPECT_EQ(serial::CountExtremeSignings(r, 12), 2u);
  EXPECT_EQ(serial::CountExtremeSignings(r, 0), 8u);
}

TEST(BootstrapKernels, ParallelMatchesSerialExactly) {
  std::vector<double> v(30);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(static_cast<double>(i));
  ResampleMetric mean = [&v](std::span<const std::size_t> idx) -> std::optional<double> {
    double s = 0;
    for (std::size_t i : idx) s += v[i];
    return s / static_cast<double>(idx.size());
  };
  const auto a = serial::BootstrapReplicates(mean, v.size(), 1000, 42);
  omp_set_num_threads(3);
  const auto b = parallel::BootstrapReplicates(mean, v.size(), 1000, 42);
  omp_set_num_threads(omp_get_num_procs());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, serial::BootstrapReplicates(mean, v.size(), 1000, 43));
}

}  // namespace
}  // namespace sage::kernels
