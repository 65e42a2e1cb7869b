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
#include <limits>
#include <string_view>

namespace sage {

// SplitMix64.  Small, fully specified generator so seeded draws are
// identical across standard libraries.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

// Seed of a named sub-stream.  Streams with different names (or indices)
// are independent, so adding a stage never shifts another stage's draws.
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream,
                         std::uint64_t index);

// Uniform integer in [0, n) by rejection; n must be positive.
inline std::uint64_t UniformIndex(SplitMix64 &rng, std::uint64_t n) {
  const std::uint64_t limit = SplitMix64::max() - SplitMix64::max() % n;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % n;
}

}  // namespace sage
