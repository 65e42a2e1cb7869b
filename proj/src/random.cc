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

#include "sage/random.h"

namespace sage {
namespace {

// FNV-1a, used only to fold stream names into a seed.
std::uint64_t Fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t Mix(std::uint64_t a, std::uint64_t b) {
  SplitMix64 g(a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
  return g();
}

}  // namespace

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream) {
  return Mix(seed, Fnv1a(stream));
}

std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream,
                         std::uint64_t index) {
  return Mix(DeriveSeed(seed, stream), index);
}

}  // namespace sage
