/*
 * Copyright 2026 The xlt-subnet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "xlt/error.hpp"

namespace xlt {

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed of the independent stream for item `index` under `seed`. Serial and
// parallel consumers that key streams this way draw identical numbers.
inline std::uint64_t StreamSeed(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(seed ^ SplitMix64(index ^ 0x5851f42d4c957f2dull));
}

// mt19937_64 output is fixed by the standard; the distribution helpers
// below are written out so that draws are identical on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t index) : engine_(StreamSeed(seed, index)) {}

  std::uint64_t Next() { return engine_(); }

  // Uniform on [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n), by rejection so there is no modulo bias.
  std::uint64_t Below(std::uint64_t n) {
    if (n == 0) throw Error(ErrorKind::kOutOfRange, "Rng::Below(0)");
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

// `count` distinct indices from [0, pool) by partial Fisher-Yates, or, when
// count > pool, `count` independent draws with replacement.
inline std::vector<std::size_t> SampleIndices(std::size_t pool, std::size_t count,
                                              std::uint64_t seed, bool* with_replacement = nullptr) {
  if (pool == 0) throw Error(ErrorKind::kInvalid, "cannot sample from an empty pool");
  Rng rng(seed, 0);
  std::vector<std::size_t> out;
  out.reserve(count);
  if (count > pool) {
    if (with_replacement) *with_replacement = true;
    for (std::size_t i = 0; i < count; ++i) out.push_back(rng.Below(pool));
    return out;
  }
  if (with_replacement) *with_replacement = false;
  std::vector<std::size_t> perm(pool);
  for (std::size_t i = 0; i < pool; ++i) perm[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.Below(pool - i);
    std::swap(perm[i], perm[j]);
    out.push_back(perm[i]);
  }
  return out;
}

}  // namespace xlt
