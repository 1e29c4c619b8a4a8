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

#include <bit>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "xlt/error.hpp"

namespace xlt {

// Fixed-length bitset packed 64 bits per word, bit i stored in word i / 64 at
// position i % 64. Padding bits past size() are always zero, so word-wise
// popcounts never need masking.
class Bitset {
 public:
  Bitset() = default;
  explicit Bitset(std::size_t size) : size_(size), words_(WordCount(size), 0) {}

  static constexpr std::size_t WordCount(std::size_t bits) {
    return (bits + 63) / 64;
  }

  // Adopts packed words; rejects wrong word counts and nonzero padding.
  static Bitset FromWords(std::size_t size, std::vector<std::uint64_t> words) {
    if (words.size() != WordCount(size)) {
      throw Error(ErrorKind::kInvalid, "bitset word count does not match size");
    }
    const std::size_t tail = size % 64;
    if (tail != 0 && (words.back() >> tail) != 0) {
      throw Error(ErrorKind::kInvalid, "bitset padding bits are not zero");
    }
    Bitset out;
    out.size_ = size;
    out.words_ = std::move(words);
    return out;
  }

  std::size_t size() const { return size_; }
  std::span<const std::uint64_t> words() const { return words_; }

  bool Test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1u; }
  void Set(std::size_t i) { words_[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void Reset(std::size_t i) { words_[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }

  std::size_t Count() const {
    std::size_t n = 0;
    for (std::uint64_t w : words_) n += static_cast<std::size_t>(std::popcount(w));
    return n;
  }

  friend bool operator==(const Bitset&, const Bitset&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint64_t> words_;
};

struct OverlapCounts {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

// Single pass over both word arrays computing |a AND b| and |a OR b|.
inline OverlapCounts CountOverlap(const Bitset& a, const Bitset& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kLayoutMismatch, "bitsets differ in length");
  }
  const auto wa = a.words();
  const auto wb = b.words();
  std::uint64_t inter = 0;
  std::uint64_t uni = 0;
  for (std::size_t i = 0; i < wa.size(); ++i) {
    inter += static_cast<std::uint64_t>(std::popcount(wa[i] & wb[i]));
    uni += static_cast<std::uint64_t>(std::popcount(wa[i] | wb[i]));
  }
  return {inter, uni};
}

}  // namespace xlt
