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

// Diagonal empirical Fisher information: the per-parameter mean, over a
// corpus, of the squared gradient of each example's log-likelihood.
//
// Gradients must be per example. Squaring a batch-mean gradient yields the
// square of the mean, which is a different (and much smaller) quantity.

#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <future>
#include <span>
#include <string>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

class FisherAccumulator {
 public:
  FisherAccumulator() = default;
  explicit FisherAccumulator(LayoutManifest manifest)
      : manifest_(std::move(manifest)),
        sum_sq_(manifest_.total_params(), 0.0) {}

  const LayoutManifest& manifest() const { return manifest_; }
  const std::vector<double>& sum_sq() const { return sum_sq_; }
  std::uint64_t count() const { return n_; }

  // Adds grad[i]^2 to the running sums. The accumulator is left untouched
  // if the gradient is rejected.
  template <std::floating_point T>
  void Absorb(std::span<const T> grad) {
    if (grad.size() != sum_sq_.size()) {
      throw Error(ErrorKind::kInvalid,
                  "gradient length " + std::to_string(grad.size()) +
                      " != total_params " + std::to_string(sum_sq_.size()));
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      if (!std::isfinite(grad[i])) {
        throw Error(ErrorKind::kInvalid,
                    "non-finite gradient entry at index " + std::to_string(i));
      }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double g = static_cast<double>(grad[i]);
      sum_sq_[i] += g * g;
    }
    ++n_;
  }
  void Absorb(const std::vector<double>& grad) {
    Absorb(std::span<const double>(grad));
  }

  // Elementwise sum of two accumulators over the same layout; `other` is
  // consumed.
  void MergeFrom(FisherAccumulator&& other) {
    RequireSameLayout(manifest_.layout_hash(), other.manifest_.layout_hash(),
                      "merging Fisher accumulators");
    for (std::size_t i = 0; i < sum_sq_.size(); ++i) sum_sq_[i] += other.sum_sq_[i];
    n_ += other.n_;
    other.sum_sq_.clear();
    other.n_ = 0;
  }

 private:
  LayoutManifest manifest_;
  std::vector<double> sum_sq_;
  std::uint64_t n_ = 0;
};

inline FisherAccumulator Merge(FisherAccumulator a, FisherAccumulator b) {
  a.MergeFrom(std::move(b));
  return a;
}

// Reduces shards with a fixed pairwise tree: round r merges shard 2i+1 into
// shard 2i of the previous round. The grouping depends only on the shard
// count, so results are reproducible; different shardings of one corpus
// agree to rounding (about 1e-12 relative).
inline FisherAccumulator MergeAll(std::vector<FisherAccumulator> shards) {
  if (shards.empty()) {
    throw Error(ErrorKind::kInvalid, "no accumulators to merge");
  }
  constexpr std::uint64_t kParallelThreshold = 1u << 20;
  while (shards.size() > 1) {
    const std::size_t pairs = shards.size() / 2;
    std::vector<FisherAccumulator> next;
    next.reserve(pairs + 1);
    if (shards[0].manifest().total_params() >= kParallelThreshold && pairs > 1) {
      std::vector<std::future<FisherAccumulator>> jobs;
      for (std::size_t i = 0; i < pairs; ++i) {
        jobs.push_back(std::async(std::launch::async,
                                  [a = std::move(shards[2 * i]),
                                   b = std::move(shards[2 * i + 1])]() mutable {
                                    return Merge(std::move(a), std::move(b));
                                  }));
      }
      for (auto& j : jobs) next.push_back(j.get());
    } else {
      for (std::size_t i = 0; i < pairs; ++i) {
        next.push_back(Merge(std::move(shards[2 * i]), std::move(shards[2 * i + 1])));
      }
    }
    if (shards.size() % 2 == 1) next.push_back(std::move(shards.back()));
    shards = std::move(next);
  }
  return std::move(shards.front());
}

// values[i] = sum_sq[i] / n, stored as 32-bit floats.
inline FisherDump Finalize(const FisherAccumulator& acc, const RunTag& tag,
                           std::uint16_t dump_flags = 0) {
  if (acc.count() == 0) {
    throw Error(ErrorKind::kInvalid, "no examples absorbed");
  }
  FisherDump dump;
  dump.manifest = acc.manifest();
  dump.example_count = acc.count();
  dump.tag = tag;
  dump.flags = dump_flags;
  const double n = static_cast<double>(acc.count());
  dump.values.resize(acc.sum_sq().size());
  for (std::size_t i = 0; i < dump.values.size(); ++i) {
    dump.values[i] = static_cast<float>(acc.sum_sq()[i] / n);
  }
  return dump;
}

}  // namespace xlt
