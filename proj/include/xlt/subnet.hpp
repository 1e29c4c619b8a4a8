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

// Language sub-networks: top-p binarization of a Fisher dump, Jaccard overlap
// of two masks, and the seed-averaged language x language overlap matrix.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "xlt/bitset.hpp"
#include "xlt/error.hpp"
#include "xlt/similarity.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

inline constexpr double kDefaultKeepFraction = 0.15;

struct SubNetwork {
  MaskFile mask;

  const std::string& language() const { return mask.tag.language; }
  std::int32_t seed() const { return mask.tag.seed; }
  bool degenerate() const { return (mask.flags & flags::kDegenerateMask) != 0; }
};

// Selects exactly k = ceil(p * N) parameters: every value strictly above the
// k-th largest value, then threshold-equal values in ascending index order
// until k are chosen. The threshold is found with nth_element, so the cost
// is linear in expectation. An all-zero dump still yields k bits (the lowest
// indices) and sets flags::kDegenerateMask.
inline SubNetwork BuildMask(const FisherDump& dump,
                            double p = kDefaultKeepFraction) {
  const std::uint64_t n = dump.values.size();
  if (n != dump.manifest.total_params()) {
    throw Error(ErrorKind::kInvalid, "dump length does not match its manifest");
  }
  const std::uint64_t k = SelectionCount(p, n);

  SubNetwork net;
  net.mask.manifest_hash = dump.manifest.layout_hash();
  net.mask.p = p;
  net.mask.k_selected = k;
  net.mask.tag = dump.tag;
  net.mask.flags = dump.flags & ~flags::kDegenerateMask;
  net.mask.bits = Bitset(n);

  const auto& values = dump.values;
  const bool all_zero =
      std::all_of(values.begin(), values.end(), [](float v) { return v == 0.0f; });
  if (all_zero) net.mask.flags |= flags::kDegenerateMask;

  if (k == n) {
    for (std::uint64_t i = 0; i < n; ++i) net.mask.bits.Set(i);
    return net;
  }

  std::vector<float> scratch(values.begin(), values.end());
  std::nth_element(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k - 1),
                   scratch.end(), std::greater<float>());
  const float threshold = scratch[k - 1];
  scratch = {};

  std::uint64_t selected = 0;
  for (std::uint64_t i = 0; i < n; ++i) {
    if (values[i] > threshold) {
      net.mask.bits.Set(i);
      ++selected;
    }
  }
  for (std::uint64_t i = 0; i < n && selected < k; ++i) {
    if (values[i] == threshold) {
      net.mask.bits.Set(i);
      ++selected;
    }
  }
  return net;
}

// |a AND b| / |a OR b|; two empty masks count as identical.
inline double Jaccard(const SubNetwork& a, const SubNetwork& b) {
  RequireSameLayout(a.mask.manifest_hash, b.mask.manifest_hash,
                    "jaccard of " + a.language() + " and " + b.language());
  if (a.mask.p != b.mask.p) {
    throw Error(ErrorKind::kInvalid,
                "jaccard of masks built with different p (" +
                    FormatReal(a.mask.p) + " vs " + FormatReal(b.mask.p) + ")");
  }
  const auto c = CountOverlap(a.mask.bits, b.mask.bits);
  if (c.union_ == 0) return 1.0;
  return static_cast<double>(c.intersection) / static_cast<double>(c.union_);
}

// Entry (s, t) is the mean over seeds of Jaccard(mask_s^seed, mask_t^seed).
// Languages appear in ascending code order. Every language must carry the
// same set of seeds, and all masks must share one layout and one p.
inline SimilarityMatrix BuildSimilarityMatrix(std::span<const SubNetwork> nets) {
  if (nets.empty()) throw Error(ErrorKind::kInvalid, "no sub-networks given");

  std::map<std::string, std::map<std::int32_t, const SubNetwork*>> by_lang;
  for (const auto& net : nets) {
    RequireSameLayout(nets[0].mask.manifest_hash, net.mask.manifest_hash,
                      "similarity matrix input " + net.language());
    if (net.mask.p != nets[0].mask.p) {
      throw Error(ErrorKind::kInvalid, "similarity matrix inputs mix p values");
    }
    if (!by_lang[net.language()].emplace(net.seed(), &net).second) {
      throw Error(ErrorKind::kInvalid, "duplicate mask for language " +
                                           net.language() + " seed " +
                                           std::to_string(net.seed()));
    }
  }

  std::vector<std::int32_t> seeds;
  for (const auto& [seed, _] : by_lang.begin()->second) seeds.push_back(seed);
  std::vector<std::string> langs;
  for (const auto& [lang, per_seed] : by_lang) {
    std::vector<std::int32_t> mine;
    for (const auto& [seed, _] : per_seed) mine.push_back(seed);
    if (mine != seeds) {
      throw Error(ErrorKind::kInvalid,
                  "ragged seed sets: language " + lang +
                      " does not have the same seeds as " + by_lang.begin()->first);
    }
    langs.push_back(lang);
  }

  SimilarityMatrix m(langs, Method::kXsns, static_cast<int>(seeds.size()));
  const auto& first = nets[0].mask;
  m.metadata()["p"] = FormatReal(first.p);
  m.metadata()["objective"] = std::string(ToString(first.tag.objective));
  m.metadata()["corpus_tag"] = std::string(ToString(first.tag.corpus_tag));
  std::string seed_list;
  for (auto s : seeds) seed_list += (seed_list.empty() ? "" : ";") + std::to_string(s);
  m.metadata()["seeds"] = seed_list;

  const double count = static_cast<double>(seeds.size());
  for (std::size_t i = 0; i < langs.size(); ++i) {
    m.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < langs.size(); ++j) {
      double sum = 0.0;
      for (auto seed : seeds) {
        sum += Jaccard(*by_lang[langs[i]][seed], *by_lang[langs[j]][seed]);
      }
      m.at(i, j) = m.at(j, i) = sum / count;
    }
  }
  return m;
}

}  // namespace xlt
