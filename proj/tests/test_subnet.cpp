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

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "xlt/refmodel.hpp"
#include "xlt/subnet.hpp"

namespace xlt {
namespace {

FisherDump DumpOf(std::vector<float> values, const std::string& lang = "en",
                  std::int32_t seed = 0, const std::string& model = "m") {
  FisherDump d;
  d.manifest = LayoutManifest(model, {{"w", {values.size()}}});
  d.values = std::move(values);
  d.example_count = 1;
  d.tag = RunTag{lang, Objective::kLmMasked, CorpusTag::kTaskCorpus, seed};
  return d;
}

std::set<std::size_t> Members(const SubNetwork& net) {
  std::set<std::size_t> out;
  for (std::size_t i = 0; i < net.mask.bits.size(); ++i) {
    if (net.mask.bits.Test(i)) out.insert(i);
  }
  return out;
}

// First k indices of a stable sort by value descending, ties by index.
std::set<std::size_t> SortOracle(const std::vector<float>& v, std::size_t k) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] > v[b]; });
  return {idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k)};
}

TEST(BuildMask, TopTwoByValue) {
  EXPECT_EQ(Members(BuildMask(DumpOf({0.1f, 0.9f, 0.5f, 0.2f}), 0.5)),
            (std::set<std::size_t>{1, 2}));
}

TEST(BuildMask, FullFractionSelectsEverything) {
  const auto net = BuildMask(DumpOf({0.3f, 0.0f, 2.0f}), 1.0);
  EXPECT_EQ(net.mask.bits.Count(), 3u);
}

TEST(BuildMask, TiesTakenInAscendingIndex) {
  const auto net = BuildMask(DumpOf({0.5f, 0.5f, 0.1f}), 0.34);
  EXPECT_EQ(net.mask.k_selected, 2u);
  EXPECT_EQ(Members(net), (std::set<std::size_t>{0, 1}));
  const auto net2 = BuildMask(DumpOf({0.1f, 0.5f, 0.5f, 0.5f}), 0.5);
  EXPECT_EQ(Members(net2), (std::set<std::size_t>{1, 2}));
}

TEST(BuildMask, AllZeroIsDegenerateButExact) {
  const auto net = BuildMask(DumpOf(std::vector<float>(10, 0.0f)), 0.25);
  EXPECT_TRUE(net.degenerate());
  EXPECT_EQ(Members(net), (std::set<std::size_t>{0, 1, 2}));
  EXPECT_FALSE(BuildMask(DumpOf({1.0f, 0.0f}), 0.5).degenerate());
}

TEST(BuildMask, POutOfRange) {
  EXPECT_THROW(BuildMask(DumpOf({1.0f}), 0.0), Error);
  EXPECT_THROW(BuildMask(DumpOf({1.0f}), 1.01), Error);
}

TEST(BuildMask, MatchesSortOracleWithTies) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + rng() % 5000;
    std::vector<float> v(n);
    // Few distinct levels so the threshold is usually tied.
    const int levels = 1 + static_cast<int>(rng() % 20);
    for (auto& x : v) x = static_cast<float>(rng() % levels) * 0.25f;
    for (double p : {0.01, 0.05, 0.15, 0.5, 0.999, 1.0}) {
      const auto net = BuildMask(DumpOf(v), p);
      const auto k = SelectionCount(p, n);
      ASSERT_EQ(net.mask.bits.Count(), k);
      ASSERT_EQ(Members(net), SortOracle(v, k)) << "n=" << n << " p=" << p;
    }
  }
}

TEST(BuildMask, MillionValuesPopcountAndSeparation) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(1000000);
  for (auto& x : v) x = u(rng);
  for (double p : {0.001, 0.15, 0.7}) {
    const auto net = BuildMask(DumpOf(v), p);
    EXPECT_EQ(net.mask.bits.Count(), static_cast<std::size_t>(std::ceil(p * 1e6 - 1e-6)));
    float min_in = 2.0f;
    float max_out = -1.0f;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (net.mask.bits.Test(i)) {
        min_in = std::min(min_in, v[i]);
      } else {
        max_out = std::max(max_out, v[i]);
      }
    }
    EXPECT_GE(min_in, max_out);
  }
}

TEST(BuildMask, ScaleInvariant) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  std::vector<float> v(999);
  for (auto& x : v) x = u(rng);
  const auto base = BuildMask(DumpOf(v), 0.15);
  // Powers of two scale floats exactly.
  for (float c : {0.5f, 4.0f, 1024.0f}) {
    auto w = v;
    for (auto& x : w) x *= c;
    EXPECT_EQ(BuildMask(DumpOf(w), 0.15).mask.bits, base.mask.bits) << c;
  }
}

SubNetwork NetWithBits(std::size_t n, std::initializer_list<std::size_t> bits) {
  SubNetwork net;
  net.mask.bits = Bitset(n);
  for (auto b : bits) net.mask.bits.Set(b);
  net.mask.p = 0.5;
  net.mask.k_selected = bits.size();
  net.mask.manifest_hash = 1;
  net.mask.tag.language = "en";
  return net;
}

TEST(Jaccard, HandCounts) {
  const auto a = NetWithBits(8, {0, 1, 2});
  const auto b = NetWithBits(8, {1, 2, 3});
  const auto c = NetWithBits(8, {5, 6, 7});
  EXPECT_EQ(Jaccard(a, a), 1.0);
  EXPECT_EQ(Jaccard(a, c), 0.0);
  EXPECT_EQ(Jaccard(a, b), 0.5);
  EXPECT_EQ(Jaccard(NetWithBits(8, {}), NetWithBits(8, {})), 1.0);
}

TEST(Jaccard, LayoutAndPMismatch) {
  auto a = NetWithBits(8, {0});
  auto b = NetWithBits(8, {0});
  b.mask.manifest_hash = 2;
  try {
    Jaccard(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLayoutMismatch);
  }
  b.mask.manifest_hash = 1;
  b.mask.p = 0.25;
  EXPECT_THROW(Jaccard(a, b), Error);
}

TEST(Jaccard, WordPackedEqualsNaiveLoop) {
  std::mt19937_64 rng(77);
  for (std::size_t n : {1u, 63u, 64u, 65u, 1000003u}) {
    SubNetwork a = NetWithBits(n, {});
    SubNetwork b = NetWithBits(n, {});
    std::vector<bool> na(n), nb(n);
    for (std::size_t i = 0; i < n; ++i) {
      na[i] = rng() % 3 == 0;
      nb[i] = rng() % 2 == 0;
      if (na[i]) a.mask.bits.Set(i);
      if (nb[i]) b.mask.bits.Set(i);
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < n; ++i) {
      inter += na[i] && nb[i];
      uni += na[i] || nb[i];
    }
    const double naive = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
    EXPECT_EQ(Jaccard(a, b), naive) << n;
    EXPECT_EQ(Jaccard(a, b), Jaccard(b, a));
    EXPECT_GE(Jaccard(a, b), 0.0);
    EXPECT_LE(Jaccard(a, b), 1.0);
  }
}

TEST(SimilarityMatrix, SingleLanguageSingleSeed) {
  std::vector<SubNetwork> nets = {BuildMask(DumpOf({1, 2, 3, 4}), 0.5)};
  const auto m = BuildSimilarityMatrix(nets);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m.at(0, 0), 1.0);
}

TEST(SimilarityMatrix, IdenticalToyCorporaGiveOne) {
  const ToyModel model(ToyModelConfig{});
  SyntheticLanguage lang{"xx", 0, std::vector<double>(64, 1.0 / 64), 5};
  const auto corpus = GenerateCorpus(lang, 128, 4, 10);
  std::vector<SubNetwork> nets;
  for (const std::string code : {"aa", "bb"}) {
    for (int seed : {0, 1}) {
      ExtractionOptions opt;
      opt.language = code;
      opt.seed = seed;
      opt.sample_size = 64;
      nets.push_back(BuildMask(ExtractToyFisher(model, corpus, opt), 0.15));
    }
  }
  const auto m = BuildSimilarityMatrix(nets);
  EXPECT_EQ(m.at("aa", "bb"), 1.0);
  EXPECT_EQ(m.seeds_averaged(), 2);
}

TEST(SimilarityMatrix, EqualsMeanOfPerSeedMatrices) {
  const ToyModel model(ToyModelConfig{});
  const auto langs = MakeFamilies(3, 2, 0.3, 11);
  std::vector<SubNetwork> nets;
  for (const auto& l : langs) {
    const auto corpus = GenerateCorpus(l, 256, 6, 16);
    for (int seed : {0, 1, 2}) {
      ExtractionOptions opt;
      opt.language = l.code;
      opt.seed = seed;
      opt.sample_size = 128;
      nets.push_back(BuildMask(ExtractToyFisher(model, corpus, opt), 0.15));
    }
  }
  const auto m = BuildSimilarityMatrix(nets);
  ASSERT_EQ(m.size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) {
      double sum = 0.0;
      for (int seed = 0; seed < 3; ++seed) {
        const auto& a = nets[i * 3 + seed];
        const auto& b = nets[j * 3 + seed];
        std::size_t inter = 0;
        std::size_t uni = 0;
        for (std::size_t x = 0; x < a.mask.bits.size(); ++x) {
          inter += a.mask.bits.Test(x) && b.mask.bits.Test(x);
          uni += a.mask.bits.Test(x) || b.mask.bits.Test(x);
        }
        sum += static_cast<double>(inter) / static_cast<double>(uni);
      }
      EXPECT_NEAR(m.at(langs[i].code, langs[j].code), sum / 3.0, 1e-15);
    }
  }
  EXPECT_EQ(m.metadata().at("seeds"), "0;1;2");
  EXPECT_EQ(m.metadata().at("p"), "0.15");
}

TEST(SimilarityMatrix, RaggedSeedsAndMixedP) {
  std::vector<SubNetwork> nets = {BuildMask(DumpOf({1, 2}, "aa", 0), 0.5),
                                  BuildMask(DumpOf({1, 2}, "aa", 1), 0.5),
                                  BuildMask(DumpOf({1, 2}, "bb", 0), 0.5)};
  EXPECT_THROW(BuildSimilarityMatrix(nets), Error);
  std::vector<SubNetwork> mixed = {BuildMask(DumpOf({1, 2}, "aa", 0), 0.5),
                                   BuildMask(DumpOf({1, 2}, "bb", 0), 1.0)};
  EXPECT_THROW(BuildSimilarityMatrix(mixed), Error);
  std::vector<SubNetwork> layouts = {BuildMask(DumpOf({1, 2}, "aa", 0, "m1"), 0.5),
                                     BuildMask(DumpOf({1, 2}, "bb", 0, "m2"), 0.5)};
  EXPECT_THROW(BuildSimilarityMatrix(layouts), Error);
}

}  // namespace
}  // namespace xlt
