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

#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "xlt/bitset.hpp"
#include "xlt/similarity.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {
namespace {

LayoutManifest SmallManifest() {
  return LayoutManifest("m", {{"w", {2, 3}}}, {});
}

FisherDump MakeDump(const LayoutManifest& m, std::uint64_t seed = 1) {
  FisherDump d;
  d.manifest = m;
  d.values.resize(m.total_params());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.0f, 10.0f);
  for (auto& v : d.values) v = u(rng);
  d.example_count = 1024;
  d.tag = RunTag{"en", Objective::kLmMasked, CorpusTag::kTaskCorpus, 7};
  d.flags = flags::kStochasticLayersDisabled;
  return d;
}

std::string Bytes(const FisherDump& d) {
  std::ostringstream out;
  WriteDump(d, out);
  return out.str();
}

FisherDump Parse(const std::string& s) {
  std::istringstream in(s);
  return ReadDump(in);
}

ErrorKind KindOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::kIo;
}

TEST(Manifest, TotalParamsIsSumOfShapeProducts) {
  LayoutManifest m("x", {{"a", {2, 3}}, {"b", {4}}, {"c", {1, 2, 5}}});
  EXPECT_EQ(m.total_params(), 6u + 4u + 10u);
  EXPECT_EQ(m.OffsetOf("b"), 6u);
  EXPECT_EQ(m.OffsetOf("c"), 10u);
}

TEST(Manifest, RejectsDuplicateNamesAndEmptyShapes) {
  EXPECT_EQ(KindOf([] { LayoutManifest("x", {{"a", {2}}, {"a", {3}}}); }), ErrorKind::kInvalid);
  EXPECT_EQ(KindOf([] { LayoutManifest("x", {{"a", {}}}); }), ErrorKind::kInvalid);
  EXPECT_EQ(KindOf([] { LayoutManifest("x", {{"a", {0}}}); }), ErrorKind::kInvalid);
  EXPECT_EQ(KindOf([] { LayoutManifest("x", {}); }), ErrorKind::kInvalid);
}

TEST(Manifest, HashIsPureAndSensitiveToShapeAndOrder) {
  LayoutManifest a("x", {{"a", {2, 3}}, {"b", {4}}});
  LayoutManifest a2("x", {{"a", {2, 3}}, {"b", {4}}});
  LayoutManifest shape("x", {{"a", {2, 4}}, {"b", {4}}});
  LayoutManifest order("x", {{"b", {4}}, {"a", {2, 3}}});
  LayoutManifest name("x", {{"a", {2, 3}}, {"c", {4}}});
  LayoutManifest model("y", {{"a", {2, 3}}, {"b", {4}}});
  EXPECT_EQ(ManifestHash(a), ManifestHash(a2));
  EXPECT_NE(ManifestHash(a), ManifestHash(shape));
  EXPECT_NE(ManifestHash(a), ManifestHash(order));
  EXPECT_NE(ManifestHash(a), ManifestHash(name));
  EXPECT_NE(ManifestHash(a), ManifestHash(model));
}

TEST(Manifest, HashIgnoresExcludedGroups) {
  LayoutManifest a("x", {{"a", {2}}}, {"embeddings"});
  LayoutManifest b("x", {{"a", {2}}}, {});
  EXPECT_EQ(a.layout_hash(), b.layout_hash());
}

TEST(Manifest, HashMatchesIndependentFnv) {
  // FNV-1a 64 over the canonical byte string, computed by hand here.
  std::string bytes;
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes += static_cast<char>((v >> (8 * i)) & 0xff);
  };
  auto u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes += static_cast<char>((v >> (8 * i)) & 0xff);
  };
  u32(1);
  bytes += "m";
  u32(1);
  u32(1);
  bytes += "w";
  u32(2);
  u64(2);
  u64(3);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  EXPECT_EQ(SmallManifest().layout_hash(), h);
}

TEST(Dump, FileSizeIsHeaderPlusFourBytesPerValue) {
  const auto d = MakeDump(SmallManifest());
  const std::string s = Bytes(d);
  // Fixed header: magic 4, version 2, flags 2, language 8, objective 1,
  // corpus 1, seed 4, example_count 8, layout_hash 8.
  const std::size_t fixed = 4 + 2 + 2 + 8 + 1 + 1 + 4 + 8 + 8;
  // Manifest block: "m", zero groups, one tensor "w" with 2 dims.
  const std::size_t manifest = (4 + 1) + 4 + 4 + (4 + 1) + 4 + 2 * 8;
  EXPECT_EQ(s.size(), fixed + manifest + 24);
}

TEST(Dump, RoundTripIsIdentity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<TensorSpec> tensors;
    const int nt = 1 + static_cast<int>(rng() % 4);
    for (int t = 0; t < nt; ++t) {
      std::vector<std::uint64_t> shape;
      const int nd = 1 + static_cast<int>(rng() % 3);
      for (int d = 0; d < nd; ++d) shape.push_back(1 + rng() % 7);
      tensors.push_back({"t" + std::to_string(t), shape});
    }
    LayoutManifest m("model-" + std::to_string(trial), tensors, {"embeddings"});
    auto d = MakeDump(m, trial);
    d.tag.seed = static_cast<std::int32_t>(rng() % 1000) - 500;
    d.tag.objective = trial % 2 ? Objective::kTaskHeadRandom : Objective::kLmMasked;
    d.tag.corpus_tag = trial % 3 ? CorpusTag::kGeneralCorpus : CorpusTag::kTaskCorpus;
    d.tag.language = "l" + std::to_string(trial);
    EXPECT_EQ(Parse(Bytes(d)), d);
  }
}

TEST(Dump, WriteRejectsLengthMismatch) {
  auto d = MakeDump(SmallManifest());
  d.values.pop_back();
  std::ostringstream out;
  EXPECT_EQ(KindOf([&] { WriteDump(d, out); }), ErrorKind::kInvalid);
}

TEST(Dump, FlippedMagicIsBadMagic) {
  auto s = Bytes(MakeDump(SmallManifest()));
  s[1] ^= 0x20;
  EXPECT_EQ(KindOf([&] { Parse(s); }), ErrorKind::kBadMagic);
}

TEST(Dump, VersionMismatch) {
  auto s = Bytes(MakeDump(SmallManifest()));
  s[4] = 2;
  try {
    Parse(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kVersionMismatch);
    ASSERT_TRUE(e.offset().has_value());
    EXPECT_EQ(*e.offset(), 4u);
  }
}

TEST(Dump, TruncatedMidValuesNamesLengths) {
  const auto s = Bytes(MakeDump(SmallManifest()));
  try {
    Parse(s.substr(0, s.size() - 6));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kTruncated);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("expected 24"), std::string::npos) << msg;
    EXPECT_NE(msg.find("got 18"), std::string::npos) << msg;
  }
}

TEST(Dump, TruncatedHeader) {
  const auto s = Bytes(MakeDump(SmallManifest()));
  for (std::size_t cut : {0u, 3u, 10u, 30u, 45u}) {
    EXPECT_EQ(KindOf([&] { Parse(s.substr(0, cut)); }), ErrorKind::kTruncated) << cut;
  }
}

TEST(Dump, TrailingBytesRejected) {
  const auto s = Bytes(MakeDump(SmallManifest())) + "x";
  EXPECT_EQ(KindOf([&] { Parse(s); }), ErrorKind::kInvalid);
}

TEST(Dump, NegativeAndNanValuesRejectedWithOffset) {
  const auto d = MakeDump(SmallManifest());
  const auto s = Bytes(d);
  const std::size_t values_at = s.size() - 24;
  for (float bad : {-1.0f, std::numeric_limits<float>::quiet_NaN(),
                    std::numeric_limits<float>::infinity()}) {
    auto c = s;
    const auto u = std::bit_cast<std::uint32_t>(bad);
    for (int i = 0; i < 4; ++i) c[values_at + 8 + i] = static_cast<char>((u >> (8 * i)) & 0xff);
    try {
      Parse(c);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kInvalid);
      ASSERT_TRUE(e.offset().has_value());
      EXPECT_EQ(*e.offset(), values_at + 8);
    }
  }
}

TEST(Dump, UnknownFlagBitsRejected) {
  auto s = Bytes(MakeDump(SmallManifest()));
  s[6] = static_cast<char>(0x10);
  EXPECT_EQ(KindOf([&] { Parse(s); }), ErrorKind::kInvalid);
}

// Every header byte except the seed and example_count payloads is guarded
// by a structural check or by the layout hash.
TEST(Dump, SingleByteHeaderCorruptionDetected) {
  LayoutManifest m("toy", {{"W1", {3, 2}}, {"b1", {2}}}, {"embeddings"});
  const auto s = Bytes(MakeDump(m));
  const std::size_t header_end = s.size() - 4 * m.total_params();
  const std::size_t seed_at = 4 + 2 + 2 + 8 + 1 + 1;
  const std::size_t count_at = seed_at + 4;
  for (std::size_t i = 0; i < header_end; ++i) {
    if (i >= seed_at && i < count_at + 8) continue;
    for (int mask : {0xff, 0x80}) {
      auto c = s;
      c[i] = static_cast<char>(c[i] ^ mask);
      bool threw = false;
      try {
        const auto d = Parse(c);
      } catch (const Error&) {
        threw = true;
      }
      EXPECT_TRUE(threw) << "byte " << i << " xor " << mask;
    }
  }
}

TEST(Dump, LayoutHashFieldMismatchRejected) {
  auto s = Bytes(MakeDump(SmallManifest()));
  const std::size_t hash_at = 4 + 2 + 2 + 8 + 1 + 1 + 4 + 8;
  s[hash_at] ^= 1;
  EXPECT_EQ(KindOf([&] { Parse(s); }), ErrorKind::kLayoutMismatch);
}

TEST(SelectionCount, CeilingWithIntegerSnap) {
  EXPECT_EQ(SelectionCount(0.15, 100000), 15000u);
  EXPECT_EQ(SelectionCount(0.5, 4), 2u);
  EXPECT_EQ(SelectionCount(0.34, 3), 2u);
  EXPECT_EQ(SelectionCount(1e-9, 10), 1u);
  EXPECT_EQ(SelectionCount(1.0, 7), 7u);
  EXPECT_EQ(SelectionCount(0.05, 100000), 5000u);
  EXPECT_EQ(KindOf([] { SelectionCount(0.0, 10); }), ErrorKind::kOutOfRange);
  EXPECT_EQ(KindOf([] { SelectionCount(1.5, 10); }), ErrorKind::kOutOfRange);
}

MaskFile MakeMask(std::size_t n, double p, std::uint64_t seed) {
  MaskFile mask;
  mask.p = p;
  mask.k_selected = SelectionCount(p, n);
  mask.bits = Bitset(n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  for (std::size_t i = 0; i < mask.k_selected; ++i) mask.bits.Set(idx[i]);
  mask.manifest_hash = 0x1234;
  mask.tag = RunTag{"de", Objective::kTaskHeadRandom, CorpusTag::kGeneralCorpus, 2};
  return mask;
}

TEST(Mask, RoundTripIsIdentity) {
  for (std::size_t n : {1u, 63u, 64u, 65u, 1000u}) {
    const auto mask = MakeMask(n, 0.15, n);
    std::ostringstream out;
    WriteMask(mask, out);
    std::istringstream in(out.str());
    EXPECT_EQ(ReadMask(in), mask) << n;
  }
}

TEST(Mask, PopcountMismatchRejected) {
  auto mask = MakeMask(100, 0.15, 1);
  mask.bits.Set(mask.bits.Test(0) ? 1 : 0);
  if (mask.bits.Count() == mask.k_selected) mask.bits.Set(2);
  std::ostringstream out;
  EXPECT_EQ(KindOf([&] { WriteMask(mask, out); }), ErrorKind::kInvalid);
}

TEST(Mask, NonzeroPaddingRejected) {
  const auto mask = MakeMask(65, 0.5, 4);
  std::ostringstream out;
  WriteMask(mask, out);
  auto s = out.str();
  s[s.size() - 1] = static_cast<char>(0x80);  // bit 127 of a 65-bit set
  std::istringstream in(s);
  EXPECT_EQ(KindOf([&] { ReadMask(in); }), ErrorKind::kInvalid);
}

TEST(Mask, SingleByteHeaderCorruptionDetected) {
  const auto mask = MakeMask(200, 0.15, 9);
  std::ostringstream out;
  WriteMask(mask, out);
  const auto s = out.str();
  // magic, version, flags, p, k_selected, language, objective, corpus and
  // total_params are checked; the layout hash and seed are carried through.
  const std::size_t hash_at = 4 + 2 + 2 + 8 + 8;
  const std::size_t seed_at = hash_at + 8 + 8 + 1 + 1;
  const std::size_t header_end = seed_at + 4 + 8;
  for (std::size_t i = 0; i < header_end; ++i) {
    if (i >= hash_at && i < hash_at + 8) continue;
    if (i >= seed_at && i < seed_at + 4) continue;
    // The low mantissa bytes of p leave ceil(p * n) unchanged.
    if (i >= 8 && i < 8 + 6) continue;
    auto c = s;
    c[i] = static_cast<char>(c[i] ^ 0xff);
    std::istringstream in(c);
    bool threw = false;
    try {
      ReadMask(in);
    } catch (const Error&) {
      threw = true;
    }
    EXPECT_TRUE(threw) << "byte " << i;
  }
}

TEST(GradientStream, RoundTripAndTruncation) {
  const auto m = SmallManifest();
  const RunTag tag{"fr", Objective::kLmMasked, CorpusTag::kTaskCorpus, 3};
  std::ostringstream out;
  GradientStreamWriter w(out, m, tag, flags::kStochasticLayersDisabled);
  std::vector<std::vector<double>> recs = {{1, -2, 3, 0.5, 0, 4}, {0, 0, 1, 1, -1, 2}};
  for (const auto& r : recs) w.Append(r);
  w.Flush();
  EXPECT_EQ(w.bytes_written(), out.str().size());

  std::istringstream in(out.str());
  GradientStreamReader r(in);
  EXPECT_EQ(r.manifest(), m);
  EXPECT_EQ(r.tag(), tag);
  EXPECT_EQ(r.flags(), flags::kStochasticLayersDisabled);
  std::vector<double> g;
  for (const auto& rec : recs) {
    ASSERT_TRUE(r.Next(g));
    EXPECT_EQ(g, rec);
  }
  EXPECT_FALSE(r.Next(g));

  std::istringstream cut(out.str().substr(0, out.str().size() - 3));
  GradientStreamReader r2(cut);
  ASSERT_TRUE(r2.Next(g));
  EXPECT_EQ(KindOf([&] { r2.Next(g); }), ErrorKind::kTruncated);

  std::vector<double> wrong(5, 0.0);
  EXPECT_EQ(KindOf([&] { w.Append(wrong); }), ErrorKind::kInvalid);
}

TEST(MatrixCsv, RoundTripIsIdentity) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::string> langs;
    for (int i = 0; i <= trial % 5; ++i) langs.push_back("x" + std::to_string(i));
    SimilarityMatrix m(langs, trial % 2 ? Method::kLex : Method::kXsns, 1 + trial % 3);
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) m.at(i, j) = std::stod(FormatReal(u(rng)));
    }
    m.metadata()["p"] = "0.15";
    std::stringstream ss;
    WriteMatrixCsv(m, ss);
    const auto back = ReadMatrixCsv(ss);
    EXPECT_EQ(back.languages(), m.languages());
    EXPECT_EQ(back.method(), m.method());
    EXPECT_EQ(back.seeds_averaged(), m.seeds_averaged());
    EXPECT_EQ(back.metadata(), m.metadata());
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) EXPECT_EQ(back.at(i, j), m.at(i, j));
    }
  }
}

TEST(MatrixCsv, RejectsRaggedRows) {
  std::istringstream in("language,a,b\na,1,0.5\nb,0.5\n");
  EXPECT_EQ(KindOf([&] { ReadMatrixCsv(in); }), ErrorKind::kInvalid);
}

TEST(Files, MissingPathIsNotFound) {
  EXPECT_EQ(KindOf([] { LoadDump("/nonexistent/x.fgrd"); }), ErrorKind::kNotFound);
}

}  // namespace
}  // namespace xlt
