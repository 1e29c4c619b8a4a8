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

// Binary interchange formats shared by every stage of the pipeline:
//
//   FGRD  averaged squared-gradient (Fisher) dump
//   FGST  stream of per-example gradients, one record per example
//   FMSK  packed sub-network mask
//
// All integers and floats are little-endian. The parameter layout travels
// with each dump as a manifest block; masks carry only its 64-bit digest.

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "xlt/binary_io.hpp"
#include "xlt/bitset.hpp"
#include "xlt/error.hpp"

namespace xlt {

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kLanguageFieldWidth = 8;

enum class Objective : std::uint8_t { kLmMasked = 0, kTaskHeadRandom = 1 };
enum class CorpusTag : std::uint8_t { kTaskCorpus = 0, kGeneralCorpus = 1 };

inline std::string_view ToString(Objective o) {
  return o == Objective::kLmMasked ? "lm_masked" : "task_head_random";
}
inline std::string_view ToString(CorpusTag c) {
  return c == CorpusTag::kTaskCorpus ? "task_corpus" : "general_corpus";
}

inline Objective ParseObjective(std::string_view s) {
  if (s == "lm_masked") return Objective::kLmMasked;
  if (s == "task_head_random") return Objective::kTaskHeadRandom;
  throw Error(ErrorKind::kInvalid, "unknown objective '" + std::string(s) + "'");
}
inline CorpusTag ParseCorpusTag(std::string_view s) {
  if (s == "task_corpus") return CorpusTag::kTaskCorpus;
  if (s == "general_corpus") return CorpusTag::kGeneralCorpus;
  throw Error(ErrorKind::kInvalid, "unknown corpus tag '" + std::string(s) + "'");
}

// Bits of the u16 flags field of FGRD/FGST/FMSK headers.
namespace flags {
inline constexpr std::uint16_t kStochasticLayersDisabled = 1u << 0;
inline constexpr std::uint16_t kDegenerateMask = 1u << 1;
inline constexpr std::uint16_t kSampledWithReplacement = 1u << 2;
inline constexpr std::uint16_t kTruncatedSequences = 1u << 3;
inline constexpr std::uint16_t kKnown = 0x000f;
}  // namespace flags

// 64-bit FNV-1a.
class Fnv1a64 {
 public:
  void Update(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      state_ ^= p[i];
      state_ *= 0x100000001b3ull;
    }
  }
  void Update(std::string_view s) { Update(s.data(), s.size()); }
  template <typename T>
    requires std::is_integral_v<T>
  void UpdateLe(T value) {
    using U = std::make_unsigned_t<T>;
    const U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const auto byte = static_cast<unsigned char>(u >> (8 * i));
      Update(&byte, 1);
    }
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ull;
};

inline void ValidateLanguageCode(std::string_view code) {
  if (code.empty() || code.size() > kLanguageFieldWidth) {
    throw Error(ErrorKind::kInvalid, "language code '" + std::string(code) +
                                         "' must be 1-8 ASCII characters");
  }
  for (char c : code) {
    const auto u = static_cast<unsigned char>(c);
    if (u <= 0x20 || u >= 0x7f || c == ',') {
      throw Error(ErrorKind::kInvalid,
                  "language code '" + std::string(code) +
                      "' contains a non-printable, space, or comma character");
    }
  }
}

struct TensorSpec {
  std::string name;
  std::vector<std::uint64_t> shape;

  std::uint64_t size() const {
    std::uint64_t n = 1;
    for (auto d : shape) n *= d;
    return n;
  }
  friend bool operator==(const TensorSpec&, const TensorSpec&) = default;
};

// Ordered table of the tensors making up the parameter index space. Parameter
// i of a dump is the i-th scalar when tensors are laid out in order, each in
// row-major order.
class LayoutManifest {
 public:
  LayoutManifest() = default;
  LayoutManifest(std::string model_id, std::vector<TensorSpec> tensors,
                 std::vector<std::string> excluded_groups = {})
      : model_id_(std::move(model_id)),
        tensors_(std::move(tensors)),
        excluded_groups_(std::move(excluded_groups)) {
    if (tensors_.empty()) {
      throw Error(ErrorKind::kInvalid, "manifest has no tensors");
    }
    // Group names are outside the hash, so a charset check guards them.
    for (const auto& g : excluded_groups_) {
      if (g.empty()) throw Error(ErrorKind::kInvalid, "empty excluded group name");
      for (char c : g) {
        const auto u = static_cast<unsigned char>(c);
        if (u <= 0x20 || u >= 0x7f) {
          throw Error(ErrorKind::kInvalid,
                      "excluded group names must be printable ASCII without spaces");
        }
      }
    }
    std::unordered_set<std::string> names;
    for (const auto& t : tensors_) {
      if (t.name.empty()) throw Error(ErrorKind::kInvalid, "empty tensor name");
      if (!names.insert(t.name).second) {
        throw Error(ErrorKind::kInvalid, "duplicate tensor name '" + t.name + "'");
      }
      if (t.shape.empty()) {
        throw Error(ErrorKind::kInvalid, "tensor '" + t.name + "' has no dims");
      }
      for (auto d : t.shape) {
        if (d == 0) {
          throw Error(ErrorKind::kInvalid,
                      "tensor '" + t.name + "' has a zero dimension");
        }
      }
      total_params_ += t.size();
    }
    layout_hash_ = ComputeHash(model_id_, tensors_);
  }

  const std::string& model_id() const { return model_id_; }
  const std::vector<TensorSpec>& tensors() const { return tensors_; }
  const std::vector<std::string>& excluded_groups() const {
    return excluded_groups_;
  }
  std::uint64_t total_params() const { return total_params_; }
  std::uint64_t layout_hash() const { return layout_hash_; }

  // Offset of the named tensor's first scalar in the flat index space.
  std::uint64_t OffsetOf(std::string_view name) const {
    std::uint64_t off = 0;
    for (const auto& t : tensors_) {
      if (t.name == name) return off;
      off += t.size();
    }
    throw Error(ErrorKind::kNotFound, "no tensor named '" + std::string(name) + "'");
  }

  friend bool operator==(const LayoutManifest&, const LayoutManifest&) = default;

  // Canonical serialization: u32 length + model id bytes, u32 tensor count,
  // then per tensor u32 length + name bytes, u32 ndim, u64 dims.
  static std::uint64_t ComputeHash(std::string_view model_id,
                                   const std::vector<TensorSpec>& tensors) {
    Fnv1a64 h;
    h.UpdateLe(static_cast<std::uint32_t>(model_id.size()));
    h.Update(model_id);
    h.UpdateLe(static_cast<std::uint32_t>(tensors.size()));
    for (const auto& t : tensors) {
      h.UpdateLe(static_cast<std::uint32_t>(t.name.size()));
      h.Update(t.name);
      h.UpdateLe(static_cast<std::uint32_t>(t.shape.size()));
      for (auto d : t.shape) h.UpdateLe(d);
    }
    return h.digest();
  }

 private:
  std::string model_id_;
  std::vector<TensorSpec> tensors_;
  std::vector<std::string> excluded_groups_;
  std::uint64_t total_params_ = 0;
  std::uint64_t layout_hash_ = 0;
};

inline std::uint64_t ManifestHash(const LayoutManifest& m) {
  return LayoutManifest::ComputeHash(m.model_id(), m.tensors());
}

inline void RequireSameLayout(std::uint64_t a, std::uint64_t b,
                              std::string_view context) {
  if (a != b) {
    throw Error(ErrorKind::kLayoutMismatch,
                std::string(context) + ": layout hashes differ");
  }
}

// Identifies which run produced a dump or mask.
struct RunTag {
  std::string language;
  Objective objective = Objective::kLmMasked;
  CorpusTag corpus_tag = CorpusTag::kTaskCorpus;
  std::int32_t seed = 0;

  friend bool operator==(const RunTag&, const RunTag&) = default;
};

struct FisherDump {
  LayoutManifest manifest;
  std::vector<float> values;
  std::uint64_t example_count = 0;
  RunTag tag;
  std::uint16_t flags = 0;

  void Validate() const {
    ValidateLanguageCode(tag.language);
    if (values.size() != manifest.total_params()) {
      throw Error(ErrorKind::kInvalid,
                  "dump has " + std::to_string(values.size()) +
                      " values but the manifest declares " +
                      std::to_string(manifest.total_params()));
    }
    if (example_count == 0) {
      throw Error(ErrorKind::kInvalid, "dump example_count must be positive");
    }
    if ((flags & ~flags::kKnown) != 0) {
      throw Error(ErrorKind::kInvalid, "unknown dump flag bits set");
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0f) {
        throw Error(ErrorKind::kInvalid,
                    "value at index " + std::to_string(i) +
                        " is negative or not finite");
      }
    }
  }

  friend bool operator==(const FisherDump&, const FisherDump&) = default;
};

// Number of parameters selected for a top-p fraction of n: ceil(p * n),
// clamped to [1, n]. Products within 1e-9 relative of an integer are
// treated as that integer so that e.g. 0.15 * 100000 yields 15000.
inline std::uint64_t SelectionCount(double p, std::uint64_t n) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::kOutOfRange,
                "p must lie in (0, 1], got " + std::to_string(p));
  }
  const long double x = static_cast<long double>(p) * static_cast<long double>(n);
  const long double r = std::round(x);
  long double k = (std::fabs(x - r) <= 1e-9L * std::max(1.0L, x)) ? r : std::ceil(x);
  if (k < 1) k = 1;
  if (k > static_cast<long double>(n)) k = static_cast<long double>(n);
  return static_cast<std::uint64_t>(k);
}

struct MaskFile {
  std::uint64_t manifest_hash = 0;
  double p = 0.0;
  std::uint64_t k_selected = 0;
  Bitset bits;
  RunTag tag;
  std::uint16_t flags = 0;

  void Validate() const {
    ValidateLanguageCode(tag.language);
    const auto expected = SelectionCount(p, bits.size());
    if (k_selected != expected) {
      throw Error(ErrorKind::kInvalid,
                  "k_selected " + std::to_string(k_selected) +
                      " != ceil(p * total_params) = " + std::to_string(expected));
    }
    const auto pc = bits.Count();
    if (pc != k_selected) {
      throw Error(ErrorKind::kInvalid, "mask popcount " + std::to_string(pc) +
                                           " != k_selected " +
                                           std::to_string(k_selected));
    }
    if ((flags & ~flags::kKnown) != 0) {
      throw Error(ErrorKind::kInvalid, "unknown mask flag bits set");
    }
  }

  friend bool operator==(const MaskFile&, const MaskFile&) = default;
};

namespace detail {

inline constexpr std::uint32_t kMaxNameLength = 1u << 16;
inline constexpr std::uint32_t kMaxNdim = 64;
inline constexpr std::uint32_t kMaxTensors = 1u << 24;

inline void CheckMagic(binary::Reader& r, std::string_view magic) {
  char buf[4];
  r.Bytes(buf, 4, "magic");
  if (std::string_view(buf, 4) != magic) {
    throw Error(ErrorKind::kBadMagic,
                "expected '" + std::string(magic) + "', found '" +
                    std::string(buf, 4) + "'",
                0);
  }
}

inline void CheckVersion(binary::Reader& r) {
  const auto at = r.offset();
  const auto v = r.U16("version");
  if (v != kFormatVersion) {
    throw Error(ErrorKind::kVersionMismatch,
                "file version " + std::to_string(v) + ", reader supports " +
                    std::to_string(kFormatVersion),
                at);
  }
}

inline std::uint16_t ReadFlags(binary::Reader& r) {
  const auto at = r.offset();
  const auto f = r.U16("flags");
  if ((f & ~flags::kKnown) != 0) {
    throw Error(ErrorKind::kInvalid, "unknown flag bits set", at);
  }
  return f;
}

inline void WriteTagFields(binary::Writer& w, const RunTag& tag) {
  w.Padded(tag.language, kLanguageFieldWidth);
  w.U8(static_cast<std::uint8_t>(tag.objective));
  w.U8(static_cast<std::uint8_t>(tag.corpus_tag));
  w.I32(tag.seed);
}

inline RunTag ReadTagFields(binary::Reader& r) {
  RunTag tag;
  auto at = r.offset();
  tag.language = r.Padded(kLanguageFieldWidth, "language");
  try {
    ValidateLanguageCode(tag.language);
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalid, e.message(), at);
  }
  at = r.offset();
  const auto obj = r.U8("objective");
  if (obj > 1) throw Error(ErrorKind::kInvalid, "unknown objective code", at);
  tag.objective = static_cast<Objective>(obj);
  at = r.offset();
  const auto corpus = r.U8("corpus_tag");
  if (corpus > 1) throw Error(ErrorKind::kInvalid, "unknown corpus tag code", at);
  tag.corpus_tag = static_cast<CorpusTag>(corpus);
  tag.seed = r.I32("seed");
  return tag;
}

// Manifest block: model id, excluded groups, then the count-prefixed tensor
// table. Strings are u32 length-prefixed UTF-8.
inline void WriteManifestBlock(binary::Writer& w, const LayoutManifest& m) {
  w.String32(m.model_id());
  w.U32(static_cast<std::uint32_t>(m.excluded_groups().size()));
  for (const auto& g : m.excluded_groups()) w.String32(g);
  w.U32(static_cast<std::uint32_t>(m.tensors().size()));
  for (const auto& t : m.tensors()) {
    w.String32(t.name);
    w.U32(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.U64(d);
  }
}

inline LayoutManifest ReadManifestBlock(binary::Reader& r,
                                        std::uint64_t expected_hash) {
  const auto start = r.offset();
  std::string model_id = r.String32("model id", kMaxNameLength);
  auto at = r.offset();
  const auto n_groups = r.U32("excluded group count");
  if (n_groups > kMaxTensors) {
    throw Error(ErrorKind::kInvalid, "implausible excluded group count", at);
  }
  std::vector<std::string> groups;
  for (std::uint32_t i = 0; i < n_groups; ++i) {
    groups.push_back(r.String32("excluded group", kMaxNameLength));
  }
  at = r.offset();
  const auto n_tensors = r.U32("tensor count");
  if (n_tensors == 0 || n_tensors > kMaxTensors) {
    throw Error(ErrorKind::kInvalid, "implausible tensor count", at);
  }
  std::vector<TensorSpec> tensors;
  tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    TensorSpec t;
    t.name = r.String32("tensor name", kMaxNameLength);
    at = r.offset();
    const auto ndim = r.U32("ndim");
    if (ndim == 0 || ndim > kMaxNdim) {
      throw Error(ErrorKind::kInvalid, "implausible ndim for '" + t.name + "'", at);
    }
    for (std::uint32_t d = 0; d < ndim; ++d) t.shape.push_back(r.U64("dim"));
    tensors.push_back(std::move(t));
  }
  LayoutManifest m;
  try {
    m = LayoutManifest(std::move(model_id), std::move(tensors), std::move(groups));
  } catch (const Error& e) {
    throw Error(ErrorKind::kInvalid, e.message(), start);
  }
  if (m.layout_hash() != expected_hash) {
    throw Error(ErrorKind::kLayoutMismatch,
                "manifest block does not match the header layout_hash", start);
  }
  return m;
}

inline void RequireEnd(binary::Reader& r) {
  if (!r.AtEnd()) {
    throw Error(ErrorKind::kInvalid, "trailing bytes after payload", r.offset());
  }
}

}  // namespace detail

// FGRD: magic "FGRD" | u16 version | u16 flags | char[8] language |
// u8 objective | u8 corpus_tag | i32 seed | u64 example_count |
// u64 layout_hash | manifest block | f32 values[total_params].
inline std::uint64_t WriteDump(const FisherDump& dump, std::ostream& out) {
  dump.Validate();
  binary::Writer w(out);
  w.Bytes("FGRD", 4);
  w.U16(kFormatVersion);
  w.U16(dump.flags);
  detail::WriteTagFields(w, dump.tag);
  w.U64(dump.example_count);
  w.U64(dump.manifest.layout_hash());
  detail::WriteManifestBlock(w, dump.manifest);
  for (float v : dump.values) w.F32(v);
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "flush failed", w.offset());
  return w.offset();
}

inline FisherDump ReadDump(std::istream& in) {
  binary::Reader r(in);
  detail::CheckMagic(r, "FGRD");
  detail::CheckVersion(r);
  FisherDump dump;
  dump.flags = detail::ReadFlags(r);
  dump.tag = detail::ReadTagFields(r);
  const auto count_at = r.offset();
  dump.example_count = r.U64("example_count");
  if (dump.example_count == 0) {
    throw Error(ErrorKind::kInvalid, "example_count must be positive", count_at);
  }
  const auto hash = r.U64("layout_hash");
  dump.manifest = detail::ReadManifestBlock(r, hash);

  const auto n = dump.manifest.total_params();
  const auto values_at = r.offset();
  constexpr std::size_t kChunk = 1 << 16;
  std::vector<unsigned char> buf(kChunk * 4);
  for (std::uint64_t done = 0; done < n;) {
    const std::size_t want = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, n - done));
    const std::size_t got = r.TryBytes(buf.data(), want * 4);
    if (got != want * 4) {
      throw Error(ErrorKind::kTruncated,
                  "expected " + std::to_string(n * 4) + " value bytes, got " +
                      std::to_string(done * 4 + got),
                  r.offset());
    }
    dump.values.resize(done + want);
    for (std::size_t i = 0; i < want; ++i) {
      const std::uint32_t u = std::uint32_t{buf[4 * i]} |
                              (std::uint32_t{buf[4 * i + 1]} << 8) |
                              (std::uint32_t{buf[4 * i + 2]} << 16) |
                              (std::uint32_t{buf[4 * i + 3]} << 24);
      const float v = std::bit_cast<float>(u);
      if (!std::isfinite(v) || v < 0.0f) {
        throw Error(ErrorKind::kInvalid,
                    "value at index " + std::to_string(done + i) +
                        " is negative or not finite",
                    values_at + (done + i) * 4);
      }
      dump.values[done + i] = v;
    }
    done += want;
  }
  detail::RequireEnd(r);
  return dump;
}

// FMSK: magic "FMSK" | u16 version | u16 flags | f64 p | u64 k_selected |
// u64 layout_hash | char[8] language | u8 objective | u8 corpus_tag |
// i32 seed | u64 total_params | u64 words[ceil(total_params / 64)].
inline std::uint64_t WriteMask(const MaskFile& mask, std::ostream& out) {
  mask.Validate();
  binary::Writer w(out);
  w.Bytes("FMSK", 4);
  w.U16(kFormatVersion);
  w.U16(mask.flags);
  w.F64(mask.p);
  w.U64(mask.k_selected);
  w.U64(mask.manifest_hash);
  detail::WriteTagFields(w, mask.tag);
  w.U64(mask.bits.size());
  for (auto word : mask.bits.words()) w.U64(word);
  out.flush();
  if (!out) throw Error(ErrorKind::kIo, "flush failed", w.offset());
  return w.offset();
}

inline MaskFile ReadMask(std::istream& in) {
  binary::Reader r(in);
  detail::CheckMagic(r, "FMSK");
  detail::CheckVersion(r);
  MaskFile mask;
  mask.flags = detail::ReadFlags(r);
  const auto p_at = r.offset();
  mask.p = r.F64("p");
  if (!(mask.p > 0.0 && mask.p <= 1.0)) {
    throw Error(ErrorKind::kInvalid, "p outside (0, 1]", p_at);
  }
  mask.k_selected = r.U64("k_selected");
  mask.manifest_hash = r.U64("layout_hash");
  mask.tag = detail::ReadTagFields(r);
  const auto n_at = r.offset();
  const auto n = r.U64("total_params");
  if (n == 0) throw Error(ErrorKind::kInvalid, "total_params is zero", n_at);
  if (mask.k_selected != SelectionCount(mask.p, n)) {
    throw Error(ErrorKind::kInvalid, "k_selected does not equal ceil(p * total_params)", n_at);
  }
  const auto n_words = Bitset::WordCount(n);
  // Grown as bytes arrive so that a corrupt length cannot force a huge
  // allocation ahead of the truncation check.
  std::vector<std::uint64_t> words;
  words.reserve(std::min<std::uint64_t>(n_words, 1u << 20));
  const auto words_at = r.offset();
  for (std::size_t i = 0; i < n_words; ++i) {
    std::array<unsigned char, 8> b;
    const auto got = r.TryBytes(b.data(), 8);
    if (got != 8) {
      throw Error(ErrorKind::kTruncated,
                  "expected " + std::to_string(n_words * 8) + " bitset bytes, got " +
                      std::to_string(i * 8 + got),
                  r.offset());
    }
    std::uint64_t word = 0;
    for (int j = 0; j < 8; ++j) word |= std::uint64_t{b[j]} << (8 * j);
    words.push_back(word);
  }
  try {
    mask.bits = Bitset::FromWords(n, std::move(words));
    mask.Validate();
  } catch (const Error& e) {
    throw Error(e.kind(), e.message(), words_at);
  }
  detail::RequireEnd(r);
  return mask;
}

// FGST: magic "FGST" | u16 version | u16 flags | char[8] language |
// u8 objective | u8 corpus_tag | i32 seed | u64 layout_hash | manifest block |
// records, each f32[total_params], until end of file.
class GradientStreamWriter {
 public:
  GradientStreamWriter(std::ostream& out, const LayoutManifest& manifest,
                       const RunTag& tag, std::uint16_t stream_flags = 0)
      : out_(out), writer_(out), total_(manifest.total_params()) {
    ValidateLanguageCode(tag.language);
    writer_.Bytes("FGST", 4);
    writer_.U16(kFormatVersion);
    writer_.U16(stream_flags);
    detail::WriteTagFields(writer_, tag);
    writer_.U64(manifest.layout_hash());
    detail::WriteManifestBlock(writer_, manifest);
  }

  template <typename T>
  void Append(std::span<const T> grad) {
    if (grad.size() != total_) {
      throw Error(ErrorKind::kInvalid,
                  "gradient record has " + std::to_string(grad.size()) +
                      " entries, expected " + std::to_string(total_));
    }
    for (T g : grad) writer_.F32(static_cast<float>(g));
  }
  void Append(const std::vector<double>& grad) {
    Append(std::span<const double>(grad));
  }

  std::uint64_t bytes_written() const { return writer_.offset(); }
  void Flush() {
    out_.flush();
    if (!out_) throw Error(ErrorKind::kIo, "flush failed", writer_.offset());
  }

 private:
  std::ostream& out_;
  binary::Writer writer_;
  std::uint64_t total_;
};

class GradientStreamReader {
 public:
  explicit GradientStreamReader(std::istream& in) : reader_(in) {
    detail::CheckMagic(reader_, "FGST");
    detail::CheckVersion(reader_);
    flags_ = detail::ReadFlags(reader_);
    tag_ = detail::ReadTagFields(reader_);
    const auto hash = reader_.U64("layout_hash");
    manifest_ = detail::ReadManifestBlock(reader_, hash);
    header_bytes_ = reader_.offset();
    buf_.resize(manifest_.total_params() * 4);
  }

  const LayoutManifest& manifest() const { return manifest_; }
  const RunTag& tag() const { return tag_; }
  std::uint16_t flags() const { return flags_; }
  std::uint64_t header_bytes() const { return header_bytes_; }
  std::uint64_t record_bytes() const { return buf_.size(); }

  // Reads the next record into grad. Returns false at a clean end of stream.
  bool Next(std::vector<double>& grad) {
    const auto at = reader_.offset();
    const auto got = reader_.TryBytes(buf_.data(), buf_.size());
    if (got == 0) return false;
    if (got != buf_.size()) {
      throw Error(ErrorKind::kTruncated,
                  "gradient record expected " + std::to_string(buf_.size()) +
                      " bytes, got " + std::to_string(got),
                  at);
    }
    grad.resize(manifest_.total_params());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const std::uint32_t u = std::uint32_t{buf_[4 * i]} |
                              (std::uint32_t{buf_[4 * i + 1]} << 8) |
                              (std::uint32_t{buf_[4 * i + 2]} << 16) |
                              (std::uint32_t{buf_[4 * i + 3]} << 24);
      grad[i] = static_cast<double>(std::bit_cast<float>(u));
    }
    return true;
  }

 private:
  binary::Reader reader_;
  std::uint16_t flags_ = 0;
  RunTag tag_;
  LayoutManifest manifest_;
  std::uint64_t header_bytes_ = 0;
  std::vector<unsigned char> buf_;
};

// File-path conveniences. A path that cannot be opened is kNotFound.
inline std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kNotFound, "cannot open '" + path + "'");
  return in;
}

inline std::ofstream OpenOutput(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot create '" + path + "'");
  return out;
}

inline std::uint64_t SaveDump(const FisherDump& dump, const std::string& path) {
  auto out = OpenOutput(path);
  return WriteDump(dump, out);
}
inline FisherDump LoadDump(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadDump(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}
inline std::uint64_t SaveMask(const MaskFile& mask, const std::string& path) {
  auto out = OpenOutput(path);
  return WriteMask(mask, out);
}
inline MaskFile LoadMask(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadMask(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}

}  // namespace xlt
