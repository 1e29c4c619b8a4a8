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

// Comparison predictors of transfer quality:
//
//   lex  Jensen-Shannon divergence of subword unigram distributions
//   sue  subword evenness angle, a per-language score
//   emb  cosine of mean-pooled sentence embeddings
//   l2v  cosine of typological feature vectors
//
// lex and sue rank lower values first; emb and l2v rank higher values first.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/similarity.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

// ---------------------------------------------------------------------------
// Vocabulary and greedy longest-match tokenization.

// Pieces that continue a word carry this prefix in the vocabulary; pieces
// starting a word carry none.
inline constexpr std::string_view kContinuationMarker = "##";

class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    Fnv1a64 h;
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (tokens_[i].empty()) {
        throw Error(ErrorKind::kInvalid,
                    "empty vocabulary entry at id " + std::to_string(i));
      }
      if (!ids_.emplace(tokens_[i], static_cast<std::uint32_t>(i)).second) {
        throw Error(ErrorKind::kInvalid, "duplicate vocabulary entry '" + tokens_[i] + "'");
      }
      h.UpdateLe(static_cast<std::uint32_t>(tokens_[i].size()));
      h.Update(tokens_[i]);
    }
    id_ = h.digest();
  }

  std::size_t size() const { return tokens_.size(); }
  std::uint64_t id() const { return id_; }
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }

  std::optional<std::uint32_t> Find(std::string_view piece) const {
    auto it = ids_.find(std::string(piece));
    if (it == ids_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::uint32_t> ids_;
  std::uint64_t id_ = 0;
};

// One token per line; the zero-based line number is the token id.
inline Vocabulary ReadVocabulary(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  if (tokens.empty()) throw Error(ErrorKind::kInvalid, "empty vocabulary");
  return Vocabulary(std::move(tokens));
}

inline Vocabulary LoadVocabulary(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadVocabulary(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}

namespace detail {

inline bool IsUtf8Continuation(char c) {
  return (static_cast<unsigned char>(c) & 0xC0) == 0x80;
}

}  // namespace detail

inline std::size_t CodepointCount(std::string_view s) {
  return static_cast<std::size_t>(
      std::count_if(s.begin(), s.end(), [](char c) { return !detail::IsUtf8Continuation(c); }));
}

struct Piece {
  std::uint32_t id;
  std::string text;  // including the continuation marker, if any
};

// Greedy longest match, left to right, cutting only at codepoint boundaries.
// Fails if some position has no matching piece, not even a single character.
inline std::vector<Piece> TokenizeWord(std::string_view word, const Vocabulary& vocab) {
  if (word.empty()) throw Error(ErrorKind::kInvalid, "cannot tokenize an empty word");
  std::vector<Piece> out;
  std::size_t pos = 0;
  while (pos < word.size()) {
    const std::string prefix = pos == 0 ? "" : std::string(kContinuationMarker);
    std::optional<Piece> best;
    for (std::size_t end = word.size(); end > pos; --end) {
      if (end < word.size() && detail::IsUtf8Continuation(word[end])) continue;
      const std::string candidate = prefix + std::string(word.substr(pos, end - pos));
      if (auto id = vocab.Find(candidate)) {
        best = Piece{*id, candidate};
        pos = end;
        break;
      }
    }
    if (!best) {
      throw Error(ErrorKind::kNotFound,
                  "no vocabulary piece covers position " + std::to_string(pos) +
                      " of word '" + std::string(word) + "'");
    }
    out.push_back(std::move(*best));
  }
  return out;
}

inline std::vector<std::string> SplitWords(std::string_view line) {
  std::vector<std::string> words;
  std::istringstream ss{std::string(line)};
  std::string w;
  while (ss >> w) words.push_back(w);
  return words;
}

// ---------------------------------------------------------------------------
// LEX.

struct UnigramDistribution {
  std::string language;
  std::map<std::uint32_t, double> probs;  // observed tokens only
  std::uint64_t vocab_id = 0;
};

class UnigramCounter {
 public:
  explicit UnigramCounter(std::uint64_t vocab_id) : vocab_id_(vocab_id) {}

  void Add(std::uint32_t id) {
    ++counts_[id];
    ++total_;
  }
  void MergeFrom(const UnigramCounter& other) {
    if (other.vocab_id_ != vocab_id_) {
      throw Error(ErrorKind::kInvalid, "merging unigram counts over different vocabularies");
    }
    for (const auto& [id, c] : other.counts_) counts_[id] += c;
    total_ += other.total_;
  }
  std::uint64_t total() const { return total_; }

  UnigramDistribution Normalize(std::string language) const {
    if (total_ == 0) throw Error(ErrorKind::kInvalid, "empty corpus");
    UnigramDistribution d{std::move(language), {}, vocab_id_};
    const double n = static_cast<double>(total_);
    for (const auto& [id, c] : counts_) d.probs[id] = static_cast<double>(c) / n;
    return d;
  }

 private:
  std::uint64_t vocab_id_;
  std::map<std::uint32_t, std::uint64_t> counts_;
  std::uint64_t total_ = 0;
};

// Raw text lines, whitespace-split into words, each word tokenized.
inline UnigramDistribution BuildUnigramDistribution(std::span<const std::string> lines,
                                                    const Vocabulary& vocab,
                                                    std::string language = "") {
  UnigramCounter counter(vocab.id());
  for (const auto& line : lines) {
    for (const auto& w : SplitWords(line)) {
      for (const auto& piece : TokenizeWord(w, vocab)) counter.Add(piece.id);
    }
  }
  return counter.Normalize(std::move(language));
}

// Pre-tokenized corpus of token ids.
inline UnigramDistribution BuildUnigramDistribution(
    std::span<const std::vector<std::uint32_t>> sentences, std::uint64_t vocab_id,
    std::size_t vocab_size, std::string language = "") {
  UnigramCounter counter(vocab_id);
  for (const auto& s : sentences) {
    for (auto id : s) {
      if (id >= vocab_size) {
        throw Error(ErrorKind::kOutOfRange,
                    "token id " + std::to_string(id) + " outside vocabulary");
      }
      counter.Add(id);
    }
  }
  return counter.Normalize(std::move(language));
}

// Base-2 Jensen-Shannon divergence, in [0, 1].
inline double Jsd(const UnigramDistribution& p, const UnigramDistribution& q) {
  if (p.vocab_id != q.vocab_id) {
    throw Error(ErrorKind::kInvalid, "jsd over distributions from different vocabularies");
  }
  auto half_kl = [](double a, double m) { return a > 0.0 ? 0.5 * a * std::log2(a / m) : 0.0; };
  double js = 0.0;
  auto ip = p.probs.begin();
  auto iq = q.probs.begin();
  while (ip != p.probs.end() || iq != q.probs.end()) {
    double a = 0.0;
    double b = 0.0;
    if (iq == q.probs.end() || (ip != p.probs.end() && ip->first < iq->first)) {
      a = (ip++)->second;
    } else if (ip == p.probs.end() || iq->first < ip->first) {
      b = (iq++)->second;
    } else {
      a = (ip++)->second;
      b = (iq++)->second;
    }
    const double m = 0.5 * (a + b);
    js += half_kl(a, m) + half_kl(b, m);
  }
  return std::clamp(js, 0.0, 1.0);
}

// Row t, column s holds JSD(D_s, D_t); languages in input order.
inline SimilarityMatrix BuildLexMatrix(std::span<const UnigramDistribution> dists) {
  std::vector<std::string> langs;
  for (const auto& d : dists) langs.push_back(d.language);
  SimilarityMatrix m(langs, Method::kLex);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    for (std::size_t j = i + 1; j < dists.size(); ++j) {
      m.at(i, j) = m.at(j, i) = Jsd(dists[i], dists[j]);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// SuE.

// U = (longest piece length) / (word length) - 1 / (piece count), lengths in
// codepoints with continuation markers stripped. Zero for an even split.
inline double Unevenness(std::string_view word, std::span<const std::string> subwords) {
  if (word.empty()) throw Error(ErrorKind::kInvalid, "unevenness of an empty word");
  if (subwords.empty()) throw Error(ErrorKind::kInvalid, "segmentation has no pieces");
  std::string joined;
  std::size_t longest = 0;
  for (std::string_view s : subwords) {
    if (s.starts_with(kContinuationMarker)) s.remove_prefix(kContinuationMarker.size());
    if (s.empty()) throw Error(ErrorKind::kInvalid, "empty piece in segmentation");
    joined += s;
    longest = std::max(longest, CodepointCount(s));
  }
  if (joined != word) {
    throw Error(ErrorKind::kInvalid,
                "pieces concatenate to '" + joined + "', not '" + std::string(word) + "'");
  }
  const double m = static_cast<double>(subwords.size());
  return static_cast<double>(longest) / static_cast<double>(CodepointCount(word)) - 1.0 / m;
}

struct SuEPoint {
  std::size_t word_length;
  double unevenness;
};

struct SuEPointCloud {
  std::vector<SuEPoint> points;
};

inline SuEPointCloud BuildSuECloud(std::span<const std::string> lines, const Vocabulary& vocab) {
  SuEPointCloud cloud;
  for (const auto& line : lines) {
    for (const auto& w : SplitWords(line)) {
      const auto pieces = TokenizeWord(w, vocab);
      std::vector<std::string> texts;
      for (const auto& p : pieces) texts.push_back(p.text);
      cloud.points.push_back({CodepointCount(w), Unevenness(w, texts)});
    }
  }
  return cloud;
}

struct Point2 {
  double x;
  double y;
};

// Per-word-length minimum unevenness, both axes min-max scaled to [0, 1]. A
// constant axis maps to 0.
inline std::vector<Point2> LowerEnvelope(const SuEPointCloud& cloud) {
  if (cloud.points.empty()) throw Error(ErrorKind::kInvalid, "empty SuE point cloud");
  std::map<std::size_t, double> lowest;
  for (const auto& p : cloud.points) {
    if (p.word_length == 0) throw Error(ErrorKind::kInvalid, "word length must be >= 1");
    auto [it, inserted] = lowest.emplace(p.word_length, p.unevenness);
    if (!inserted) it->second = std::min(it->second, p.unevenness);
  }
  if (lowest.size() < 2) {
    throw Error(ErrorKind::kUndefined,
                "degenerate SuE envelope: all words have the same length");
  }
  const double x0 = static_cast<double>(lowest.begin()->first);
  const double x1 = static_cast<double>(lowest.rbegin()->first);
  double y0 = lowest.begin()->second;
  double y1 = y0;
  for (const auto& [_, y] : lowest) {
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  }
  std::vector<Point2> env;
  for (const auto& [x, y] : lowest) {
    env.push_back({(static_cast<double>(x) - x0) / (x1 - x0),
                   y1 > y0 ? (y - y0) / (y1 - y0) : 0.0});
  }
  return env;
}

inline double LeastSquaresSlope(std::span<const Point2> pts) {
  if (pts.size() < 2) throw Error(ErrorKind::kUndefined, "slope needs at least two points");
  double mx = 0.0;
  double my = 0.0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxy = 0.0;
  double sxx = 0.0;
  for (const auto& p : pts) {
    sxy += (p.x - mx) * (p.y - my);
    sxx += (p.x - mx) * (p.x - mx);
  }
  if (sxx == 0.0) throw Error(ErrorKind::kUndefined, "slope undefined: x has no spread");
  return sxy / sxx;
}

// 180 - |atan 1| - |atan k|, in degrees.
inline double SuEFromSlope(double k) {
  constexpr double kDeg = 180.0 / std::numbers::pi;
  return 180.0 - 45.0 - std::fabs(std::atan(k)) * kDeg;
}

inline double SueScore(const SuEPointCloud& cloud) {
  const auto env = LowerEnvelope(cloud);
  return SuEFromSlope(LeastSquaresSlope(env));
}

// SuE scores describe sources only: every row repeats the candidates' scores.
inline SimilarityMatrix BuildSueMatrix(const std::vector<std::pair<std::string, double>>& scores) {
  std::vector<std::string> langs;
  for (const auto& [l, _] : scores) langs.push_back(l);
  SimilarityMatrix m(langs, Method::kSue);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) m.at(i, j) = scores[j].second;
  }
  return m;
}

// ---------------------------------------------------------------------------
// EMB and L2V.

enum class VectorKind { kTypological, kEmbedding };

inline std::string_view ToString(VectorKind k) {
  return k == VectorKind::kTypological ? "typological" : "embedding";
}
inline VectorKind ParseVectorKind(std::string_view s) {
  if (s == "typological") return VectorKind::kTypological;
  if (s == "embedding") return VectorKind::kEmbedding;
  throw Error(ErrorKind::kInvalid, "unknown vector kind '" + std::string(s) + "'");
}

struct LanguageVector {
  std::string language;
  std::vector<double> vector;
  VectorKind kind = VectorKind::kEmbedding;

  std::size_t dim() const { return vector.size(); }
};

inline double Cosine(const LanguageVector& a, const LanguageVector& b) {
  if (a.kind != b.kind) throw Error(ErrorKind::kInvalid, "cosine of vectors of different kinds");
  if (a.dim() != b.dim() || a.dim() == 0) {
    throw Error(ErrorKind::kInvalid, "cosine of vectors with dims " + std::to_string(a.dim()) +
                                         " and " + std::to_string(b.dim()));
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.vector[i] * b.vector[i];
    na += a.vector[i] * a.vector[i];
    nb += b.vector[i] * b.vector[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw Error(ErrorKind::kUndefined,
                "cosine with a zero vector (" + a.language + ", " + b.language + ")");
  }
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// Arithmetic mean with per-coordinate compensated (Neumaier) summation.
inline LanguageVector MeanPoolEmbeddings(std::span<const std::vector<double>> rows,
                                         std::string language = "") {
  if (rows.empty()) throw Error(ErrorKind::kInvalid, "no vectors to pool");
  const std::size_t dim = rows[0].size();
  std::vector<double> sum(dim, 0.0);
  std::vector<double> comp(dim, 0.0);
  for (const auto& r : rows) {
    if (r.size() != dim) throw Error(ErrorKind::kInvalid, "ragged vector dimensions");
    for (std::size_t i = 0; i < dim; ++i) {
      const double t = sum[i] + r[i];
      comp[i] += std::fabs(sum[i]) >= std::fabs(r[i]) ? (sum[i] - t) + r[i] : (r[i] - t) + sum[i];
      sum[i] = t;
    }
  }
  LanguageVector out{std::move(language), std::vector<double>(dim), VectorKind::kEmbedding};
  const double n = static_cast<double>(rows.size());
  for (std::size_t i = 0; i < dim; ++i) out.vector[i] = (sum[i] + comp[i]) / n;
  return out;
}

inline SimilarityMatrix BuildCosineMatrix(std::span<const LanguageVector> vecs, Method method) {
  std::vector<std::string> langs;
  for (const auto& v : vecs) langs.push_back(v.language);
  SimilarityMatrix m(langs, method);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    m.at(i, i) = 1.0;
    for (std::size_t j = i + 1; j < vecs.size(); ++j) {
      m.at(i, j) = m.at(j, i) = Cosine(vecs[i], vecs[j]);
    }
  }
  return m;
}

// Language-vector file: optional "# key=value" lines (kind=typological or
// kind=embedding, pooling=..., and so on), then one language per line: the
// code followed by whitespace-separated decimals.
struct LanguageVectorFile {
  VectorKind kind = VectorKind::kEmbedding;
  std::map<std::string, std::string> metadata;
  std::vector<LanguageVector> vectors;
};

inline LanguageVectorFile ReadLanguageVectors(std::istream& in) {
  LanguageVectorFile f;
  std::string line;
  int line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      key.erase(key.find_last_not_of(' ') + 1);
      auto val = line.substr(eq + 1);
      val.erase(0, val.find_first_not_of(' '));
      val.erase(val.find_last_not_of(' ') + 1);
      if (key == "kind") f.kind = ParseVectorKind(val);
      f.metadata[key] = val;
      continue;
    }
    std::istringstream ss(line);
    LanguageVector v;
    ss >> v.language;
    ValidateLanguageCode(v.language);
    std::string tok;
    while (ss >> tok) {
      v.vector.push_back(detail::ParseReal(tok, "vector line " + std::to_string(line_no)));
      if (!std::isfinite(v.vector.back())) {
        throw Error(ErrorKind::kInvalid,
                    "non-finite entry on vector line " + std::to_string(line_no));
      }
    }
    if (v.vector.empty()) {
      throw Error(ErrorKind::kInvalid, "vector line " + std::to_string(line_no) + " has no values");
    }
    if (dim == 0) dim = v.vector.size();
    if (v.vector.size() != dim) {
      throw Error(ErrorKind::kInvalid, "vector line " + std::to_string(line_no) +
                                           " has dim " + std::to_string(v.vector.size()) +
                                           ", expected " + std::to_string(dim));
    }
    f.vectors.push_back(std::move(v));
  }
  for (auto& v : f.vectors) v.kind = f.kind;
  if (f.vectors.empty()) throw Error(ErrorKind::kInvalid, "no language vectors");
  return f;
}

inline void WriteLanguageVectors(const LanguageVectorFile& f, std::ostream& out) {
  out << "# kind=" << ToString(f.kind) << '\n';
  for (const auto& [k, v] : f.metadata) {
    if (k != "kind") out << "# " << k << '=' << v << '\n';
  }
  for (const auto& v : f.vectors) {
    out << v.language;
    for (double x : v.vector) out << ' ' << FormatReal(x);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing language vectors");
}

inline LanguageVectorFile LoadLanguageVectors(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadLanguageVectors(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}

}  // namespace xlt
