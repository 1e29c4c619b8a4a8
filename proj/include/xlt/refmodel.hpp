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

// A small masked-token model with hand-written backprop, plus synthetic
// language families, so the whole pipeline can run and be checked without
// an external network.
//
// Architecture, all in double precision:
//
//   c = mean over positions of E[token]   (E[mask_id] at masked positions)
//   h = tanh(c W1 + b1)
//   z = h W2 + b2,  p = softmax(z)
//
// The scored parameters theta are W1 [embed x hidden], b1 [hidden],
// W2 [hidden x vocab] and b2 [vocab], flattened in that order, row-major.
// The embedding table E and any classification head sit outside theta.
//
// Gradients returned are of the log-likelihood, d log p / d theta.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/fisher.hpp"
#include "xlt/rng.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

inline constexpr double kMlmMaskRatio = 0.15;
inline constexpr int kDefaultNumLabels = 3;

using Sentence = std::vector<std::uint32_t>;

struct ToyModelConfig {
  int vocab_size = 64;
  int embed_dim = 16;
  int hidden_dim = 32;
  std::uint64_t seed = 0;
  double weight_scale = 0.5;     // theta ~ U(-scale, scale)
  double embedding_scale = 1.0;  // E ~ U(-scale, scale)
};

class ToyModel {
 public:
  explicit ToyModel(const ToyModelConfig& cfg) : cfg_(cfg) {
    if (cfg.vocab_size < 2 || cfg.embed_dim < 1 || cfg.hidden_dim < 1) {
      throw Error(ErrorKind::kInvalid, "toy model dimensions must be positive (vocab >= 2)");
    }
    theta_.assign(NumParams(), 0.0);
    embeddings_.assign(static_cast<std::size_t>(cfg.vocab_size + 1) * cfg.embed_dim, 0.0);
    Rng rng(cfg.seed, 0);
    for (auto& e : embeddings_) e = rng.Uniform(-cfg.embedding_scale, cfg.embedding_scale);
    Rng wrng(cfg.seed, 1);
    for (auto& w : theta_) w = wrng.Uniform(-cfg.weight_scale, cfg.weight_scale);
  }

  // Same embeddings as ToyModel(cfg) but theta = 0.
  static ToyModel ZeroTheta(const ToyModelConfig& cfg) {
    ToyModel m(cfg);
    std::fill(m.theta_.begin(), m.theta_.end(), 0.0);
    return m;
  }

  const ToyModelConfig& config() const { return cfg_; }
  int vocab_size() const { return cfg_.vocab_size; }
  int embed_dim() const { return cfg_.embed_dim; }
  int hidden_dim() const { return cfg_.hidden_dim; }
  std::uint32_t mask_id() const { return static_cast<std::uint32_t>(cfg_.vocab_size); }

  std::size_t NumParams() const {
    const std::size_t e = cfg_.embed_dim, h = cfg_.hidden_dim, v = cfg_.vocab_size;
    return e * h + h + h * v + v;
  }
  std::size_t OffsetW1() const { return 0; }
  std::size_t OffsetB1() const { return static_cast<std::size_t>(cfg_.embed_dim) * cfg_.hidden_dim; }
  std::size_t OffsetW2() const { return OffsetB1() + cfg_.hidden_dim; }
  std::size_t OffsetB2() const {
    return OffsetW2() + static_cast<std::size_t>(cfg_.hidden_dim) * cfg_.vocab_size;
  }

  std::vector<double>& theta() { return theta_; }
  const std::vector<double>& theta() const { return theta_; }
  std::span<const double> Embedding(std::uint32_t row) const {
    return {embeddings_.data() + static_cast<std::size_t>(row) * cfg_.embed_dim,
            static_cast<std::size_t>(cfg_.embed_dim)};
  }

  LayoutManifest Manifest() const {
    const auto e = static_cast<std::uint64_t>(cfg_.embed_dim);
    const auto h = static_cast<std::uint64_t>(cfg_.hidden_dim);
    const auto v = static_cast<std::uint64_t>(cfg_.vocab_size);
    return LayoutManifest("toy-mlm/v" + std::to_string(v) + "-e" + std::to_string(e) + "-h" +
                              std::to_string(h),
                          {{"W1", {e, h}}, {"b1", {h}}, {"W2", {h, v}}, {"b2", {v}}},
                          {"embeddings", "task_head"});
  }

 private:
  ToyModelConfig cfg_;
  std::vector<double> theta_;
  std::vector<double> embeddings_;
};

struct LogProbGrad {
  double logprob = 0.0;
  std::vector<double> grad;
};

// Masks max(1, round(0.15 * length)) distinct positions drawn from mask_seed.
inline std::vector<std::size_t> MaskedPositions(std::size_t length, std::uint64_t mask_seed) {
  if (length == 0) throw Error(ErrorKind::kInvalid, "empty sentence");
  const auto m = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(kMlmMaskRatio * static_cast<double>(length))));
  auto pos = SampleIndices(length, m, mask_seed);
  std::sort(pos.begin(), pos.end());
  return pos;
}

namespace detail {

inline void CheckTokens(const ToyModel& model, std::span<const std::uint32_t> sentence) {
  if (sentence.empty()) throw Error(ErrorKind::kInvalid, "empty sentence");
  for (auto t : sentence) {
    if (t >= static_cast<std::uint32_t>(model.vocab_size())) {
      throw Error(ErrorKind::kOutOfRange, "token " + std::to_string(t) + " outside vocabulary of " +
                                              std::to_string(model.vocab_size()));
    }
  }
}

// Mean of embedding rows; masked positions read the mask row.
inline std::vector<double> Context(const ToyModel& model, std::span<const std::uint32_t> sentence,
                                   std::span<const std::size_t> masked) {
  std::vector<double> c(model.embed_dim(), 0.0);
  std::size_t next_masked = 0;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    std::uint32_t row = sentence[i];
    if (next_masked < masked.size() && masked[next_masked] == i) {
      row = model.mask_id();
      ++next_masked;
    }
    const auto e = model.Embedding(row);
    for (int d = 0; d < model.embed_dim(); ++d) c[d] += e[d];
  }
  for (auto& x : c) x /= static_cast<double>(sentence.size());
  return c;
}

inline std::vector<double> Hidden(const ToyModel& model, const std::vector<double>& c) {
  const int E = model.embed_dim(), H = model.hidden_dim();
  const auto& th = model.theta();
  std::vector<double> h(H);
  for (int j = 0; j < H; ++j) {
    double a = th[model.OffsetB1() + j];
    for (int e = 0; e < E; ++e) a += c[e] * th[model.OffsetW1() + static_cast<std::size_t>(e) * H + j];
    h[j] = std::tanh(a);
  }
  return h;
}

// Softmax in place; returns log-sum-exp of the input.
inline double SoftmaxInPlace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (auto& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (auto& v : z) v /= s;
  return mx + std::log(s);
}

// Backprop from dL/dh into W1 and b1.
inline void BackpropHidden(const ToyModel& model, const std::vector<double>& c,
                           const std::vector<double>& h, const std::vector<double>& dh,
                           std::vector<double>& grad) {
  const int E = model.embed_dim(), H = model.hidden_dim();
  for (int j = 0; j < H; ++j) {
    const double da = dh[j] * (1.0 - h[j] * h[j]);
    grad[model.OffsetB1() + j] = da;
    for (int e = 0; e < E; ++e) grad[model.OffsetW1() + static_cast<std::size_t>(e) * H + j] = c[e] * da;
  }
}

}  // namespace detail

// Masked-token log-likelihood: sum over masked positions of log p(true token).
inline LogProbGrad MlmLogProbAndGrad(const ToyModel& model, std::span<const std::uint32_t> sentence,
                                     std::uint64_t mask_seed, bool want_grad = true) {
  detail::CheckTokens(model, sentence);
  const int H = model.hidden_dim(), V = model.vocab_size();
  const auto masked = MaskedPositions(sentence.size(), mask_seed);
  const auto c = detail::Context(model, sentence, masked);
  const auto h = detail::Hidden(model, c);
  const auto& th = model.theta();

  std::vector<double> z(V);
  for (int v = 0; v < V; ++v) {
    double s = th[model.OffsetB2() + v];
    for (int j = 0; j < H; ++j) s += h[j] * th[model.OffsetW2() + static_cast<std::size_t>(j) * V + v];
    z[v] = s;
  }
  std::vector<double> prob = z;
  const double lse = detail::SoftmaxInPlace(prob);

  LogProbGrad out;
  std::vector<double> dz(V, 0.0);
  for (auto pos : masked) {
    out.logprob += z[sentence[pos]] - lse;
    dz[sentence[pos]] += 1.0;
  }
  if (!want_grad) return out;

  const double m = static_cast<double>(masked.size());
  for (int v = 0; v < V; ++v) dz[v] -= m * prob[v];

  out.grad.assign(model.NumParams(), 0.0);
  std::vector<double> dh(H, 0.0);
  for (int j = 0; j < H; ++j) {
    const std::size_t row = model.OffsetW2() + static_cast<std::size_t>(j) * V;
    double acc = 0.0;
    for (int v = 0; v < V; ++v) {
      out.grad[row + v] = h[j] * dz[v];
      acc += th[row + v] * dz[v];
    }
    dh[j] = acc;
  }
  for (int v = 0; v < V; ++v) out.grad[model.OffsetB2() + v] = dz[v];
  detail::BackpropHidden(model, c, h, dh, out.grad);
  return out;
}

// Frozen random classifier applied to h; it is not part of theta.
struct TaskHead {
  int num_labels = kDefaultNumLabels;
  int hidden_dim = 0;
  std::vector<double> weights;  // [num_labels x hidden_dim]
  std::vector<double> bias;     // [num_labels]

  static TaskHead Random(int num_labels, int hidden_dim, std::uint64_t head_seed,
                         double scale = 1.0) {
    if (num_labels < 2) throw Error(ErrorKind::kInvalid, "task head needs at least 2 labels");
    TaskHead head{num_labels, hidden_dim,
                  std::vector<double>(static_cast<std::size_t>(num_labels) * hidden_dim),
                  std::vector<double>(num_labels)};
    Rng rng(head_seed, 0x7a5c);
    for (auto& w : head.weights) w = rng.Uniform(-scale, scale);
    for (auto& b : head.bias) b = rng.Uniform(-scale, scale);
    return head;
  }
};

// Cross-entropy log-likelihood of `label` under the frozen head. Gradients
// reach W1 and b1 only; the W2/b2 entries are zero.
inline LogProbGrad TaskHeadLogProbAndGrad(const ToyModel& model,
                                          std::span<const std::uint32_t> sentence, int label,
                                          const TaskHead& head, bool want_grad = true) {
  detail::CheckTokens(model, sentence);
  if (head.hidden_dim != model.hidden_dim()) {
    throw Error(ErrorKind::kInvalid, "task head width does not match the model");
  }
  if (label < 0 || label >= head.num_labels) {
    throw Error(ErrorKind::kOutOfRange, "label " + std::to_string(label) + " outside [0, " +
                                            std::to_string(head.num_labels) + ")");
  }
  const int H = model.hidden_dim(), L = head.num_labels;
  const auto c = detail::Context(model, sentence, {});
  const auto h = detail::Hidden(model, c);
  std::vector<double> logits(L);
  for (int l = 0; l < L; ++l) {
    double s = head.bias[l];
    for (int j = 0; j < H; ++j) s += head.weights[static_cast<std::size_t>(l) * H + j] * h[j];
    logits[l] = s;
  }
  std::vector<double> prob = logits;
  const double lse = detail::SoftmaxInPlace(prob);
  LogProbGrad out;
  out.logprob = logits[label] - lse;
  if (!want_grad) return out;

  out.grad.assign(model.NumParams(), 0.0);
  std::vector<double> dh(H, 0.0);
  for (int l = 0; l < L; ++l) {
    const double dl = (l == label ? 1.0 : 0.0) - prob[l];
    for (int j = 0; j < H; ++j) dh[j] += head.weights[static_cast<std::size_t>(l) * H + j] * dl;
  }
  detail::BackpropHidden(model, c, h, dh, out.grad);
  return out;
}

inline LogProbGrad TaskHeadLogProbAndGrad(const ToyModel& model,
                                          std::span<const std::uint32_t> sentence, int label,
                                          std::uint64_t head_seed,
                                          int num_labels = kDefaultNumLabels) {
  return TaskHeadLogProbAndGrad(model, sentence, label,
                                TaskHead::Random(num_labels, model.hidden_dim(), head_seed));
}

// Mean-pooled context embedding of an unmasked sentence.
inline std::vector<double> SentenceEmbedding(const ToyModel& model,
                                             std::span<const std::uint32_t> sentence) {
  detail::CheckTokens(model, sentence);
  return detail::Context(model, sentence, {});
}

// ---------------------------------------------------------------------------
// Synthetic languages.

struct SyntheticLanguage {
  std::string code;
  int family = 0;
  std::vector<double> token_distribution;
  std::uint64_t corpus_seed = 0;
};

// Sentence i draws from its own stream keyed by (corpus_seed, i): a length
// uniform in [min_len, max_len], then i.i.d. tokens.
inline std::vector<Sentence> GenerateCorpus(const SyntheticLanguage& lang, std::size_t n,
                                            std::size_t min_len, std::size_t max_len) {
  if (n == 0) throw Error(ErrorKind::kInvalid, "corpus size must be >= 1");
  if (min_len == 0 || max_len < min_len) {
    throw Error(ErrorKind::kInvalid, "invalid sentence length range [" + std::to_string(min_len) +
                                         ", " + std::to_string(max_len) + "]");
  }
  std::vector<double> cdf(lang.token_distribution.size());
  std::partial_sum(lang.token_distribution.begin(), lang.token_distribution.end(), cdf.begin());
  std::vector<Sentence> corpus(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(lang.corpus_seed, i);
    const std::size_t len = min_len + rng.Below(max_len - min_len + 1);
    corpus[i].resize(len);
    for (auto& tok : corpus[i]) {
      const double u = rng.Uniform() * cdf.back();
      auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
      if (it == cdf.end()) --it;
      tok = static_cast<std::uint32_t>(it - cdf.begin());
    }
  }
  return corpus;
}

// 1 - total variation distance between the two token distributions.
inline double Affinity(const SyntheticLanguage& a, const SyntheticLanguage& b) {
  if (a.token_distribution.size() != b.token_distribution.size()) {
    throw Error(ErrorKind::kInvalid, "affinity over different vocabularies");
  }
  double l1 = 0.0;
  for (std::size_t i = 0; i < a.token_distribution.size(); ++i) {
    l1 += std::fabs(a.token_distribution[i] - b.token_distribution[i]);
  }
  return 1.0 - 0.5 * l1;
}

inline std::string FamilyMemberCode(int family, int member) {
  if (family < 26 && member < 10) {
    return std::string(1, static_cast<char>('a' + family)) + std::to_string(member);
  }
  return "f" + std::to_string(family) + "m" + std::to_string(member);
}

// Each family base is a flat-Dirichlet draw over the vocabulary; members
// multiply every base probability by an independent factor in
// [1 - noise, 1 + noise] and renormalize.
inline std::vector<SyntheticLanguage> MakeFamilies(int num_families, int per_family, double noise,
                                                   std::uint64_t seed, int vocab_size = 64) {
  if (num_families < 1 || per_family < 1) {
    throw Error(ErrorKind::kOutOfRange, "need at least one family with one member");
  }
  if (!(noise >= 0.0 && noise < 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "family noise must lie in [0, 1)");
  }
  if (vocab_size < 2) throw Error(ErrorKind::kOutOfRange, "vocabulary too small");
  std::vector<SyntheticLanguage> langs;
  for (int f = 0; f < num_families; ++f) {
    Rng base_rng(seed, 0x1000 + static_cast<std::uint64_t>(f));
    std::vector<double> base(vocab_size);
    double total = 0.0;
    for (auto& b : base) {
      b = -std::log1p(-base_rng.Uniform());
      total += b;
    }
    for (auto& b : base) b /= total;
    for (int m = 0; m < per_family; ++m) {
      const auto idx = static_cast<std::uint64_t>(f) * 1000 + static_cast<std::uint64_t>(m);
      Rng member_rng(seed, 0x2000000 + idx);
      SyntheticLanguage lang;
      lang.code = FamilyMemberCode(f, m);
      lang.family = f;
      lang.corpus_seed = StreamSeed(seed, 0x3000000 + idx);
      lang.token_distribution.resize(vocab_size);
      double s = 0.0;
      for (int v = 0; v < vocab_size; ++v) {
        lang.token_distribution[v] = base[v] * (1.0 + noise * (2.0 * member_rng.Uniform() - 1.0));
        s += lang.token_distribution[v];
      }
      for (auto& p : lang.token_distribution) p /= s;
      langs.push_back(std::move(lang));
    }
  }
  return langs;
}

// ---------------------------------------------------------------------------
// Dump extraction over a corpus.

struct ExtractionOptions {
  Objective objective = Objective::kLmMasked;
  CorpusTag corpus_tag = CorpusTag::kTaskCorpus;
  std::string language;
  std::int32_t seed = 0;
  std::size_t sample_size = 1024;
  std::uint64_t head_seed = 0;
  int num_labels = kDefaultNumLabels;
};

// Synthetic classification label; a fixed function of the sentence.
inline int ToyLabel(std::span<const std::uint32_t> sentence, int num_labels) {
  std::uint64_t h = 0;
  for (auto t : sentence) h += t;
  return static_cast<int>(h % static_cast<std::uint64_t>(num_labels));
}

// Samples sample_size sentences (without replacement when the corpus is
// large enough, else with replacement and flags::kSampledWithReplacement),
// absorbs one per-sentence gradient each, and finalizes. Masking for
// sentence j of the sample uses stream (seed, j).
inline FisherDump ExtractToyFisher(const ToyModel& model, std::span<const Sentence> corpus,
                                   const ExtractionOptions& opt) {
  if (corpus.empty()) throw Error(ErrorKind::kInvalid, "empty corpus");
  if (opt.sample_size == 0) throw Error(ErrorKind::kInvalid, "sample size must be >= 1");
  bool replaced = false;
  const auto picks = SampleIndices(corpus.size(), opt.sample_size,
                                   StreamSeed(static_cast<std::uint64_t>(opt.seed), 0x5eed),
                                   &replaced);
  const TaskHead head = TaskHead::Random(opt.num_labels, model.hidden_dim(), opt.head_seed);
  FisherAccumulator acc(model.Manifest());
  for (std::size_t j = 0; j < picks.size(); ++j) {
    const auto& sentence = corpus[picks[j]];
    if (opt.objective == Objective::kLmMasked) {
      const auto mask_seed = StreamSeed(static_cast<std::uint64_t>(opt.seed), j);
      acc.Absorb(MlmLogProbAndGrad(model, sentence, mask_seed).grad);
    } else {
      acc.Absorb(TaskHeadLogProbAndGrad(model, sentence, ToyLabel(sentence, opt.num_labels), head)
                     .grad);
    }
  }
  std::uint16_t f = flags::kStochasticLayersDisabled;
  if (replaced) f |= flags::kSampledWithReplacement;
  return Finalize(acc, RunTag{opt.language, opt.objective, opt.corpus_tag, opt.seed}, f);
}

// Mean over sentences of each sentence's mean-pooled embedding.
inline std::vector<double> MeanSentenceEmbedding(const ToyModel& model,
                                                 std::span<const Sentence> sentences) {
  if (sentences.empty()) throw Error(ErrorKind::kInvalid, "no sentences to embed");
  std::vector<double> sum(model.embed_dim(), 0.0);
  for (const auto& s : sentences) {
    const auto e = SentenceEmbedding(model, s);
    for (std::size_t d = 0; d < sum.size(); ++d) sum[d] += e[d];
  }
  for (auto& x : sum) x /= static_cast<double>(sentences.size());
  return sum;
}

}  // namespace xlt
