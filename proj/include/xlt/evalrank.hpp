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

// Source-language ranking and its evaluation against gold transfer scores.
//
// Conventions fixed here and written into every report header:
//   * candidates for a target exclude the target itself unless asked;
//   * ties in predicted score are broken by ascending language code;
//   * NDCG uses linear gains (the raw gold score) and a log2(rank + 1)
//     discount, and is 1 when the ideal DCG is 0;
//   * correlations over zero-variance inputs are errors, never NaN.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/similarity.hpp"

namespace xlt {

inline constexpr int kDefaultNdcgCutoff = 3;

struct GoldRow {
  std::string task;
  std::string source;
  std::string target;
  std::int32_t seed = 0;
  double score = 0.0;
};

class TransferScoreTable {
 public:
  void Add(GoldRow row) {
    if (!std::isfinite(row.score)) {
      throw Error(ErrorKind::kInvalid, "non-finite gold score for " + row.source + "->" +
                                           row.target);
    }
    auto key = std::make_tuple(row.task, row.source, row.target, row.seed);
    if (!keys_.insert(key).second) {
      throw Error(ErrorKind::kInvalid, "duplicate gold row (" + row.task + ", " + row.source +
                                           ", " + row.target + ", seed " +
                                           std::to_string(row.seed) + ")");
    }
    rows_.push_back(std::move(row));
  }

  const std::vector<GoldRow>& rows() const { return rows_; }

  std::vector<std::string> Tasks() const {
    std::set<std::string> t;
    for (const auto& r : rows_) t.insert(r.task);
    return {t.begin(), t.end()};
  }

 private:
  std::vector<GoldRow> rows_;
  std::set<std::tuple<std::string, std::string, std::string, std::int32_t>> keys_;
};

// Header: task,source,target,seed,score
inline TransferScoreTable ReadGoldCsv(std::istream& in) {
  TransferScoreTable table;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = detail::SplitCsvLine(line);
    if (!header_seen) {
      const std::vector<std::string> expected = {"task", "source", "target", "seed", "score"};
      if (cells != expected) {
        throw Error(ErrorKind::kInvalid, "gold table header must be task,source,target,seed,score");
      }
      header_seen = true;
      continue;
    }
    const std::string ctx = "gold line " + std::to_string(line_no);
    if (cells.size() != 5) {
      throw Error(ErrorKind::kInvalid, ctx + ": expected 5 cells");
    }
    GoldRow row;
    row.task = cells[0];
    row.source = cells[1];
    row.target = cells[2];
    row.seed = static_cast<std::int32_t>(detail::ParseReal(cells[3], ctx));
    row.score = detail::ParseReal(cells[4], ctx);
    table.Add(std::move(row));
  }
  if (!header_seen) throw Error(ErrorKind::kInvalid, "gold table is empty");
  return table;
}

inline TransferScoreTable LoadGoldCsv(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadGoldCsv(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}

inline void WriteGoldCsv(const TransferScoreTable& t, std::ostream& out) {
  out << "task,source,target,seed,score\n";
  for (const auto& r : t.rows()) {
    out << r.task << ',' << r.source << ',' << r.target << ',' << r.seed << ','
        << FormatReal(r.score) << '\n';
  }
}

// (source, target) -> gold score.
using PairScores = std::map<std::pair<std::string, std::string>, double>;

// Mean over fine-tuning seeds per (source, target) for one task.
inline PairScores AggregateGold(const TransferScoreTable& table, const std::string& task) {
  std::map<std::pair<std::string, std::string>, std::pair<double, int>> acc;
  for (const auto& r : table.rows()) {
    if (r.task != task) continue;
    auto& [sum, n] = acc[{r.source, r.target}];
    sum += r.score;
    ++n;
  }
  PairScores out;
  for (const auto& [key, v] : acc) out[key] = v.first / v.second;
  return out;
}

inline double GoldAt(const PairScores& gold, const std::string& source, const std::string& target) {
  auto it = gold.find({source, target});
  if (it == gold.end()) {
    throw Error(ErrorKind::kNotFound, "no gold score for " + source + " -> " + target);
  }
  return it->second;
}

struct Ranking {
  std::string target;
  std::vector<std::string> ordered_sources;  // best first
  std::vector<double> predicted_scores;      // parallel to ordered_sources
};

// Larger oriented score = better candidate.
inline double Orient(double score, Polarity polarity) {
  return polarity == Polarity::kHigherBetter ? score : -score;
}

inline Ranking RankCandidates(std::string target,
                              std::vector<std::pair<std::string, double>> candidates,
                              Polarity polarity) {
  for (const auto& [code, score] : candidates) {
    if (std::isnan(score)) {
      throw Error(ErrorKind::kInvalid, "NaN score for candidate " + code + " of " + target);
    }
  }
  std::sort(candidates.begin(), candidates.end(), [polarity](const auto& a, const auto& b) {
    const double oa = Orient(a.second, polarity);
    const double ob = Orient(b.second, polarity);
    if (oa != ob) return oa > ob;
    return a.first < b.first;
  });
  Ranking r;
  r.target = std::move(target);
  for (auto& [code, score] : candidates) {
    r.ordered_sources.push_back(std::move(code));
    r.predicted_scores.push_back(score);
  }
  return r;
}

inline Ranking RankSources(const std::string& target, const SimilarityMatrix& m,
                           Polarity polarity, bool include_self = false) {
  const auto row = m.IndexOf(target);
  std::vector<std::pair<std::string, double>> cands;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (j == row && !include_self) continue;
    cands.emplace_back(m.languages()[j], m.at(row, j));
  }
  return RankCandidates(target, std::move(cands), polarity);
}

inline Ranking RankSources(const std::string& target, const SimilarityMatrix& m) {
  return RankSources(target, m, DefaultPolarity(m.method()));
}

inline double Pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::kInvalid, "correlation inputs differ in length");
  }
  if (x.size() < 2) throw Error(ErrorKind::kUndefined, "correlation needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorKind::kUndefined, "correlation undefined: zero variance input");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// 1-based ranks in ascending order of value; tied values share the mean of
// the ranks they span.
inline std::vector<double> FractionalRanks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

inline double Spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::kInvalid, "correlation inputs differ in length");
  }
  const auto rx = FractionalRanks(x);
  const auto ry = FractionalRanks(y);
  return Pearson(rx, ry);
}

// 1 if the top-ranked source is among the gold-best candidates.
inline int Top1(const Ranking& r, const PairScores& gold) {
  if (r.ordered_sources.empty()) throw Error(ErrorKind::kInvalid, "empty ranking");
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : r.ordered_sources) best = std::max(best, GoldAt(gold, s, r.target));
  return GoldAt(gold, r.ordered_sources.front(), r.target) == best ? 1 : 0;
}

inline double NdcgAtK(const Ranking& r, const PairScores& gold, int k = kDefaultNdcgCutoff) {
  if (k < 1) throw Error(ErrorKind::kOutOfRange, "NDCG cutoff must be >= 1");
  std::vector<double> gains;
  for (const auto& s : r.ordered_sources) {
    const double g = GoldAt(gold, s, r.target);
    if (g < 0.0) {
      throw Error(ErrorKind::kInvalid, "negative gold score for " + s + " -> " + r.target);
    }
    gains.push_back(g);
  }
  const std::size_t cut = std::min<std::size_t>(static_cast<std::size_t>(k), gains.size());
  auto dcg = [cut](const std::vector<double>& g) {
    double sum = 0.0;
    for (std::size_t i = 0; i < cut; ++i) sum += g[i] / std::log2(static_cast<double>(i) + 2.0);
    return sum;
  };
  const double actual = dcg(gains);
  std::sort(gains.begin(), gains.end(), std::greater<double>());
  const double ideal = dcg(gains);
  if (ideal == 0.0) return 1.0;
  return actual / ideal;
}

struct TargetMetrics {
  std::string target;
  std::optional<double> pearson;
  std::optional<double> spearman;
  double top1 = 0.0;
  double ndcg = 0.0;
  std::vector<std::string> errors;
};

// All values are percentages. A mean is absent when any target's value is.
struct EvalReport {
  Method method = Method::kXsns;
  Polarity polarity = Polarity::kHigherBetter;
  std::string task;
  int k = kDefaultNdcgCutoff;
  bool include_self = false;
  std::vector<TargetMetrics> per_target;
  std::optional<double> mean_pearson;
  std::optional<double> mean_spearman;
  double mean_top1 = 0.0;
  double mean_ndcg = 0.0;
  std::map<std::string, std::string> config;  // echoed into output headers

  std::vector<std::string> Errors() const {
    std::vector<std::string> out;
    for (const auto& t : per_target) {
      for (const auto& e : t.errors) out.push_back(t.target + ": " + e);
    }
    return out;
  }
};

// Scores one target: correlations between oriented predictions and gold,
// Top-1 and NDCG@k of the ranking.
inline TargetMetrics EvaluateTarget(const Ranking& ranking, const PairScores& gold,
                                    Polarity polarity, int k) {
  TargetMetrics t;
  t.target = ranking.target;
  std::vector<double> pred;
  std::vector<double> truth;
  for (std::size_t i = 0; i < ranking.ordered_sources.size(); ++i) {
    pred.push_back(Orient(ranking.predicted_scores[i], polarity));
    truth.push_back(GoldAt(gold, ranking.ordered_sources[i], ranking.target));
  }
  try {
    t.pearson = 100.0 * Pearson(pred, truth);
  } catch (const Error& e) {
    t.errors.push_back("pearson " + e.message());
  }
  try {
    t.spearman = 100.0 * Spearman(pred, truth);
  } catch (const Error& e) {
    t.errors.push_back("spearman " + e.message());
  }
  t.top1 = 100.0 * Top1(ranking, gold);
  t.ndcg = 100.0 * NdcgAtK(ranking, gold, k);
  return t;
}

// Targets are matrix languages that occur as gold targets for the task;
// candidates are matrix languages that occur as gold sources. Every
// (candidate, target) pair must have gold; all gaps are listed in one error.
inline EvalReport Evaluate(const SimilarityMatrix& m, const TransferScoreTable& table,
                           const std::string& task, int k, Polarity polarity,
                           bool include_self = false) {
  const auto gold = AggregateGold(table, task);
  if (gold.empty()) throw Error(ErrorKind::kNotFound, "no gold rows for task '" + task + "'");
  std::set<std::string> gold_sources;
  std::set<std::string> gold_targets;
  for (const auto& [key, _] : gold) {
    gold_sources.insert(key.first);
    gold_targets.insert(key.second);
  }

  std::vector<std::string> gaps;
  std::vector<std::string> targets;
  std::vector<std::string> sources;
  for (const auto& l : m.languages()) {
    const bool src = gold_sources.count(l) > 0;
    const bool tgt = gold_targets.count(l) > 0;
    if (!src && !tgt) gaps.push_back("language " + l + " has no gold rows for task " + task);
    if (src) sources.push_back(l);
    if (tgt) targets.push_back(l);
  }
  for (const auto& t : targets) {
    for (const auto& s : sources) {
      if (s == t && !include_self) continue;
      if (!gold.count({s, t})) gaps.push_back("missing gold " + s + " -> " + t);
    }
  }
  if (targets.empty()) gaps.push_back("no matrix language is a gold target for task " + task);
  if (!gaps.empty()) {
    std::string msg = std::to_string(gaps.size()) + " gold coverage gap(s):";
    for (const auto& g : gaps) msg += "\n  " + g;
    throw Error(ErrorKind::kNotFound, msg);
  }

  EvalReport rep;
  rep.method = m.method();
  rep.polarity = polarity;
  rep.task = task;
  rep.k = k;
  rep.include_self = include_self;

  double sp = 0.0;
  double ss = 0.0;
  bool all_p = true;
  bool all_s = true;
  for (const auto& t : targets) {
    std::vector<std::pair<std::string, double>> cands;
    for (const auto& s : sources) {
      if (s == t && !include_self) continue;
      cands.emplace_back(s, m.at(t, s));
    }
    const auto ranking = RankCandidates(t, std::move(cands), polarity);
    auto metrics = EvaluateTarget(ranking, gold, polarity, k);
    if (metrics.pearson) sp += *metrics.pearson; else all_p = false;
    if (metrics.spearman) ss += *metrics.spearman; else all_s = false;
    rep.mean_top1 += metrics.top1;
    rep.mean_ndcg += metrics.ndcg;
    rep.per_target.push_back(std::move(metrics));
  }
  const double n = static_cast<double>(rep.per_target.size());
  if (all_p) rep.mean_pearson = sp / n;
  if (all_s) rep.mean_spearman = ss / n;
  rep.mean_top1 /= n;
  rep.mean_ndcg /= n;
  return rep;
}

inline EvalReport Evaluate(const SimilarityMatrix& m, const TransferScoreTable& table,
                           const std::string& task, int k = kDefaultNdcgCutoff) {
  return Evaluate(m, table, task, k, DefaultPolarity(m.method()));
}

inline std::string FormatPercent(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

inline void WriteReportHeader(const EvalReport& r, std::ostream& out) {
  out << "# method=" << ToString(r.method) << '\n'
      << "# task=" << r.task << '\n'
      << "# k=" << r.k << '\n'
      << "# polarity=" << ToString(r.polarity) << '\n'
      << "# ndcg_gain=linear\n"
      << "# ndcg_discount=log2(rank+1)\n"
      << "# candidates=" << (r.include_self ? "include_target" : "exclude_target") << '\n'
      << "# tie_break=ascending_language_code\n"
      << "# units=percent\n";
  for (const auto& [key, v] : r.config) out << "# " << key << '=' << v << '\n';
}

inline void WriteReportCsv(const EvalReport& r, std::ostream& out) {
  WriteReportHeader(r, out);
  out << "target,pearson,spearman,top1,ndcg@" << r.k << '\n';
  auto cell = [](const std::optional<double>& v) { return v ? FormatReal(*v) : std::string("undefined"); };
  for (const auto& t : r.per_target) {
    out << t.target << ',' << cell(t.pearson) << ',' << cell(t.spearman) << ','
        << FormatReal(t.top1) << ',' << FormatReal(t.ndcg) << '\n';
  }
  out << "mean," << cell(r.mean_pearson) << ',' << cell(r.mean_spearman) << ','
      << FormatReal(r.mean_top1) << ',' << FormatReal(r.mean_ndcg) << '\n';
}

// Method rows x metric columns, one block per task.
inline void WriteReportTable(std::span<const EvalReport> reports, std::ostream& out) {
  if (reports.empty()) return;
  const int k = reports.front().k;
  char line[160];
  std::snprintf(line, sizeof(line), "%-12s %-8s %10s %10s %10s %10s\n", "Task", "Method",
                "Pearson", "Spearman", "Top 1", ("NDCG@" + std::to_string(k)).c_str());
  out << line;
  for (const auto& r : reports) {
    std::snprintf(line, sizeof(line), "%-12s %-8s %10s %10s %10s %10s\n", r.task.c_str(),
                  std::string(ToString(r.method)).c_str(), FormatPercent(r.mean_pearson).c_str(),
                  FormatPercent(r.mean_spearman).c_str(), FormatPercent(r.mean_top1).c_str(),
                  FormatPercent(r.mean_ndcg).c_str());
    out << line;
  }
}

}  // namespace xlt
