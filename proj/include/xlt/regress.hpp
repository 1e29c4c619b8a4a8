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

// Single-feature regression of transfer scores on a similarity feature.
//
// OLS:  score = b0 + b1 * feature + e
// MER:  score = b0 + b1 * feature + u_target + e,
//       u ~ N(0, s2_u), e ~ N(0, s2_e), fitted by maximum likelihood.
//
// For MER the likelihood is profiled: for a fixed ratio lambda = s2_u / s2_e,
// (b0, b1) is the GLS solution, s2_e its ML estimate and u the BLUP, all in
// closed form per target group. Only lambda is searched numerically.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/evalrank.hpp"
#include "xlt/similarity.hpp"

namespace xlt {

struct RegressionRow {
  std::string source;
  std::string target;
  double feature = 0.0;
  double score = 0.0;
};

struct RegressionDataset {
  std::vector<RegressionRow> rows;

  void Validate() const {
    if (rows.size() < 2) throw Error(ErrorKind::kInvalid, "regression needs at least 2 rows");
    std::set<double> features;
    for (const auto& r : rows) {
      if (!std::isfinite(r.feature) || !std::isfinite(r.score)) {
        throw Error(ErrorKind::kInvalid, "non-finite regression input for " + r.source + " -> " +
                                             r.target);
      }
      features.insert(r.feature);
    }
    if (features.size() < 2) {
      throw Error(ErrorKind::kUndefined, "zero feature variance: slope is not identifiable");
    }
  }
};

// All (source, target) pairs of matrix languages, source != target, with the
// matrix entry as feature and the seed-mean gold score as response.
inline RegressionDataset BuildRegressionDataset(const SimilarityMatrix& m,
                                                const TransferScoreTable& table,
                                                const std::string& task) {
  const auto gold = AggregateGold(table, task);
  RegressionDataset data;
  std::vector<std::string> gaps;
  for (const auto& t : m.languages()) {
    for (const auto& s : m.languages()) {
      if (s == t) continue;
      auto it = gold.find({s, t});
      if (it == gold.end()) {
        gaps.push_back(s + " -> " + t);
        continue;
      }
      data.rows.push_back({s, t, m.at(t, s), it->second});
    }
  }
  if (!gaps.empty()) {
    std::string msg = std::to_string(gaps.size()) + " gold coverage gap(s):";
    for (const auto& g : gaps) msg += "\n  missing gold " + g;
    throw Error(ErrorKind::kNotFound, msg);
  }
  return data;
}

enum class FitKind { kOls, kMer };

struct FitResult {
  FitKind kind = FitKind::kOls;
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta1_se = 0.0;
  std::map<std::string, double> random_intercepts;  // empty for OLS
  double sigma2_residual = 0.0;                     // ML estimate
  double sigma2_intercept = 0.0;                    // MER only
  double lambda = 0.0;                              // sigma2_intercept / sigma2_residual
  double log_likelihood = 0.0;
  double rmse = 0.0;
  bool degenerate = false;  // MER with a single target, reduced to OLS
  int iterations = 0;

  // Unknown targets take a zero random intercept.
  double Predict(const std::string& target, double feature) const {
    double y = beta0 + beta1 * feature;
    if (auto it = random_intercepts.find(target); it != random_intercepts.end()) y += it->second;
    return y;
  }
};

namespace detail {

inline double Rmse(const FitResult& fit, const RegressionDataset& data) {
  double ss = 0.0;
  for (const auto& r : data.rows) {
    const double e = r.score - fit.Predict(r.target, r.feature);
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(data.rows.size()));
}

struct Group {
  std::string target;
  std::vector<double> f;
  std::vector<double> y;
};

inline std::vector<Group> GroupByTarget(const RegressionDataset& data) {
  std::map<std::string, Group> by;
  for (const auto& r : data.rows) {
    auto& g = by[r.target];
    g.target = r.target;
    g.f.push_back(r.feature);
    g.y.push_back(r.score);
  }
  std::vector<Group> out;
  for (auto& [_, g] : by) out.push_back(std::move(g));
  return out;
}

// a' H_g^{-1} b for H_g = I + lambda 11', written as the centered
// cross-product plus sum(a) sum(b) / (n (1 + lambda n)) to avoid
// cancellation at large lambda.
inline double HInvProduct(const std::vector<double>& a, const std::vector<double>& b,
                          double lambda) {
  const double n = static_cast<double>(a.size());
  double sa = 0.0;
  double sb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n;
  const double mb = sb / n;
  double centered = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) centered += (a[i] - ma) * (b[i] - mb);
  return centered + sa * sb / (n * (1.0 + lambda * n));
}

struct MerPoint {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta1_se = 0.0;
  double sigma2 = 0.0;
  double log_likelihood = 0.0;
  std::map<std::string, double> u;
};

inline MerPoint MerAtLambda(const std::vector<Group>& groups, double lambda) {
  double a00 = 0.0, a01 = 0.0, a11 = 0.0, b0 = 0.0, b1 = 0.0;
  double log_det = 0.0;
  std::size_t n_total = 0;
  for (const auto& g : groups) {
    const std::vector<double> ones(g.f.size(), 1.0);
    a00 += HInvProduct(ones, ones, lambda);
    a01 += HInvProduct(ones, g.f, lambda);
    a11 += HInvProduct(g.f, g.f, lambda);
    b0 += HInvProduct(ones, g.y, lambda);
    b1 += HInvProduct(g.f, g.y, lambda);
    log_det += std::log1p(lambda * static_cast<double>(g.f.size()));
    n_total += g.f.size();
  }
  const double det = a00 * a11 - a01 * a01;
  if (!(det > 0.0)) {
    throw Error(ErrorKind::kUndefined, "singular GLS system: feature has no spread");
  }
  MerPoint pt;
  pt.beta0 = (a11 * b0 - a01 * b1) / det;
  pt.beta1 = (a00 * b1 - a01 * b0) / det;

  double q = 0.0;
  for (const auto& g : groups) {
    std::vector<double> r(g.f.size());
    double sr = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      r[i] = g.y[i] - pt.beta0 - pt.beta1 * g.f[i];
      sr += r[i];
    }
    q += HInvProduct(r, r, lambda);
    const double n = static_cast<double>(r.size());
    pt.u[g.target] = lambda * sr / (1.0 + lambda * n);
  }
  const double n = static_cast<double>(n_total);
  pt.sigma2 = q / n;
  pt.beta1_se = std::sqrt(pt.sigma2 * a00 / det);
  if (pt.sigma2 <= 0.0) {
    // Exact fit: the likelihood is unbounded; report it as +inf.
    pt.log_likelihood = std::numeric_limits<double>::infinity();
  } else {
    pt.log_likelihood =
        -0.5 * n * (std::log(2.0 * std::numbers::pi * pt.sigma2) + 1.0) - 0.5 * log_det;
  }
  return pt;
}

}  // namespace detail

// Closed-form simple regression.
inline FitResult OlsFit(const RegressionDataset& data) {
  data.Validate();
  const double n = static_cast<double>(data.rows.size());
  double mf = 0.0, ms = 0.0;
  for (const auto& r : data.rows) {
    mf += r.feature;
    ms += r.score;
  }
  mf /= n;
  ms /= n;
  double sff = 0.0, sfs = 0.0;
  for (const auto& r : data.rows) {
    sff += (r.feature - mf) * (r.feature - mf);
    sfs += (r.feature - mf) * (r.score - ms);
  }
  FitResult fit;
  fit.kind = FitKind::kOls;
  fit.beta1 = sfs / sff;
  fit.beta0 = ms - fit.beta1 * mf;
  fit.rmse = detail::Rmse(fit, data);
  fit.sigma2_residual = fit.rmse * fit.rmse;
  fit.beta1_se = n > 2 ? std::sqrt(fit.sigma2_residual * n / (n - 2.0) / sff) : 0.0;
  fit.log_likelihood =
      fit.sigma2_residual > 0.0
          ? -0.5 * n * (std::log(2.0 * std::numbers::pi * fit.sigma2_residual) + 1.0)
          : std::numeric_limits<double>::infinity();
  return fit;
}

inline constexpr double kMerLogLambdaMin = -12.0;
inline constexpr double kMerLogLambdaMax = 12.0;
inline constexpr double kMerTolerance = 1e-8;
inline constexpr int kMerMaxIterations = 200;

// Profiled ML log-likelihood of the random-intercept model at a variance
// ratio lambda >= 0.
inline double MerProfileLogLikelihood(const RegressionDataset& data, double lambda) {
  data.Validate();
  return detail::MerAtLambda(detail::GroupByTarget(data), lambda).log_likelihood;
}

// Maximizes the profiled likelihood over log(lambda) in [-12, 12]. A coarse
// scan at spacing 0.25 brackets the best region, then golden-section search
// narrows it to 1e-8. Both searches count toward the 200 iteration cap.
inline FitResult MerFit(const RegressionDataset& data) {
  data.Validate();
  const auto groups = detail::GroupByTarget(data);
  if (groups.size() < 2) {
    FitResult fit = OlsFit(data);
    fit.kind = FitKind::kMer;
    fit.degenerate = true;
    fit.random_intercepts[groups.front().target] = 0.0;
    return fit;
  }

  auto objective = [&](double t) { return detail::MerAtLambda(groups, std::exp(t)).log_likelihood; };

  int iterations = 0;
  constexpr double kScanStep = 0.25;
  const int scan_points =
      static_cast<int>(std::lround((kMerLogLambdaMax - kMerLogLambdaMin) / kScanStep)) + 1;
  int best_i = 0;
  double best_v = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < scan_points; ++i) {
    const double v = objective(kMerLogLambdaMin + kScanStep * i);
    ++iterations;
    if (v > best_v) {
      best_v = v;
      best_i = i;
    }
  }
  double lo = kMerLogLambdaMin + kScanStep * std::max(0, best_i - 1);
  double hi = kMerLogLambdaMin + kScanStep * std::min(scan_points - 1, best_i + 1);
  double best_t = kMerLogLambdaMin + kScanStep * best_i;

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double fc = objective(c);
  double fd = objective(d);
  iterations += 2;
  while (hi - lo > kMerTolerance) {
    if (iterations >= kMerMaxIterations) {
      throw Error(ErrorKind::kNoConvergence,
                  "variance-ratio search did not converge within " +
                      std::to_string(kMerMaxIterations) + " iterations");
    }
    if (fc >= fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - inv_phi * (hi - lo);
      fc = objective(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + inv_phi * (hi - lo);
      fd = objective(d);
    }
    ++iterations;
  }
  const double mid = 0.5 * (lo + hi);
  if (objective(mid) >= best_v) best_t = mid;

  const double lambda = std::exp(best_t);
  const auto pt = detail::MerAtLambda(groups, lambda);
  FitResult fit;
  fit.kind = FitKind::kMer;
  fit.beta0 = pt.beta0;
  fit.beta1 = pt.beta1;
  fit.beta1_se = pt.beta1_se;
  fit.random_intercepts = pt.u;
  fit.sigma2_residual = pt.sigma2;
  fit.sigma2_intercept = lambda * pt.sigma2;
  fit.lambda = lambda;
  fit.log_likelihood = pt.log_likelihood;
  fit.iterations = iterations;
  fit.rmse = detail::Rmse(fit, data);
  return fit;
}

// Rankings use fitted values per target; top1 and ndcg are fractions
// averaged over targets.
struct RegressionScore {
  double rmse = 0.0;
  double top1 = 0.0;
  double ndcg = 0.0;
};

inline RegressionScore PredictAndScore(const FitResult& fit, const RegressionDataset& data,
                                       int k = kDefaultNdcgCutoff) {
  if (data.rows.empty()) throw Error(ErrorKind::kInvalid, "no rows to score");
  PairScores gold;
  std::map<std::string, std::vector<std::pair<std::string, double>>> by_target;
  for (const auto& r : data.rows) {
    gold[{r.source, r.target}] = r.score;
    by_target[r.target].emplace_back(r.source, fit.Predict(r.target, r.feature));
  }
  RegressionScore out;
  out.rmse = detail::Rmse(fit, data);
  for (auto& [target, cands] : by_target) {
    const auto ranking = RankCandidates(target, std::move(cands), Polarity::kHigherBetter);
    out.top1 += Top1(ranking, gold);
    out.ndcg += NdcgAtK(ranking, gold, k);
  }
  out.top1 /= static_cast<double>(by_target.size());
  out.ndcg /= static_cast<double>(by_target.size());
  return out;
}

inline std::string_view ToString(FitKind k) { return k == FitKind::kOls ? "ols" : "mer"; }

// key,value lines covering every FitResult field; intercepts as u[<target>].
inline void WriteFitCsv(const FitResult& fit, std::ostream& out) {
  out << "key,value\n"
      << "model," << ToString(fit.kind) << '\n'
      << "grouping,target\n"
      << "likelihood,ml\n"
      << "beta0," << FormatReal(fit.beta0) << '\n'
      << "beta1," << FormatReal(fit.beta1) << '\n'
      << "beta1_se," << FormatReal(fit.beta1_se) << '\n'
      << "sigma2_residual," << FormatReal(fit.sigma2_residual) << '\n'
      << "sigma2_intercept," << FormatReal(fit.sigma2_intercept) << '\n'
      << "lambda," << FormatReal(fit.lambda) << '\n'
      << "log_likelihood," << FormatReal(fit.log_likelihood) << '\n'
      << "rmse," << FormatReal(fit.rmse) << '\n'
      << "degenerate," << (fit.degenerate ? 1 : 0) << '\n'
      << "iterations," << fit.iterations << '\n';
  for (const auto& [t, u] : fit.random_intercepts) out << "u[" << t << "]," << FormatReal(u) << '\n';
}

}  // namespace xlt
