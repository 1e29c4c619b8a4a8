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

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

enum class Method { kXsns, kL2v, kLex, kSue, kEmb };

// Whether a larger matrix entry marks a better source candidate.
enum class Polarity { kHigherBetter, kLowerBetter };

inline std::string_view ToString(Method m) {
  switch (m) {
    case Method::kXsns: return "xsns";
    case Method::kL2v: return "l2v";
    case Method::kLex: return "lex";
    case Method::kSue: return "sue";
    case Method::kEmb: return "emb";
  }
  return "?";
}

inline Method ParseMethod(std::string_view s) {
  if (s == "xsns") return Method::kXsns;
  if (s == "l2v") return Method::kL2v;
  if (s == "lex") return Method::kLex;
  if (s == "sue") return Method::kSue;
  if (s == "emb") return Method::kEmb;
  throw Error(ErrorKind::kInvalid, "unknown method '" + std::string(s) + "'");
}

// LEX entries are raw Jensen-Shannon divergences and SuE entries are raw
// angles; lower is better for both.
inline Polarity DefaultPolarity(Method m) {
  return (m == Method::kLex || m == Method::kSue) ? Polarity::kLowerBetter
                                                  : Polarity::kHigherBetter;
}

inline std::string_view ToString(Polarity p) {
  return p == Polarity::kHigherBetter ? "higher_better" : "lower_better";
}

// Square languages x languages score table. Entry (row, col) is the score of
// candidate source `col` for target `row`. SuE rows are per-source scores
// broadcast across targets and hence not symmetric.
class SimilarityMatrix {
 public:
  SimilarityMatrix() = default;
  SimilarityMatrix(std::vector<std::string> languages, Method method,
                   int seeds_averaged = 1)
      : languages_(std::move(languages)),
        values_(languages_.size() * languages_.size(), 0.0),
        method_(method),
        seeds_averaged_(seeds_averaged) {
    for (std::size_t i = 0; i < languages_.size(); ++i) {
      ValidateLanguageCode(languages_[i]);
      if (!index_.emplace(languages_[i], i).second) {
        throw Error(ErrorKind::kInvalid,
                    "duplicate language '" + languages_[i] + "' in matrix");
      }
    }
  }

  std::size_t size() const { return languages_.size(); }
  const std::vector<std::string>& languages() const { return languages_; }
  Method method() const { return method_; }
  int seeds_averaged() const { return seeds_averaged_; }
  void set_seeds_averaged(int n) { seeds_averaged_ = n; }

  double& at(std::size_t row, std::size_t col) {
    return values_[row * languages_.size() + col];
  }
  double at(std::size_t row, std::size_t col) const {
    return values_[row * languages_.size() + col];
  }

  bool Contains(std::string_view code) const {
    return index_.find(std::string(code)) != index_.end();
  }
  std::size_t IndexOf(std::string_view code) const {
    auto it = index_.find(std::string(code));
    if (it == index_.end()) {
      throw Error(ErrorKind::kNotFound,
                  "language '" + std::string(code) + "' not in matrix");
    }
    return it->second;
  }
  double at(std::string_view target, std::string_view source) const {
    return at(IndexOf(target), IndexOf(source));
  }

  // Extra "# key=value" lines written ahead of the CSV header.
  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

 private:
  std::vector<std::string> languages_;
  std::vector<double> values_;
  Method method_ = Method::kXsns;
  int seeds_averaged_ = 1;
  std::map<std::string, std::size_t> index_;
  std::map<std::string, std::string> metadata_;
};

// Nine significant digits, the precision of every real emitted as text.
inline std::string FormatReal(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// CSV layout:
//   # method=<name>
//   # seeds_averaged=<n>
//   # <key>=<value>            (metadata, sorted by key)
//   language,<code_1>,...,<code_n>
//   <code_i>,<v_i1>,...,<v_in>
inline void WriteMatrixCsv(const SimilarityMatrix& m, std::ostream& out) {
  out << "# method=" << ToString(m.method()) << '\n';
  out << "# seeds_averaged=" << m.seeds_averaged() << '\n';
  for (const auto& [k, v] : m.metadata()) out << "# " << k << '=' << v << '\n';
  out << "language";
  for (const auto& l : m.languages()) out << ',' << l;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.languages()[i];
    for (std::size_t j = 0; j < m.size(); ++j) out << ',' << FormatReal(m.at(i, j));
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing similarity matrix");
}

namespace detail {

inline std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& c : cells) {
    while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
    while (!c.empty() && c.front() == ' ') c.erase(c.begin());
  }
  return cells;
}

inline double ParseReal(const std::string& s, std::string_view context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) {
    throw Error(ErrorKind::kInvalid,
                std::string(context) + ": cannot parse '" + s + "' as a number");
  }
  return v;
}

}  // namespace detail

inline SimilarityMatrix ReadMatrixCsv(std::istream& in) {
  std::map<std::string, std::string> meta;
  std::string line;
  std::vector<std::string> header;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line[0] == '#') {
      auto body = line.substr(1);
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        auto key = body.substr(0, eq);
        auto val = body.substr(eq + 1);
        auto trim = [](std::string& s) {
          while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.pop_back();
          while (!s.empty() && s.front() == ' ') s.erase(s.begin());
        };
        trim(key);
        trim(val);
        meta[key] = val;
      }
      continue;
    }
    header = detail::SplitCsvLine(line);
    break;
  }
  if (header.size() < 2) {
    throw Error(ErrorKind::kInvalid, "similarity matrix has no header row");
  }
  std::vector<std::string> langs(header.begin() + 1, header.end());
  Method method = Method::kXsns;
  int seeds = 1;
  if (auto it = meta.find("method"); it != meta.end()) {
    method = ParseMethod(it->second);
    meta.erase(it);
  }
  if (auto it = meta.find("seeds_averaged"); it != meta.end()) {
    seeds = std::atoi(it->second.c_str());
    meta.erase(it);
  }
  SimilarityMatrix m(langs, method, seeds);
  m.metadata() = std::move(meta);
  std::vector<bool> seen(langs.size(), false);
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto cells = detail::SplitCsvLine(line);
    const std::string ctx = "matrix line " + std::to_string(line_no);
    if (cells.size() != langs.size() + 1) {
      throw Error(ErrorKind::kInvalid, ctx + ": expected " +
                                           std::to_string(langs.size() + 1) +
                                           " cells, got " +
                                           std::to_string(cells.size()));
    }
    const auto row = m.IndexOf(cells[0]);
    if (seen[row]) throw Error(ErrorKind::kInvalid, ctx + ": duplicate row " + cells[0]);
    seen[row] = true;
    for (std::size_t j = 0; j < langs.size(); ++j) {
      m.at(row, j) = detail::ParseReal(cells[j + 1], ctx);
    }
    ++rows;
  }
  if (rows != langs.size()) {
    throw Error(ErrorKind::kTruncated, "similarity matrix has " +
                                           std::to_string(rows) + " rows, expected " +
                                           std::to_string(langs.size()));
  }
  return m;
}

inline void SaveMatrixCsv(const SimilarityMatrix& m, const std::string& path) {
  auto out = OpenOutput(path);
  WriteMatrixCsv(m, out);
}

inline SimilarityMatrix LoadMatrixCsv(const std::string& path) {
  auto in = OpenInput(path);
  try {
    return ReadMatrixCsv(in);
  } catch (const Error& e) {
    throw e.WithContext(path);
  }
}

}  // namespace xlt
