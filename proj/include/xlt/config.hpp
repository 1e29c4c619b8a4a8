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

// Run configuration. Sources, lowest precedence first: built-in defaults,
// a key=value file, command-line overrides.

#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include "xlt/error.hpp"
#include "xlt/evalrank.hpp"
#include "xlt/refmodel.hpp"
#include "xlt/similarity.hpp"
#include "xlt/subnet.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt {

inline constexpr std::size_t kDefaultSampleSize = 1024;

struct RunConfig {
  double p = kDefaultKeepFraction;
  std::size_t sample_size = kDefaultSampleSize;
  std::vector<std::int32_t> seeds = {0, 1, 2};
  int k = kDefaultNdcgCutoff;
  Objective objective = Objective::kLmMasked;
  CorpusTag corpus_tag = CorpusTag::kTaskCorpus;
  std::string task;  // empty: every task in the gold table
  // Reference model.
  int vocab_size = 64;
  int embed_dim = 16;
  int hidden_dim = 32;
  std::uint64_t model_seed = 0;
  std::uint64_t head_seed = 0;
  int num_labels = kDefaultNumLabels;

  ToyModelConfig Model() const {
    ToyModelConfig m;
    m.vocab_size = vocab_size;
    m.embed_dim = embed_dim;
    m.hidden_dim = hidden_dim;
    m.seed = model_seed;
    return m;
  }

  // Resolved values as text, keyed as in config files.
  std::map<std::string, std::string> ToMap() const;
  void Set(const std::string& key, const std::string& value);
  void Validate() const;
};

namespace detail {

inline std::string Trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline long long ParseInteger(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) {
    throw Error(ErrorKind::kInvalid, "config '" + key + "': not an integer: '" + v + "'");
  }
  return out;
}

inline std::vector<std::int32_t> ParseSeedList(const std::string& v) {
  std::vector<std::int32_t> seeds;
  std::string item;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      item = Trim(item);
      if (item.empty()) throw Error(ErrorKind::kInvalid, "config 'seeds': empty entry");
      const auto s = ParseInteger("seeds", item);
      if (s < INT32_MIN || s > INT32_MAX) {
        throw Error(ErrorKind::kOutOfRange, "config 'seeds': " + item + " exceeds 32 bits");
      }
      seeds.push_back(static_cast<std::int32_t>(s));
      item.clear();
    } else {
      item += v[i];
    }
  }
  return seeds;
}

}  // namespace detail

inline std::map<std::string, std::string> RunConfig::ToMap() const {
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) seed_list += ',';
    seed_list += std::to_string(seeds[i]);
  }
  return {{"p", FormatReal(p)},
          {"sample_size", std::to_string(sample_size)},
          {"seeds", seed_list},
          {"k", std::to_string(k)},
          {"objective", std::string(ToString(objective))},
          {"corpus_tag", std::string(ToString(corpus_tag))},
          {"task", task.empty() ? "*" : task},
          {"vocab_size", std::to_string(vocab_size)},
          {"embed_dim", std::to_string(embed_dim)},
          {"hidden_dim", std::to_string(hidden_dim)},
          {"model_seed", std::to_string(model_seed)},
          {"head_seed", std::to_string(head_seed)},
          {"num_labels", std::to_string(num_labels)}};
}

inline void RunConfig::Set(const std::string& key, const std::string& raw) {
  const std::string v = detail::Trim(raw);
  auto positive = [&](long long x) {
    if (x < 1) throw Error(ErrorKind::kOutOfRange, "config '" + key + "' must be >= 1");
    return x;
  };
  auto unsigned_value = [&](long long x) {
    if (x < 0) throw Error(ErrorKind::kOutOfRange, "config '" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(x);
  };
  if (key == "p") {
    p = detail::ParseReal(v, "config 'p'");
  } else if (key == "sample_size") {
    sample_size = static_cast<std::size_t>(positive(detail::ParseInteger(key, v)));
  } else if (key == "seeds") {
    seeds = detail::ParseSeedList(v);
  } else if (key == "k") {
    k = static_cast<int>(positive(detail::ParseInteger(key, v)));
  } else if (key == "objective") {
    objective = ParseObjective(v);
  } else if (key == "corpus_tag") {
    corpus_tag = ParseCorpusTag(v);
  } else if (key == "task") {
    task = v == "*" ? "" : v;
  } else if (key == "vocab_size") {
    vocab_size = static_cast<int>(positive(detail::ParseInteger(key, v)));
  } else if (key == "embed_dim") {
    embed_dim = static_cast<int>(positive(detail::ParseInteger(key, v)));
  } else if (key == "hidden_dim") {
    hidden_dim = static_cast<int>(positive(detail::ParseInteger(key, v)));
  } else if (key == "model_seed") {
    model_seed = unsigned_value(detail::ParseInteger(key, v));
  } else if (key == "head_seed") {
    head_seed = unsigned_value(detail::ParseInteger(key, v));
  } else if (key == "num_labels") {
    num_labels = static_cast<int>(positive(detail::ParseInteger(key, v)));
  } else {
    throw Error(ErrorKind::kInvalid, "unknown config key '" + key + "'");
  }
}

inline void RunConfig::Validate() const {
  if (!(p > 0.0 && p <= 1.0)) {
    throw Error(ErrorKind::kOutOfRange, "p must lie in (0, 1], got " + FormatReal(p));
  }
  if (seeds.empty()) throw Error(ErrorKind::kInvalid, "at least one seed is required");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    for (std::size_t j = i + 1; j < seeds.size(); ++j) {
      if (seeds[i] == seeds[j]) {
        throw Error(ErrorKind::kInvalid, "duplicate seed " + std::to_string(seeds[i]));
      }
    }
  }
  if (vocab_size < 2) throw Error(ErrorKind::kOutOfRange, "vocab_size must be >= 2");
  if (num_labels < 2) throw Error(ErrorKind::kOutOfRange, "num_labels must be >= 2");
}

// "key = value" lines; '#' starts a comment line. Later keys win.
inline void ApplyConfigStream(RunConfig& cfg, std::istream& in, const std::string& name) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = detail::Trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalid,
                  name + ":" + std::to_string(line_no) + ": expected key=value");
    }
    try {
      cfg.Set(detail::Trim(t.substr(0, eq)), t.substr(eq + 1));
    } catch (const Error& e) {
      throw e.WithContext(name + ":" + std::to_string(line_no));
    }
  }
}

inline RunConfig ResolveConfig(const std::string& config_path,
                               const std::map<std::string, std::string>& overrides) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw Error(ErrorKind::kNotFound, "cannot open config '" + config_path + "'");
    ApplyConfigStream(cfg, in, config_path);
  }
  for (const auto& [k, v] : overrides) cfg.Set(k, v);
  cfg.Validate();
  return cfg;
}

// FNV-1a 64 of a file's bytes, as 16 hex digits.
inline std::string FileDigest(const std::string& path) {
  auto in = OpenInput(path);
  Fnv1a64 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.Update(buf, static_cast<std::size_t>(in.gcount()));
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h.digest()));
  return hex;
}

}  // namespace xlt
