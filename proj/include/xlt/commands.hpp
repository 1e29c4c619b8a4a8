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

// Command implementations behind the xlt tool. Argument parsing lives in
// tools/xlt.cpp; everything here takes resolved values and streams so that
// it can be driven from tests.
//
// Token corpora are text files with one sentence per line, each a list of
// whitespace-separated token ids.

#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "xlt/baselines.hpp"
#include "xlt/config.hpp"
#include "xlt/error.hpp"
#include "xlt/evalrank.hpp"
#include "xlt/fisher.hpp"
#include "xlt/refmodel.hpp"
#include "xlt/regress.hpp"
#include "xlt/similarity.hpp"
#include "xlt/subnet.hpp"
#include "xlt/tensorstore.hpp"

namespace xlt::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitMissingInput = 2, kExitInternal = 3 };

inline int ExitCodeFor(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kNotFound: return kExitMissingInput;
    case ErrorKind::kIo: return kExitInternal;
    default: return kExitValidation;
  }
}

// ---------------------------------------------------------------------------
// Shared helpers.

inline std::vector<Sentence> ReadTokenCorpus(const std::string& path) {
  auto in = OpenInput(path);
  std::vector<Sentence> corpus;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    Sentence s;
    std::string tok;
    while (ss >> tok) {
      const auto id = xlt::detail::ParseInteger(path + ":" + std::to_string(line_no), tok);
      if (id < 0 || id > UINT32_MAX) {
        throw Error(ErrorKind::kOutOfRange, path + ":" + std::to_string(line_no) +
                                                ": token id " + tok + " out of range");
      }
      s.push_back(static_cast<std::uint32_t>(id));
    }
    if (!s.empty()) corpus.push_back(std::move(s));
  }
  if (corpus.empty()) throw Error(ErrorKind::kInvalid, "corpus '" + path + "' has no sentences");
  return corpus;
}

inline void WriteTokenCorpus(const std::vector<Sentence>& corpus, const std::string& path) {
  auto out = OpenOutput(path);
  for (const auto& s : corpus) {
    for (std::size_t i = 0; i < s.size(); ++i) out << (i ? " " : "") << s[i];
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
}

inline std::vector<std::string> ReadLines(const std::string& path) {
  auto in = OpenInput(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// "code=path" pairs.
inline std::vector<std::pair<std::string, std::string>> ParseLanguagePaths(
    const std::vector<std::string>& specs) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
      throw Error(ErrorKind::kInvalid, "expected <language>=<path>, got '" + s + "'");
    }
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    ValidateLanguageCode(out.back().first);
  }
  return out;
}

// Files with the extension inside each directory argument (sorted), plus
// any plain file arguments as given.
inline std::vector<std::string> CollectFiles(const std::vector<std::string>& inputs,
                                             const std::string& ext) {
  std::vector<std::string> files;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ext) found.push_back(e.path().string());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else if (fs::exists(in)) {
      files.push_back(in);
    } else {
      throw Error(ErrorKind::kNotFound, "no such file or directory '" + in + "'");
    }
  }
  return files;
}

// Resolved config and input digests, echoed into every output.
struct Provenance {
  std::map<std::string, std::string> entries;

  Provenance(const RunConfig& cfg, const std::vector<std::string>& inputs) {
    for (const auto& [k, v] : cfg.ToMap()) entries["config." + k] = v;
    for (const auto& path : inputs) entries["input." + path] = "fnv1a64:" + FileDigest(path);
  }

  void WriteHeader(std::ostream& out) const {
    for (const auto& [k, v] : entries) out << "# " << k << '=' << v << '\n';
  }
  void MergeInto(std::map<std::string, std::string>& meta) const {
    for (const auto& [k, v] : entries) meta[k] = v;
  }
};

inline void WriteSidecar(const std::string& artifact, const Provenance& prov) {
  auto out = OpenOutput(artifact + ".meta");
  out << "# artifact=" << fs::path(artifact).filename().string() << '\n';
  prov.WriteHeader(out);
  if (!out) throw Error(ErrorKind::kIo, "failed writing '" + artifact + ".meta'");
}

inline std::string DumpFileName(const std::string& language, std::int32_t seed) {
  return language + ".s" + std::to_string(seed) + ".fgrd";
}

// Sub-networks from FGRD dumps (masked at p) and FMSK masks. All inputs must
// share one layout; every offending file is named.
inline std::vector<SubNetwork> LoadSubNetworks(const std::vector<std::string>& files, double p) {
  if (files.empty()) throw Error(ErrorKind::kNotFound, "no dump or mask files given");
  std::vector<SubNetwork> nets;
  std::vector<std::uint64_t> hashes;
  for (const auto& f : files) {
    if (fs::path(f).extension() == ".fmsk") {
      nets.push_back(SubNetwork{LoadMask(f)});
      hashes.push_back(nets.back().mask.manifest_hash);
    } else {
      const auto dump = LoadDump(f);
      hashes.push_back(dump.manifest.layout_hash());
      nets.push_back(BuildMask(dump, p));
    }
  }
  std::vector<std::string> offenders;
  for (std::size_t i = 1; i < files.size(); ++i) {
    if (hashes[i] != hashes[0]) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hashes[i]));
      offenders.push_back(files[i] + " (layout " + buf + ")");
    }
  }
  if (!offenders.empty()) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hashes[0]));
    std::string msg = std::to_string(offenders.size()) + " file(s) differ from the layout of " +
                      files[0] + " (" + buf + "):";
    for (const auto& o : offenders) msg += "\n  " + o;
    throw Error(ErrorKind::kLayoutMismatch, msg);
  }
  return nets;
}

inline std::vector<std::string> TasksToRun(const RunConfig& cfg, const TransferScoreTable& gold) {
  if (!cfg.task.empty()) return {cfg.task};
  auto tasks = gold.Tasks();
  if (tasks.empty()) throw Error(ErrorKind::kNotFound, "gold table has no rows");
  return tasks;
}

// ---------------------------------------------------------------------------
// fisher

struct FisherArgs {
  std::string corpus;       // token corpus for the reference model
  std::string grad_stream;  // or a precomputed FGST stream
  std::string language;
  std::string out_dir = ".";
};

// One dump per configured seed from a corpus, or one dump from a stream.
// Returns the written paths.
inline std::vector<std::string> CmdFisher(const RunConfig& cfg, const FisherArgs& args,
                                          std::ostream& log) {
  if (args.corpus.empty() == args.grad_stream.empty()) {
    throw Error(ErrorKind::kInvalid, "fisher needs exactly one of a corpus or a gradient stream");
  }
  fs::create_directories(args.out_dir);
  std::vector<std::string> written;
  if (!args.grad_stream.empty()) {
    const Provenance prov(cfg, {args.grad_stream});
    auto in = OpenInput(args.grad_stream);
    GradientStreamReader reader(in);
    if (!args.language.empty() && args.language != reader.tag().language) {
      throw Error(ErrorKind::kInvalid, "stream language '" + reader.tag().language +
                                           "' does not match '" + args.language + "'");
    }
    FisherAccumulator acc(reader.manifest());
    std::vector<double> grad;
    try {
      while (reader.Next(grad)) acc.Absorb(grad);
    } catch (const Error& e) {
      throw e.WithContext(args.grad_stream);
    }
    const auto dump = Finalize(acc, reader.tag(), reader.flags());
    const auto path = (fs::path(args.out_dir) / DumpFileName(dump.tag.language, dump.tag.seed)).string();
    SaveDump(dump, path);
    WriteSidecar(path, prov);
    log << "wrote " << path << " (" << dump.example_count << " examples)\n";
    written.push_back(path);
    return written;
  }

  ValidateLanguageCode(args.language);
  const Provenance prov(cfg, {args.corpus});
  const auto corpus = ReadTokenCorpus(args.corpus);
  const ToyModel model(cfg.Model());
  if (corpus.size() < cfg.sample_size) {
    log << "warning: corpus " << args.corpus << " has " << corpus.size()
        << " sentences, fewer than sample_size " << cfg.sample_size
        << "; sampling with replacement\n";
  }
  for (auto seed : cfg.seeds) {
    ExtractionOptions opt;
    opt.objective = cfg.objective;
    opt.corpus_tag = cfg.corpus_tag;
    opt.language = args.language;
    opt.seed = seed;
    opt.sample_size = cfg.sample_size;
    opt.head_seed = cfg.head_seed;
    opt.num_labels = cfg.num_labels;
    const auto dump = ExtractToyFisher(model, corpus, opt);
    const auto path = (fs::path(args.out_dir) / DumpFileName(args.language, seed)).string();
    SaveDump(dump, path);
    WriteSidecar(path, prov);
    log << "wrote " << path << " (" << dump.example_count << " examples)\n";
    written.push_back(path);
  }
  return written;
}

// ---------------------------------------------------------------------------
// mask

inline std::string CmdMask(const RunConfig& cfg, const std::string& dump_path,
                           std::string out_path, std::ostream& log) {
  const Provenance prov(cfg, {dump_path});
  const auto net = BuildMask(LoadDump(dump_path), cfg.p);
  if (out_path.empty()) out_path = fs::path(dump_path).replace_extension(".fmsk").string();
  SaveMask(net.mask, out_path);
  WriteSidecar(out_path, prov);
  log << "wrote " << out_path << " (" << net.mask.k_selected << " of " << net.mask.bits.size()
      << " parameters" << (net.degenerate() ? ", degenerate" : "") << ")\n";
  return out_path;
}

// ---------------------------------------------------------------------------
// sim

inline SimilarityMatrix XsnsMatrixFromFiles(const RunConfig& cfg,
                                            const std::vector<std::string>& inputs) {
  const auto files = CollectFiles(inputs, ".fgrd");
  auto more = CollectFiles(inputs, ".fmsk");
  std::vector<std::string> all = files;
  for (auto& m : more) {
    if (std::find(all.begin(), all.end(), m) == all.end()) all.push_back(m);
  }
  const auto nets = LoadSubNetworks(all, cfg.p);
  auto m = BuildSimilarityMatrix(nets);
  Provenance(cfg, all).MergeInto(m.metadata());
  return m;
}

inline void EmitMatrix(const SimilarityMatrix& m, const std::string& out_path, std::ostream& out) {
  if (out_path.empty() || out_path == "-") {
    WriteMatrixCsv(m, out);
  } else {
    SaveMatrixCsv(m, out_path);
  }
}

inline SimilarityMatrix CmdSim(const RunConfig& cfg, const std::vector<std::string>& inputs,
                               const std::string& out_path, std::ostream& out) {
  auto m = XsnsMatrixFromFiles(cfg, inputs);
  EmitMatrix(m, out_path, out);
  return m;
}

// ---------------------------------------------------------------------------
// rank

struct RankArgs {
  std::vector<std::string> inputs;  // dumps, masks or directories
  std::string matrix;               // or a precomputed matrix CSV
  std::string target;
  int top = 0;                      // 0: all candidates
};

inline Ranking CmdRank(const RunConfig& cfg, const RankArgs& args, std::ostream& out) {
  if (args.inputs.empty() == args.matrix.empty()) {
    throw Error(ErrorKind::kInvalid, "rank needs either dumps or a matrix");
  }
  if (args.top < 0) throw Error(ErrorKind::kOutOfRange, "--top must be >= 0");
  SimilarityMatrix m;
  std::map<std::string, std::string> meta;
  if (!args.matrix.empty()) {
    m = LoadMatrixCsv(args.matrix);
    Provenance(cfg, {args.matrix}).MergeInto(meta);
  } else {
    m = XsnsMatrixFromFiles(cfg, args.inputs);
    meta = m.metadata();
  }
  const Polarity polarity = DefaultPolarity(m.method());
  auto ranking = RankSources(args.target, m, polarity, false);
  if (args.top > 0 && static_cast<std::size_t>(args.top) < ranking.ordered_sources.size()) {
    ranking.ordered_sources.resize(args.top);
    ranking.predicted_scores.resize(args.top);
  }
  out << "# method=" << ToString(m.method()) << '\n'
      << "# target=" << args.target << '\n'
      << "# polarity=" << ToString(polarity) << '\n'
      << "# tie_break=ascending_language_code\n";
  if (args.top > 0) out << "# top=" << args.top << '\n';
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
  out << "rank,source,score\n";
  for (std::size_t i = 0; i < ranking.ordered_sources.size(); ++i) {
    out << i + 1 << ',' << ranking.ordered_sources[i] << ','
        << FormatReal(ranking.predicted_scores[i]) << '\n';
  }
  return ranking;
}

// ---------------------------------------------------------------------------
// baseline

struct BaselineArgs {
  Method method = Method::kLex;
  std::vector<std::string> corpora;  // "code=path"
  std::string vocab;                 // subword vocabulary for text corpora
  std::string vectors;               // language-vector file for emb/l2v
  std::string out;
};

inline SimilarityMatrix CmdBaseline(const RunConfig& cfg, const BaselineArgs& args,
                                    std::ostream& out) {
  SimilarityMatrix m;
  std::vector<std::string> inputs;
  switch (args.method) {
    case Method::kLex: {
      const auto corpora = ParseLanguagePaths(args.corpora);
      if (corpora.size() < 2) throw Error(ErrorKind::kInvalid, "lex needs at least 2 corpora");
      std::vector<UnigramDistribution> dists;
      std::string tokenization;
      if (!args.vocab.empty()) {
        inputs.push_back(args.vocab);
        const auto vocab = LoadVocabulary(args.vocab);
        tokenization = "greedy_longest_match";
        for (const auto& [code, path] : corpora) {
          inputs.push_back(path);
          const auto lines = ReadLines(path);
          try {
            dists.push_back(BuildUnigramDistribution(lines, vocab, code));
          } catch (const Error& e) {
            throw e.WithContext(path);
          }
        }
      } else {
        // Token-id corpora over the reference model's vocabulary.
        tokenization = "token_ids";
        Fnv1a64 h;
        h.UpdateLe(static_cast<std::uint64_t>(cfg.vocab_size));
        for (const auto& [code, path] : corpora) {
          inputs.push_back(path);
          const auto corpus = ReadTokenCorpus(path);
          try {
            dists.push_back(BuildUnigramDistribution(corpus, h.digest(),
                                                     static_cast<std::size_t>(cfg.vocab_size), code));
          } catch (const Error& e) {
            throw e.WithContext(path);
          }
        }
      }
      m = BuildLexMatrix(dists);
      m.metadata()["tokenization"] = tokenization;
      break;
    }
    case Method::kSue: {
      if (args.vocab.empty()) throw Error(ErrorKind::kInvalid, "sue needs --vocab");
      const auto corpora = ParseLanguagePaths(args.corpora);
      if (corpora.size() < 2) throw Error(ErrorKind::kInvalid, "sue needs at least 2 corpora");
      inputs.push_back(args.vocab);
      const auto vocab = LoadVocabulary(args.vocab);
      std::vector<std::pair<std::string, double>> scores;
      for (const auto& [code, path] : corpora) {
        inputs.push_back(path);
        try {
          scores.emplace_back(code, SueScore(BuildSuECloud(ReadLines(path), vocab)));
        } catch (const Error& e) {
          throw e.WithContext(path);
        }
      }
      m = BuildSueMatrix(scores);
      break;
    }
    case Method::kEmb:
    case Method::kL2v: {
      if (args.vectors.empty()) throw Error(ErrorKind::kInvalid, "emb/l2v need --vectors");
      inputs.push_back(args.vectors);
      const auto file = LoadLanguageVectors(args.vectors);
      const auto want = args.method == Method::kEmb ? VectorKind::kEmbedding : VectorKind::kTypological;
      if (file.kind != want) {
        throw Error(ErrorKind::kInvalid, args.vectors + " holds " + std::string(ToString(file.kind)) +
                                             " vectors; " + std::string(ToString(args.method)) +
                                             " needs " + std::string(ToString(want)));
      }
      auto vecs = file.vectors;
      std::sort(vecs.begin(), vecs.end(),
                [](const auto& a, const auto& b) { return a.language < b.language; });
      m = BuildCosineMatrix(vecs, args.method);
      for (const auto& [k, v] : file.metadata) m.metadata()["vectors." + k] = v;
      break;
    }
    case Method::kXsns:
      throw Error(ErrorKind::kInvalid, "xsns is not a baseline; use sim");
  }
  Provenance(cfg, inputs).MergeInto(m.metadata());
  EmitMatrix(m, args.out, out);
  return m;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::vector<std::string> matrices;
  std::string gold;
  std::string out_dir;  // empty: no per-report files
};

inline std::string ReportFileName(const EvalReport& r) {
  return "report." + r.task + "." + std::string(ToString(r.method)) + ".csv";
}

inline std::vector<EvalReport> CmdEval(const RunConfig& cfg, const EvalArgs& args,
                                       std::ostream& out, std::ostream& log) {
  if (args.matrices.empty()) throw Error(ErrorKind::kInvalid, "eval needs at least one matrix");
  std::vector<std::string> inputs = args.matrices;
  inputs.push_back(args.gold);
  const Provenance prov(cfg, inputs);
  const auto gold = LoadGoldCsv(args.gold);
  std::vector<SimilarityMatrix> mats;
  for (const auto& path : args.matrices) mats.push_back(LoadMatrixCsv(path));

  std::vector<EvalReport> reports;
  for (const auto& task : TasksToRun(cfg, gold)) {
    for (std::size_t i = 0; i < mats.size(); ++i) {
      EvalReport r;
      try {
        r = Evaluate(mats[i], gold, task, cfg.k, DefaultPolarity(mats[i].method()));
      } catch (const Error& e) {
        throw e.WithContext(args.matrices[i]);
      }
      prov.MergeInto(r.config);
      for (const auto& e : r.Errors()) log << "warning: " << task << '/' << ToString(r.method) << ' ' << e << '\n';
      if (!args.out_dir.empty()) {
        fs::create_directories(args.out_dir);
        const auto path = (fs::path(args.out_dir) / ReportFileName(r)).string();
        auto f = OpenOutput(path);
        WriteReportCsv(r, f);
        if (!f) throw Error(ErrorKind::kIo, "failed writing '" + path + "'");
      }
      reports.push_back(std::move(r));
    }
  }
  out << "# k=" << cfg.k << "\n# units=percent\n";
  prov.WriteHeader(out);
  WriteReportTable(reports, out);
  return reports;
}

// ---------------------------------------------------------------------------
// regress

struct RegressArgs {
  std::string matrix;
  std::string gold;
  FitKind model = FitKind::kMer;
  std::string out;
};

inline FitResult CmdRegress(const RunConfig& cfg, const RegressArgs& args, std::ostream& out) {
  const Provenance prov(cfg, {args.matrix, args.gold});
  const auto m = LoadMatrixCsv(args.matrix);
  const auto gold = LoadGoldCsv(args.gold);
  const auto tasks = TasksToRun(cfg, gold);
  if (tasks.size() != 1) {
    throw Error(ErrorKind::kInvalid, "regress needs a single task; gold has " +
                                         std::to_string(tasks.size()) + ", set --task");
  }
  const auto data = BuildRegressionDataset(m, gold, tasks[0]);
  const auto fit = args.model == FitKind::kOls ? OlsFit(data) : MerFit(data);
  const auto score = PredictAndScore(fit, data, cfg.k);

  std::ostringstream body;
  body << "# method=" << ToString(m.method()) << '\n' << "# task=" << tasks[0] << '\n';
  prov.WriteHeader(body);
  WriteFitCsv(fit, body);
  body << "score_rmse," << FormatReal(score.rmse) << '\n'
       << "score_top1," << FormatReal(score.top1) << '\n'
       << "score_ndcg@" << cfg.k << ',' << FormatReal(score.ndcg) << '\n';
  if (args.out.empty() || args.out == "-") {
    out << body.str();
  } else {
    auto f = OpenOutput(args.out);
    f << body.str();
    if (!f) throw Error(ErrorKind::kIo, "failed writing '" + args.out + "'");
  }
  return fit;
}

// ---------------------------------------------------------------------------
// sweep

enum class SweepAxis { kP, kSampleSize };

inline SweepAxis ParseSweepAxis(std::string_view s) {
  if (s == "p") return SweepAxis::kP;
  if (s == "sample_size" || s == "sample-size") return SweepAxis::kSampleSize;
  throw Error(ErrorKind::kInvalid, "unknown sweep axis '" + std::string(s) + "'");
}

inline std::vector<double> DefaultSweepValues(SweepAxis axis) {
  if (axis == SweepAxis::kP) return {0.01, 0.05, 0.10, 0.15, 0.20, 0.30, 0.50};
  return {64, 128, 256, 512, 1024, 10000};
}

struct SweepArgs {
  SweepAxis axis = SweepAxis::kP;
  std::vector<double> values;        // empty: DefaultSweepValues(axis)
  std::vector<std::string> corpora;  // "code=path", regenerates dumps
  std::vector<std::string> dumps;    // cached dumps (p axis only)
  std::string gold;
  std::string out;
};

struct SweepRow {
  double value = 0.0;
  std::string task;
  EvalReport report;
};

inline std::vector<SweepRow> CmdSweep(const RunConfig& cfg, const SweepArgs& args,
                                      std::ostream& out, std::ostream& log) {
  const auto values = args.values.empty() ? DefaultSweepValues(args.axis) : args.values;
  if (args.axis == SweepAxis::kSampleSize && args.corpora.empty()) {
    throw Error(ErrorKind::kInvalid, "a sample_size sweep regenerates dumps and needs --corpus");
  }
  if (args.corpora.empty() == args.dumps.empty()) {
    throw Error(ErrorKind::kInvalid, "sweep needs either --corpus or --dumps");
  }
  const auto gold = LoadGoldCsv(args.gold);
  const auto tasks = TasksToRun(cfg, gold);

  std::vector<std::string> inputs{args.gold};
  std::vector<std::pair<std::string, std::vector<Sentence>>> corpora;
  for (const auto& [code, path] : ParseLanguagePaths(args.corpora)) {
    inputs.push_back(path);
    corpora.emplace_back(code, ReadTokenCorpus(path));
  }
  std::vector<FisherDump> cached;
  if (!args.dumps.empty()) {
    for (const auto& f : CollectFiles(args.dumps, ".fgrd")) {
      inputs.push_back(f);
      cached.push_back(LoadDump(f));
    }
  }
  const Provenance prov(cfg, inputs);
  const ToyModel model(cfg.Model());

  auto extract = [&](std::size_t sample_size) {
    std::vector<FisherDump> dumps;
    for (const auto& [code, corpus] : corpora) {
      if (corpus.size() < sample_size) {
        log << "warning: " << code << " corpus smaller than " << sample_size
            << "; sampling with replacement\n";
      }
      for (auto seed : cfg.seeds) {
        ExtractionOptions opt;
        opt.objective = cfg.objective;
        opt.corpus_tag = cfg.corpus_tag;
        opt.language = code;
        opt.seed = seed;
        opt.sample_size = sample_size;
        opt.head_seed = cfg.head_seed;
        opt.num_labels = cfg.num_labels;
        dumps.push_back(ExtractToyFisher(model, corpus, opt));
      }
    }
    return dumps;
  };

  std::vector<SweepRow> rows;
  std::vector<FisherDump> fixed;
  if (args.axis == SweepAxis::kP) fixed = cached.empty() ? extract(cfg.sample_size) : cached;
  for (double v : values) {
    double p = cfg.p;
    std::vector<FisherDump> regenerated;
    const std::vector<FisherDump>* dumps = &fixed;
    if (args.axis == SweepAxis::kP) {
      p = v;
    } else {
      if (!(v >= 1.0) || v != std::floor(v)) {
        throw Error(ErrorKind::kOutOfRange, "sample_size value " + FormatReal(v) +
                                                " is not a positive integer");
      }
      regenerated = extract(static_cast<std::size_t>(v));
      dumps = &regenerated;
    }
    std::vector<SubNetwork> nets;
    for (const auto& d : *dumps) nets.push_back(BuildMask(d, p));
    const auto m = BuildSimilarityMatrix(nets);
    for (const auto& task : tasks) {
      auto r = Evaluate(m, gold, task, cfg.k, Polarity::kHigherBetter);
      rows.push_back({v, task, std::move(r)});
    }
  }

  std::ostringstream body;
  body << "# axis=" << (args.axis == SweepAxis::kP ? "p" : "sample_size") << '\n'
       << "# method=xsns\n# units=percent\n";
  prov.WriteHeader(body);
  body << (args.axis == SweepAxis::kP ? "p" : "sample_size") << ",task,ndcg@" << cfg.k
       << ",top1,pearson,spearman\n";
  for (const auto& r : rows) {
    body << FormatReal(r.value) << ',' << r.task << ',' << FormatReal(r.report.mean_ndcg) << ','
         << FormatReal(r.report.mean_top1) << ','
         << (r.report.mean_pearson ? FormatReal(*r.report.mean_pearson) : "undefined") << ','
         << (r.report.mean_spearman ? FormatReal(*r.report.mean_spearman) : "undefined") << '\n';
  }
  if (args.out.empty() || args.out == "-") {
    out << body.str();
  } else {
    auto f = OpenOutput(args.out);
    f << body.str();
    if (!f) throw Error(ErrorKind::kIo, "failed writing '" + args.out + "'");
  }
  return rows;
}

// ---------------------------------------------------------------------------
// synth

struct SynthArgs {
  std::string out_dir = "synth";
  int families = 3;
  int per_family = 2;
  double noise = 0.3;
  std::uint64_t seed = 7;
  std::size_t sentences = 2048;
  std::size_t min_len = 8;
  std::size_t max_len = 24;
};

// Writes corpora/<code>.txt, gold.csv (task "affinity", score = 100 x
// affinity for every ordered pair), families.csv and emb.vec.
inline std::vector<SyntheticLanguage> CmdSynth(const RunConfig& cfg, const SynthArgs& args,
                                               std::ostream& log) {
  const auto langs = MakeFamilies(args.families, args.per_family, args.noise, args.seed,
                                  cfg.vocab_size);
  const fs::path root(args.out_dir);
  fs::create_directories(root / "corpora");
  const ToyModel model(cfg.Model());

  TransferScoreTable gold;
  LanguageVectorFile emb;
  emb.kind = VectorKind::kEmbedding;
  emb.metadata["pooling"] = "mean_over_tokens_then_sentences";
  emb.metadata["sentences"] = std::to_string(std::min(args.sentences, cfg.sample_size));
  auto fam = OpenOutput((root / "families.csv").string());
  fam << "language,family\n";
  for (const auto& l : langs) {
    const auto corpus = GenerateCorpus(l, args.sentences, args.min_len, args.max_len);
    WriteTokenCorpus(corpus, (root / "corpora" / (l.code + ".txt")).string());
    const std::size_t n = std::min(corpus.size(), cfg.sample_size);
    emb.vectors.push_back({l.code,
                           MeanSentenceEmbedding(model, std::span<const Sentence>(corpus.data(), n)),
                           VectorKind::kEmbedding});
    fam << l.code << ',' << l.family << '\n';
    for (const auto& other : langs) {
      if (other.code == l.code) continue;
      gold.Add({"affinity", other.code, l.code, 0, 100.0 * Affinity(other, l)});
    }
  }
  {
    auto f = OpenOutput((root / "gold.csv").string());
    WriteGoldCsv(gold, f);
  }
  {
    auto f = OpenOutput((root / "emb.vec").string());
    WriteLanguageVectors(emb, f);
  }
  log << "wrote " << langs.size() << " languages to " << root.string() << '\n';
  return langs;
}

}  // namespace xlt::cli
