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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xlt/commands.hpp"

namespace xlt::cli {
namespace {

namespace fs = std::filesystem;

class Workspace : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() /
            ("xlt_cmd_" + std::string(info->test_suite_name()) + "_" + info->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string Path(const std::string& rel) const { return (root_ / rel).string(); }

  // Six languages in three families, 300 sentences each.
  std::vector<SyntheticLanguage> Synth(const RunConfig& cfg = {}) {
    SynthArgs a;
    a.out_dir = Path("synth");
    a.sentences = 300;
    std::ostringstream log;
    return CmdSynth(cfg, a, log);
  }

  std::vector<std::string> Corpora(const std::vector<SyntheticLanguage>& langs) {
    std::vector<std::string> out;
    for (const auto& l : langs) out.push_back(l.code + "=" + Path("synth/corpora/" + l.code + ".txt"));
    return out;
  }

  // Dumps for every language and configured seed under dumps/.
  void Dumps(const RunConfig& cfg, const std::vector<SyntheticLanguage>& langs) {
    std::ostringstream log;
    for (const auto& l : langs) {
      FisherArgs f;
      f.corpus = Path("synth/corpora/" + l.code + ".txt");
      f.language = l.code;
      f.out_dir = Path("dumps");
      CmdFisher(cfg, f, log);
    }
  }

  static RunConfig Fast() {
    RunConfig cfg;
    cfg.sample_size = 64;
    return cfg;
  }

  fs::path root_;
};

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST_F(Workspace, ConfigPrecedenceFlagsOverFileOverDefaults) {
  {
    std::ofstream f(Path("run.cfg"));
    f << "# comment\n p = 0.2\nsample_size=64\n\nk = 5\n";
  }
  const auto cfg = ResolveConfig(Path("run.cfg"), {{"p", "0.3"}});
  EXPECT_EQ(cfg.p, 0.3);
  EXPECT_EQ(cfg.sample_size, 64u);
  EXPECT_EQ(cfg.k, 5);
  EXPECT_EQ(cfg.seeds, (std::vector<std::int32_t>{0, 1, 2}));

  const auto defaults = ResolveConfig("", {});
  EXPECT_EQ(defaults.p, 0.15);
  EXPECT_EQ(defaults.sample_size, 1024u);
  EXPECT_EQ(defaults.k, 3);

  try {
    ResolveConfig("", {{"bogus", "1"}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(ExitCodeFor(e), kExitValidation);
  }
  EXPECT_THROW(ResolveConfig("", {{"p", "1.5"}}), Error);
  EXPECT_THROW(ResolveConfig("", {{"seeds", "0,x"}}), Error);
  try {
    ResolveConfig(Path("missing.cfg"), {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(ExitCodeFor(e), kExitMissingInput);
  }
}

TEST_F(Workspace, FisherWritesOneDumpPerSeed) {
  const auto langs = Synth();
  auto cfg = Fast();
  std::ostringstream log;
  FisherArgs f;
  f.corpus = Path("synth/corpora/a0.txt");
  f.language = "a0";
  f.out_dir = Path("dumps");
  const auto written = CmdFisher(cfg, f, log);
  ASSERT_EQ(written.size(), 3u);
  for (const auto& w : written) {
    const auto d = LoadDump(w);
    EXPECT_EQ(d.example_count, 64u);
    EXPECT_FALSE(d.flags & flags::kSampledWithReplacement);
    EXPECT_TRUE(fs::exists(w + ".meta"));
    EXPECT_NE(Slurp(w + ".meta").find("config.sample_size=64"), std::string::npos);
  }
  EXPECT_EQ(fs::path(written[1]).filename(), "a0.s1.fgrd");

  // Default sample size exceeds the 300-sentence corpus.
  const auto big = CmdFisher(RunConfig{}, f, log);
  EXPECT_EQ(LoadDump(big[0]).example_count, 1024u);
  EXPECT_TRUE(LoadDump(big[0]).flags & flags::kSampledWithReplacement);
  EXPECT_NE(log.str().find("warning"), std::string::npos);
}

TEST_F(Workspace, FisherFromGradientStream) {
  const LayoutManifest man("m", {{"w", {3}}});
  {
    auto out = OpenOutput(Path("g.fgst"));
    GradientStreamWriter w(out, man, RunTag{"en", Objective::kLmMasked, CorpusTag::kTaskCorpus, 4});
    w.Append(std::vector<double>{1, 2, 3});
    w.Append(std::vector<double>{3, 2, 1});
    w.Flush();
  }
  FisherArgs f;
  f.grad_stream = Path("g.fgst");
  f.out_dir = Path("out");
  std::ostringstream log;
  const auto written = CmdFisher(RunConfig{}, f, log);
  ASSERT_EQ(written.size(), 1u);
  EXPECT_EQ(fs::path(written[0]).filename(), "en.s4.fgrd");
  EXPECT_EQ(LoadDump(written[0]).values, (std::vector<float>{5, 4, 5}));
  f.corpus = "x";
  EXPECT_THROW(CmdFisher(RunConfig{}, f, log), Error);
}

TEST_F(Workspace, MaskAndSimRecordDefaults) {
  const auto langs = Synth();
  auto fast = Fast();
  fast.seeds = {0};
  Dumps(fast, langs);
  std::ostringstream log;
  const auto mask_path = CmdMask(RunConfig{}, Path("dumps/a0.s0.fgrd"), Path("a0.s0.fmsk"), log);
  EXPECT_EQ(fs::path(mask_path).extension(), ".fmsk");
  const auto mask = LoadMask(mask_path);
  EXPECT_EQ(mask.k_selected, SelectionCount(0.15, mask.bits.size()));

  std::ostringstream csv;
  const auto m = CmdSim(RunConfig{}, {Path("dumps")}, "-", csv);
  EXPECT_EQ(m.size(), 6u);
  const auto s = csv.str();
  for (const char* needle : {"# config.p=0.15", "# config.sample_size=1024",
                             "# config.seeds=0,1,2", "# config.k=3"}) {
    EXPECT_NE(s.find(needle), std::string::npos) << needle;
  }
}

TEST_F(Workspace, RankPutsFamilyMemberFirst) {
  const auto langs = Synth();
  Dumps(Fast(), langs);
  RankArgs r;
  r.inputs = {Path("dumps")};
  r.target = "a0";
  r.top = 3;
  std::ostringstream out;
  const auto ranking = CmdRank(Fast(), r, out);
  ASSERT_EQ(ranking.ordered_sources.size(), 3u);
  EXPECT_EQ(ranking.ordered_sources[0], "a1");
  EXPECT_NE(out.str().find("# top=3"), std::string::npos);
  EXPECT_NE(out.str().find("# polarity=higher_better"), std::string::npos);
  EXPECT_NE(out.str().find("rank,source,score\n1,a1,"), std::string::npos) << out.str();

  r.target = "zz";
  try {
    CmdRank(Fast(), r, out);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(ExitCodeFor(e), kExitMissingInput);
  }
}

TEST_F(Workspace, LayoutMismatchNamesEveryOffender) {
  const auto langs = Synth();
  auto cfg = Fast();
  cfg.seeds = {0};
  Dumps(cfg, langs);
  auto other = cfg;
  other.hidden_dim = 8;
  std::ostringstream log;
  for (const char* code : {"b0", "c1"}) {
    FisherArgs f;
    f.corpus = Path(std::string("synth/corpora/") + code + ".txt");
    f.language = code;
    f.out_dir = Path("dumps");
    CmdFisher(other, f, log);
  }
  try {
    XsnsMatrixFromFiles(cfg, {Path("dumps")});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kLayoutMismatch);
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2 file(s)"), std::string::npos) << msg;
    EXPECT_NE(msg.find("b0.s0.fgrd"), std::string::npos) << msg;
    EXPECT_NE(msg.find("c1.s0.fgrd"), std::string::npos) << msg;
  }
}

TEST_F(Workspace, EvalPerfectPredictorAndMissingGold) {
  const auto langs = Synth();
  std::vector<std::string> codes;
  for (const auto& l : langs) codes.push_back(l.code);
  SimilarityMatrix m(codes, Method::kXsns);
  for (const auto& t : langs) {
    for (const auto& s : langs) m.at(m.IndexOf(t.code), m.IndexOf(s.code)) = Affinity(s, t);
  }
  SaveMatrixCsv(m, Path("oracle.csv"));

  EvalArgs a;
  a.matrices = {Path("oracle.csv")};
  a.gold = Path("synth/gold.csv");
  a.out_dir = Path("reports");
  std::ostringstream out;
  std::ostringstream log;
  const auto reports = CmdEval(RunConfig{}, a, out, log);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_NEAR(reports[0].mean_ndcg, 100.0, 1e-6);
  EXPECT_NEAR(reports[0].mean_top1, 100.0, 1e-9);
  EXPECT_TRUE(fs::exists(Path("reports/report.affinity.xsns.csv")));
  EXPECT_NE(out.str().find("# config.k=3"), std::string::npos);

  a.gold = Path("nope.csv");
  try {
    CmdEval(RunConfig{}, a, out, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(ExitCodeFor(e), kExitMissingInput);
  }

  // Gold that omits one language entirely.
  TransferScoreTable partial;
  const auto full = LoadGoldCsv(Path("synth/gold.csv"));
  for (const auto& r : full.rows()) {
    if (r.source != "c1" && r.target != "c1") partial.Add(r);
  }
  {
    auto f = OpenOutput(Path("partial.csv"));
    WriteGoldCsv(partial, f);
  }
  a.gold = Path("partial.csv");
  try {
    CmdEval(RunConfig{}, a, out, log);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNotFound);
    EXPECT_NE(std::string(e.what()).find("c1"), std::string::npos);
  }
}

TEST_F(Workspace, BaselinesFromSynthOutputs) {
  const auto langs = Synth();
  BaselineArgs b;
  b.method = Method::kLex;
  b.corpora = Corpora(langs);
  std::ostringstream out;
  const auto lex = CmdBaseline(RunConfig{}, b, out);
  EXPECT_EQ(lex.method(), Method::kLex);
  EXPECT_EQ(lex.metadata().at("tokenization"), "token_ids");
  // Same-family divergence below cross-family divergence.
  EXPECT_LT(lex.at("a0", "a1"), lex.at("a0", "b0"));

  b.method = Method::kEmb;
  b.corpora.clear();
  b.vectors = Path("synth/emb.vec");
  const auto emb = CmdBaseline(RunConfig{}, b, out);
  EXPECT_EQ(emb.size(), 6u);
  EXPECT_EQ(emb.metadata().at("vectors.pooling"), "mean_over_tokens_then_sentences");

  b.method = Method::kL2v;
  EXPECT_THROW(CmdBaseline(RunConfig{}, b, out), Error);
  b.method = Method::kSue;
  EXPECT_THROW(CmdBaseline(RunConfig{}, b, out), Error);
}

TEST_F(Workspace, RegressWritesFit) {
  const auto langs = Synth();
  Dumps(Fast(), langs);
  std::ostringstream sink;
  CmdSim(Fast(), {Path("dumps")}, Path("xsns.csv"), sink);
  RegressArgs r;
  r.matrix = Path("xsns.csv");
  r.gold = Path("synth/gold.csv");
  std::ostringstream out;
  const auto fit = CmdRegress(RunConfig{}, r, out);
  EXPECT_EQ(fit.kind, FitKind::kMer);
  EXPECT_GT(fit.beta1, 0.0);
  for (const char* needle : {"model,mer", "beta1,", "score_rmse,", "score_ndcg@3,", "u[a0],"}) {
    EXPECT_NE(out.str().find(needle), std::string::npos) << needle;
  }
  r.model = FitKind::kOls;
  std::ostringstream ols;
  CmdRegress(RunConfig{}, r, ols);
  EXPECT_NE(ols.str().find("model,ols"), std::string::npos);
}

TEST_F(Workspace, SweepRowCountsAndDeterminism) {
  const auto langs = Synth();
  auto cfg = Fast();
  cfg.seeds = {0, 1};
  SweepArgs s;
  s.axis = SweepAxis::kP;
  s.values = {0.05, 0.15, 0.5};
  s.corpora = Corpora(langs);
  s.gold = Path("synth/gold.csv");
  std::ostringstream out1;
  std::ostringstream log;
  const auto rows = CmdSweep(cfg, s, out1, log);
  EXPECT_EQ(rows.size(), 3u);
  std::ostringstream out2;
  CmdSweep(cfg, s, out2, log);
  EXPECT_EQ(out1.str(), out2.str());
  EXPECT_NE(out1.str().find("p,task,ndcg@3,top1,pearson,spearman\n"), std::string::npos);

  s.axis = SweepAxis::kSampleSize;
  s.values = {8, 16, 24, 32, 48, 64};
  std::ostringstream out3;
  const auto rows2 = CmdSweep(cfg, s, out3, log);
  EXPECT_EQ(rows2.size(), 6u);
  EXPECT_NE(out3.str().find("sample_size,task,"), std::string::npos);

  s.values = {2.5};
  EXPECT_THROW(CmdSweep(cfg, s, out3, log), Error);
  EXPECT_EQ(DefaultSweepValues(SweepAxis::kSampleSize).size(), 6u);
  EXPECT_EQ(DefaultSweepValues(SweepAxis::kP).size(), 7u);
}

TEST_F(Workspace, SynthOutputsAreConsistent) {
  const auto langs = Synth();
  EXPECT_EQ(langs.size(), 6u);
  const auto gold = LoadGoldCsv(Path("synth/gold.csv"));
  EXPECT_EQ(gold.rows().size(), 30u);
  const auto corpus = ReadTokenCorpus(Path("synth/corpora/b1.txt"));
  EXPECT_EQ(corpus, GenerateCorpus(langs[3], 300, 8, 24));
  EXPECT_NE(Slurp(Path("synth/families.csv")).find("c1,2"), std::string::npos);
}

TEST(TokenCorpus, RejectsGarbage) {
  const auto p = (fs::temp_directory_path() / "xlt_bad_corpus.txt").string();
  {
    std::ofstream f(p);
    f << "1 2 3\n4 x 5\n";
  }
  EXPECT_THROW(ReadTokenCorpus(p), Error);
  fs::remove(p);
  EXPECT_THROW(ParseLanguagePaths({"noequals"}), Error);
}

}  // namespace
}  // namespace xlt::cli
