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

// xlt: command-line front end. Exit codes: 0 success, 1 validation failure,
// 2 missing input, 3 internal error.

#include <functional>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xlt/commands.hpp"

namespace {

using xlt::cli::kExitInternal;
using xlt::cli::kExitOk;
using xlt::cli::kExitValidation;

// Options shared by every subcommand; they override the config file.
struct GlobalOptions {
  std::string config_path;
  std::map<std::string, std::string> overrides;
  std::vector<std::pair<std::string, CLI::Option*>> bound;
  std::map<std::string, std::string> raw;

  void Bind(CLI::App& app, const std::string& flag, const std::string& key,
            const std::string& help) {
    bound.emplace_back(key, app.add_option(flag, raw[key], help));
  }

  xlt::RunConfig Resolve() {
    for (const auto& [key, opt] : bound) {
      if (opt->count() > 0) overrides[key] = raw[key];
    }
    return xlt::ResolveConfig(config_path, overrides);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-lingual transfer prediction from sub-network overlap"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "key=value config file");
  g.Bind(app, "--p", "p", "fraction of parameters kept in each mask (default 0.15)");
  g.Bind(app, "--sample-size", "sample_size", "sentences sampled per dump (default 1024)");
  g.Bind(app, "--seeds", "seeds", "comma-separated seeds (default 0,1,2)");
  g.Bind(app, "--k", "k", "NDCG cutoff (default 3)");
  g.Bind(app, "--objective", "objective", "lm_masked or task_head_random");
  g.Bind(app, "--corpus-tag", "corpus_tag", "task or general");
  g.Bind(app, "--task", "task", "gold task to evaluate (default: all)");
  g.Bind(app, "--vocab-size", "vocab_size", "reference model vocabulary");
  g.Bind(app, "--embed-dim", "embed_dim", "reference model embedding width");
  g.Bind(app, "--hidden-dim", "hidden_dim", "reference model hidden width");
  g.Bind(app, "--model-seed", "model_seed", "reference model weight seed");
  g.Bind(app, "--head-seed", "head_seed", "random task head seed");
  g.Bind(app, "--num-labels", "num_labels", "random task head labels");

  std::function<void(const xlt::RunConfig&)> action;

  // fisher
  xlt::cli::FisherArgs fisher;
  auto* c_fisher = app.add_subcommand("fisher", "accumulate Fisher dumps, one per seed");
  c_fisher->add_option("--corpus", fisher.corpus, "token corpus (one sentence per line)");
  c_fisher->add_option("--grad-stream", fisher.grad_stream, "precomputed FGST gradient stream");
  c_fisher->add_option("--language", fisher.language, "language code");
  c_fisher->add_option("--out-dir", fisher.out_dir, "output directory");
  c_fisher->callback([&] {
    action = [&](const xlt::RunConfig& cfg) { xlt::cli::CmdFisher(cfg, fisher, std::cerr); };
  });

  // mask
  std::string mask_dump;
  std::string mask_out;
  auto* c_mask = app.add_subcommand("mask", "binarize one dump into an FMSK mask");
  c_mask->add_option("dump", mask_dump, "FGRD dump")->required();
  c_mask->add_option("--out", mask_out, "output path (default: dump with .fmsk)");
  c_mask->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      xlt::cli::CmdMask(cfg, mask_dump, mask_out, std::cerr);
    };
  });

  // sim
  std::vector<std::string> sim_inputs;
  std::string sim_out;
  auto* c_sim = app.add_subcommand("sim", "seed-averaged Jaccard similarity matrix");
  c_sim->add_option("inputs", sim_inputs, "dumps, masks or directories")->required();
  c_sim->add_option("--out", sim_out, "matrix CSV (default: stdout)");
  c_sim->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      xlt::cli::CmdSim(cfg, sim_inputs, sim_out, std::cout);
    };
  });

  // rank
  xlt::cli::RankArgs rank;
  auto* c_rank = app.add_subcommand("rank", "rank source languages for a target");
  c_rank->add_option("inputs", rank.inputs, "dumps, masks or directories");
  c_rank->add_option("--matrix", rank.matrix, "precomputed similarity matrix");
  c_rank->add_option("--target", rank.target, "target language")->required();
  c_rank->add_option("--top", rank.top, "keep only the first N candidates");
  c_rank->callback([&] {
    action = [&](const xlt::RunConfig& cfg) { xlt::cli::CmdRank(cfg, rank, std::cout); };
  });

  // baseline
  xlt::cli::BaselineArgs baseline;
  std::string baseline_method;
  auto* c_base = app.add_subcommand("baseline", "baseline similarity matrix");
  c_base->add_option("method", baseline_method, "lex, sue, emb or l2v")
      ->required()
      ->check(CLI::IsMember({"lex", "sue", "emb", "l2v"}));
  c_base->add_option("--corpus", baseline.corpora, "<language>=<path>, repeatable");
  c_base->add_option("--vocab", baseline.vocab, "subword vocabulary, one piece per line");
  c_base->add_option("--vectors", baseline.vectors, "language-vector file");
  c_base->add_option("--out", baseline.out, "matrix CSV (default: stdout)");
  c_base->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      baseline.method = xlt::ParseMethod(baseline_method);
      xlt::cli::CmdBaseline(cfg, baseline, std::cout);
    };
  });

  // eval
  xlt::cli::EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "ranking metrics against gold transfer scores");
  c_eval->add_option("--matrix", eval.matrices, "similarity matrix CSV, repeatable")->required();
  c_eval->add_option("--gold", eval.gold, "gold CSV")->required();
  c_eval->add_option("--out-dir", eval.out_dir, "write one report per method and task");
  c_eval->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      xlt::cli::CmdEval(cfg, eval, std::cout, std::cerr);
    };
  });

  // regress
  xlt::cli::RegressArgs regress;
  std::string regress_model = "mer";
  auto* c_reg = app.add_subcommand("regress", "fit transfer score on similarity");
  c_reg->add_option("--matrix", regress.matrix, "similarity matrix CSV")->required();
  c_reg->add_option("--gold", regress.gold, "gold CSV")->required();
  c_reg->add_option("--model", regress_model, "ols or mer")
      ->check(CLI::IsMember({"ols", "mer"}));
  c_reg->add_option("--out", regress.out, "fit CSV (default: stdout)");
  c_reg->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      regress.model = regress_model == "ols" ? xlt::FitKind::kOls : xlt::FitKind::kMer;
      xlt::cli::CmdRegress(cfg, regress, std::cout);
    };
  });

  // sweep
  xlt::cli::SweepArgs sweep;
  std::string sweep_axis;
  auto* c_sweep = app.add_subcommand("sweep", "NDCG@k across p or sample sizes");
  c_sweep->add_option("--axis", sweep_axis, "p or sample_size")
      ->required()
      ->check(CLI::IsMember({"p", "sample_size", "sample-size"}));
  c_sweep->add_option("--values", sweep.values, "values to sweep (default: built-in set)")
      ->delimiter(',');
  c_sweep->add_option("--corpus", sweep.corpora, "<language>=<path>, repeatable");
  c_sweep->add_option("--dumps", sweep.dumps, "cached dumps or directories (p axis)");
  c_sweep->add_option("--gold", sweep.gold, "gold CSV")->required();
  c_sweep->add_option("--out", sweep.out, "sweep CSV (default: stdout)");
  c_sweep->callback([&] {
    action = [&](const xlt::RunConfig& cfg) {
      sweep.axis = xlt::cli::ParseSweepAxis(sweep_axis);
      xlt::cli::CmdSweep(cfg, sweep, std::cout, std::cerr);
    };
  });

  // synth
  xlt::cli::SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "synthetic language families and fixtures");
  c_synth->add_option("--out-dir", synth.out_dir, "output directory");
  c_synth->add_option("--families", synth.families, "number of families");
  c_synth->add_option("--per-family", synth.per_family, "languages per family");
  c_synth->add_option("--noise", synth.noise, "within-family perturbation in [0, 1)");
  c_synth->add_option("--synth-seed", synth.seed, "generator seed");
  c_synth->add_option("--sentences", synth.sentences, "sentences per corpus");
  c_synth->add_option("--min-len", synth.min_len, "shortest sentence");
  c_synth->add_option("--max-len", synth.max_len, "longest sentence");
  c_synth->callback([&] {
    action = [&](const xlt::RunConfig& cfg) { xlt::cli::CmdSynth(cfg, synth, std::cerr); };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const auto cfg = g.Resolve();
    if (action) action(cfg);
  } catch (const xlt::Error& e) {
    std::cerr << "xlt: " << e.what() << '\n';
    return xlt::cli::ExitCodeFor(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "xlt: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    std::cerr << "xlt: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitOk;
}
