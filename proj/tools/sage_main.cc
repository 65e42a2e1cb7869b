// Copyright 2026 The SAGE Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sage/error.h"
#include "sage/pipeline.h"

namespace {

struct CommonFlags {
  std::string config;
  std::string corpus;
  std::string out_dir;
  std::string run_id;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool mock_llm = false;
  bool mock_coref = false;
  std::string llm_endpoint;
  std::string llm_model;
  std::string coref_cmd;
  std::string stopwords;
  std::string pronouns;
};

void AddCommon(CLI::App *cmd, CommonFlags &f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--corpus", f.corpus, "Corpus directory or document file");
  cmd->add_option("--out", f.out_dir, "Output directory (runs are written to <out>/<run-id>)");
  cmd->add_option("--run-id", f.run_id, "Run name under the output directory");
  cmd->add_option("--seed", f.seed, "Top-level random seed");
  cmd->add_option("--workers", f.workers, "Document-level worker bound (0 = all cores)");
  cmd->add_flag("--mock-llm", f.mock_llm, "Use the offline heuristic chat model");
  cmd->add_flag("--mock-coref", f.mock_coref, "Use the in-process coreference mock");
  cmd->add_option("--llm-endpoint", f.llm_endpoint, "Chat-completions URL");
  cmd->add_option("--llm-model", f.llm_model, "Chat model name");
  cmd->add_option("--coref-cmd", f.coref_cmd, "Coreference sidecar command");
  cmd->add_option("--stopwords", f.stopwords, "Stopword list, one word per line");
  cmd->add_option("--pronouns", f.pronouns, "Pronoun list, one word per line");
}

sage::RunConfig Resolve(const CommonFlags &f) {
  sage::RunConfig c = f.config.empty() ? sage::RunConfig{} : sage::LoadRunConfig(f.config);
  if (!f.corpus.empty()) c.corpus = f.corpus;
  if (!f.out_dir.empty()) c.out_dir = f.out_dir;
  if (!f.run_id.empty()) c.run_id = f.run_id;
  if (f.seed) c.seed = *f.seed;
  if (f.workers) c.workers = *f.workers;
  if (!f.llm_endpoint.empty()) c.llm.endpoint = f.llm_endpoint;
  if (!f.llm_model.empty()) c.llm.model = f.llm_model;
  if (!f.coref_cmd.empty()) c.coref.command = f.coref_cmd;
  if (!f.stopwords.empty()) c.stopwords = f.stopwords;
  if (!f.pronouns.empty()) c.pronouns = f.pronouns;
  if (f.mock_llm) c.llm.endpoint = "mock";
  if (f.mock_coref) c.coref.command = "mock";
  return c;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"sage: graded entity salience from summaries"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sage::kSageVersion));

  CommonFlags flags;
  bool fill = false;
  std::string predictor;
  sage::EvalArgs eval_args;
  std::string pred_path, compare_path;
  bool salient_only = false;
  std::optional<std::size_t> resamples;
  std::string embedder;

  auto *ingest = app.add_subcommand("ingest", "Validate a corpus and write its canonical form");
  AddCommon(ingest, flags);
  ingest->add_flag("--fill-summaries", fill, "Generate summaries up to the target count");

  auto *align = app.add_subcommand("align", "Run the string, coref and LLM aligners");
  AddCommon(align, flags);

  auto *train = app.add_subcommand("train-ensemble", "Fit the ensemble aligner on dev labels");
  AddCommon(train, flags);

  auto *score = app.add_subcommand("score", "Predict graded salience scores");
  AddCommon(score, flags);
  score->add_option("--predictor", predictor,
                    "aggregate:<string|coref|llm|ensemble|manual>, baseline, llm-zero, llm-3shot")
      ->required();

  auto *eval = app.add_subcommand("eval", "Evaluate a score TSV against gold scores");
  AddCommon(eval, flags);
  eval->add_option("--pred", pred_path, "Prediction score TSV")->required();
  eval->add_option("--gold", eval_args.gold, "auto, manual, corpus, or a score TSV");
  eval->add_option("--compare", compare_path, "Baseline score TSV for a Wilcoxon test");
  eval->add_option("--name", eval_args.name, "Report directory name");
  eval->add_flag("--salient-only", salient_only, "Restrict rho and RMSE to gold >= 1");
  eval->add_option("--resamples", resamples, "Bootstrap resamples");

  auto *stats = app.add_subcommand("stats", "Corpus statistics by genre");
  AddCommon(stats, flags);

  auto *sumqual = app.add_subcommand("sumqual", "ROUGE, Self-BLEU and similarity of summaries");
  AddCommon(sumqual, flags);
  sumqual->add_option("--embedder", embedder, "tfidf or an embedding endpoint URL");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(sage::ErrorKind::kConfig);
  }

  try {
    sage::RunConfig config = Resolve(flags);
    if (ingest->parsed()) {
      sage::CmdIngest(config, fill, std::cout);
    } else if (align->parsed()) {
      sage::CmdAlign(config, std::cout);
    } else if (train->parsed()) {
      sage::CmdTrainEnsemble(config, std::cout);
    } else if (score->parsed()) {
      sage::CmdScore(config, predictor, std::cout);
    } else if (eval->parsed()) {
      if (salient_only) config.salient_only = true;
      if (resamples) config.resamples = *resamples;
      eval_args.predictions = pred_path;
      if (!compare_path.empty()) eval_args.compare = compare_path;
      sage::CmdEval(config, eval_args, std::cout);
    } else if (stats->parsed()) {
      sage::CmdStats(config, std::cout);
    } else if (sumqual->parsed()) {
      if (!embedder.empty()) config.embedder = embedder;
      sage::CmdSumqual(config, std::cout);
    }
  } catch (const sage::Error &e) {
    std::cerr << "sage: error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception &e) {
    std::cerr << "sage: internal error: " << e.what() << "\n";
    return static_cast<int>(sage::ErrorKind::kInternal);
  }
  return 0;
}
