// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <CLI/CLI.hpp>
#include <iostream>

#include "kaizen/cli/commands.hpp"

namespace {

constexpr const char* kFooter =
    "Exit status: 0 success, 1 other failure, 2 config/data error, 3 training collapse, 4 numeric error.";

}  // namespace

int main(int argc, char** argv) {
  using namespace kaizen::cli;

  CLI::App app{"Kaizen: continuous pseudo-labeling with an EMA teacher on synthetic sequence data."};
  app.footer(kFooter);
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed_override;
  int jobs = 1;
  bool force = false;
  bool resume = false;
  app.add_option("--seed-override", seed_override, "Replace the seed of the config (sweep: run only this seed)");
  app.add_option("--jobs", jobs, "Parallel runs for sweep")->check(CLI::PositiveNumber);
  app.add_flag("--force", force, "Overwrite existing outputs");
  app.add_flag("--resume", resume, "Continue train from the checkpoint in the output directory");

  GenerateArgs gen;
  auto* generate = app.add_subcommand("generate", "Write a synthetic corpus (four splits and manifest.json)");
  generate->add_option("--config", gen.config, "Corpus config JSON")->required()->check(CLI::ExistingFile);
  generate->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* train = app.add_subcommand("train", "Seed model, Kaizen run and fine-tuning for one config");
  train->add_option("--config", tr.config, "Experiment config JSON")->required()->check(CLI::ExistingFile);
  train->add_option("--out", tr.out, "Run directory")->required();

  SweepArgs sw;
  auto* sweep = app.add_subcommand("sweep", "Run a grid of configurations and write summary.csv");
  sweep->add_option("--spec", sw.spec, "Sweep spec JSON")->required()->check(CLI::ExistingFile);
  sweep->add_option("--out", sw.out, "Output directory (default: output_dir of the sweep file)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval->add_option("--checkpoint", ev.checkpoint, "Checkpoint JSON")->required()->check(CLI::ExistingFile);
  eval->add_option("--data", ev.data, "Data directory written by generate")->required();
  const std::map<std::string, kaizen::Split> splits{{"supervised", kaizen::Split::kSupervised},
                                                    {"unsupervised", kaizen::Split::kUnsupervised},
                                                    {"dev", kaizen::Split::kDev},
                                                    {"test", kaizen::Split::kTest}};
  std::string split_name = "dev";
  eval->add_option("--split", split_name, "supervised, unsupervised, dev or test (default dev)")
      ->check(CLI::IsMember(splits));
  eval->add_option("--per-utterance", ev.per_utterance, "Also write per-utterance results to this CSV");

  PlotArgs pl;
  auto* plot = app.add_subcommand("plot", "Render dev WER curves of run directories as SVG");
  plot->add_option("runs", pl.runs, "Run directories")->required()->check(CLI::ExistingDirectory);
  plot->add_option("--out", pl.out, "Output SVG")->required();

  for (auto* sub : {generate, train, sweep, eval, plot}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*generate) {
    gen.force = force;
    gen.seed_override = seed_override;
    return cmd_generate(gen, std::cout, std::cerr);
  }
  if (*train) {
    tr.force = force;
    tr.resume = resume;
    tr.seed_override = seed_override;
    return cmd_train(tr, std::cout, std::cerr);
  }
  if (*sweep) {
    sw.jobs = jobs;
    sw.force = force;
    sw.seed_override = seed_override;
    return cmd_sweep(sw, std::cout, std::cerr);
  }
  if (*eval) {
    ev.split = splits.at(split_name);
    return cmd_eval(ev, std::cout, std::cerr);
  }
  return cmd_plot(pl, std::cout, std::cerr);
}
