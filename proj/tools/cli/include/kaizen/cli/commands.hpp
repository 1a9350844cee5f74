// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

// The command layer behind the `kaizen` executable. Everything here is
// callable in-process, which is how the acceptance checks drive it.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kaizen/io.hpp"
#include "kaizen/trainer.hpp"

namespace kaizen::cli {

namespace fs = std::filesystem;

enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,
  kExitConfig = 2,
  kExitCollapse = 3,
  kExitNumeric = 4,
};

/// Maps an exception escaping a command to its documented exit status.
int exit_code_for(const std::exception& e);

// --- experiment configs ------------------------------------------------------------

/// Contents of a train config file: where the generated data lives, the
/// run hyperparameters, and optionally a seed model to start from. Relative
/// paths resolve against the directory holding the config file.
struct ExperimentConfig {
  fs::path data_dir;
  TrainRunConfig train;
  std::optional<fs::path> seed_checkpoint;
};

ExperimentConfig experiment_config_from_json(const Json& j, const fs::path& base_dir);
Json to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment_config(const fs::path& path);

/// Sweep axes over a base experiment; the run set is the product of all
/// axes and the seeds.
struct SweepSpec {
  ExperimentConfig base;
  std::vector<double> alphas;
  std::vector<std::int64_t> deltas;
  std::vector<PrecisionMode> precision_modes;
  std::vector<bool> cache;
  std::vector<std::uint64_t> seeds;
  fs::path output_dir;
};

SweepSpec sweep_spec_from_json(const Json& j, const fs::path& base_dir);
SweepSpec load_sweep_spec(const fs::path& path);

// --- data ------------------------------------------------------------------------------

/// Reads the four split files written by `generate`.
Corpus load_data_dir(const fs::path& dir);

/// Writes the four split files and manifest.json. Refuses to overwrite any
/// of them unless `force`.
void write_data_dir(const fs::path& dir, const CorpusConfig& config, bool force);

// --- one run ---------------------------------------------------------------------------

struct RunOutcome {
  int exit_code = kExitOk;
  /// Student dev WER after fine-tuning; for a collapsed run, the student's
  /// dev WER at the last recorded evaluation.
  double final_dev_wer = 0.0;
  std::optional<std::int64_t> collapse_step;
  std::string message;
};

struct RunOptions {
  bool force = false;
  bool resume = false;
  /// Progress and the resolved-config echo; null silences the run.
  std::ostream* log = nullptr;
};

/// Seed model, Kaizen run and fine-tuning for one configuration, writing
/// config.json, metrics.csv, checkpoints and outcome.json into `run_dir`.
/// Library errors are reported through the outcome, never thrown, except
/// for problems with the run directory itself.
RunOutcome run_experiment(const ExperimentConfig& config, const Corpus& corpus, const fs::path& run_dir,
                          const RunOptions& options, const ParameterVector* seed_model = nullptr);

// --- commands --------------------------------------------------------------------------

struct GenerateArgs {
  fs::path config;
  fs::path out;
  bool force = false;
  std::optional<std::uint64_t> seed_override;
};
int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err);

struct TrainArgs {
  fs::path config;
  fs::path out;
  bool force = false;
  bool resume = false;
  std::optional<std::uint64_t> seed_override;
};
int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err);

/// One summary.csv row.
struct SweepRow {
  double alpha = 0.0;
  std::int64_t delta = 1;
  double tau = 0.0;
  PrecisionMode precision_mode = PrecisionMode::kMaster64;
  bool cache = false;
  std::uint64_t seed = 0;
  double final_dev_wer = 0.0;
  bool collapsed = false;
  std::optional<std::int64_t> steps_to_collapse;
  /// Exit status of the run; not written to summary.csv.
  int exit_code = kExitOk;
};

/// Directory name of one run, e.g. "a0.0025_d10_master64_nocache_s1".
std::string run_name(double alpha, std::int64_t delta, PrecisionMode mode, bool cache, std::uint64_t seed);

struct SweepArgs {
  fs::path spec;
  std::optional<fs::path> out;
  int jobs = 1;
  bool force = false;
  std::optional<std::uint64_t> seed_override;
};
/// Runs the whole grid; individual run failures become rows, not errors.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs, bool force, std::ostream* log);
int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err);

std::string summary_csv_header();
std::string summary_csv_row(const SweepRow& row);
/// Canonical order: alpha, delta, precision_mode, cache, seed.
void sort_rows(std::vector<SweepRow>& rows);
void write_summary_csv(const fs::path& path, const std::vector<SweepRow>& rows);

struct EvalArgs {
  fs::path checkpoint;
  fs::path data;
  Split split = Split::kDev;
  std::optional<fs::path> per_utterance;
};
int cmd_eval(const EvalArgs& args, std::ostream& out, std::ostream& err);

/// Single-line key=value summary printed by `eval`, and its parser.
std::string format_eval_line(const EvalResult& result);
std::map<std::string, std::string> parse_key_values(const std::string& line);

struct PlotArgs {
  std::vector<fs::path> runs;
  fs::path out;
};
/// Renders one WER-over-steps polyline per run directory.
std::string render_plot(const std::vector<fs::path>& runs);
int cmd_plot(const PlotArgs& args, std::ostream& out, std::ostream& err);

}  // namespace kaizen::cli
