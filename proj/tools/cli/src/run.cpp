// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

// Config files, data directories, and the single-run pipeline shared by
// `train` and `sweep`.

#include <fstream>
#include <iostream>
#include <limits>

#include "kaizen/cli/commands.hpp"
#include "kaizen/errors.hpp"
#include "kaizen/rng.hpp"

namespace kaizen::cli {

namespace {

constexpr std::uint64_t kTagSeedModel = 0x5eed;

constexpr Split kSplits[] = {Split::kSupervised, Split::kUnsupervised, Split::kDev, Split::kTest};

fs::path resolve(const fs::path& base_dir, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : (base_dir / path).lexically_normal();
}

/// Appends metrics rows as they arrive, so an aborted run keeps every row
/// recorded before the abort.
class MetricsWriter {
 public:
  MetricsWriter(const fs::path& path, const std::vector<MetricsRecord>& existing) : out_(path, std::ios::trunc) {
    if (!out_) throw DataFormatError("cannot write " + path.string());
    out_ << metrics_csv_header() << '\n';
    for (const auto& r : existing) write(r);
  }
  void write(const MetricsRecord& r) { out_ << metrics_csv_row(r) << '\n' << std::flush; }

 private:
  std::ofstream out_;
};

void write_outcome(const fs::path& run_dir, const RunOutcome& outcome) {
  Json j = {{"exit_code", outcome.exit_code},
            {"final_dev_wer", format_real(outcome.final_dev_wer)},
            {"collapsed", outcome.collapse_step.has_value()},
            {"message", outcome.message}};
  j["collapse_step"] = outcome.collapse_step ? Json(*outcome.collapse_step) : Json(nullptr);
  write_json_file(run_dir / "outcome.json", j);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const CollapseError*>(&e)) return kExitCollapse;
  if (dynamic_cast<const NumericError*>(&e) || dynamic_cast<const InfeasibleTargetError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DataFormatError*>(&e) ||
      dynamic_cast<const LayoutError*>(&e) || dynamic_cast<const InvalidArgument*>(&e) ||
      dynamic_cast<const Json::exception*>(&e)) {
    return kExitConfig;
  }
  return kExitFailure;
}

// --- configs ------------------------------------------------------------------------

ExperimentConfig experiment_config_from_json(const Json& j, const fs::path& base_dir) {
  JsonFields f(j);
  ExperimentConfig c;
  c.data_dir = resolve(base_dir, f.string("data"));
  c.train = f.has("train") ? train_config_from_json(f.raw("train")) : TrainRunConfig{};
  if (f.has("seed_checkpoint") && !f.raw("seed_checkpoint").is_null()) {
    c.seed_checkpoint = resolve(base_dir, f.string("seed_checkpoint"));
  }
  f.finish();
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json j = {{"data", c.data_dir.string()}, {"train", to_json(c.train)}};
  j["seed_checkpoint"] = c.seed_checkpoint ? Json(c.seed_checkpoint->string()) : Json(nullptr);
  return j;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
  return experiment_config_from_json(read_json_file(path), path.parent_path());
}

namespace {

template <typename T, typename F>
std::vector<T> read_axis(JsonFields& f, std::string_view key, std::vector<T> fallback, F convert) {
  if (!f.has(key)) return fallback;
  const Json& arr = f.raw(key);
  if (!arr.is_array() || arr.empty()) throw ConfigError("field " + f.where(key) + ": expected a non-empty array");
  std::vector<T> out;
  for (const Json& v : arr) {
    try {
      out.push_back(convert(v));
    } catch (const Json::exception&) {
      throw ConfigError("field " + f.where(key) + ": bad element " + v.dump());
    }
  }
  return out;
}

}  // namespace

SweepSpec sweep_spec_from_json(const Json& j, const fs::path& base_dir) {
  JsonFields f(j);
  SweepSpec s;
  const Json& base = f.raw("base");
  s.base = base.is_string() ? load_experiment_config(resolve(base_dir, base.get<std::string>()))
                            : experiment_config_from_json(base, base_dir);
  const TrainRunConfig& t = s.base.train;
  s.alphas = read_axis<double>(f, "alpha", {t.ema.alpha}, [](const Json& v) { return v.get<double>(); });
  s.deltas = read_axis<std::int64_t>(f, "delta", {t.ema.delta}, [](const Json& v) { return v.get<std::int64_t>(); });
  s.precision_modes = read_axis<PrecisionMode>(f, "precision_mode", {t.ema.precision_mode}, [](const Json& v) {
    return precision_mode_from_string(v.get<std::string>());
  });
  s.cache = read_axis<bool>(f, "cache", {t.cache.has_value()}, [](const Json& v) { return v.get<bool>(); });
  s.seeds = read_axis<std::uint64_t>(f, "seeds", {t.seed}, [](const Json& v) { return v.get<std::uint64_t>(); });
  s.output_dir = resolve(base_dir, f.string("output_dir", "sweep"));
  f.finish();
  // Every grid point must itself be a valid run.
  for (double a : s.alphas) {
    for (std::int64_t d : s.deltas) {
      TrainRunConfig probe = t;
      probe.ema.alpha = a;
      probe.ema.delta = d;
      probe.validate();
    }
  }
  return s;
}

SweepSpec load_sweep_spec(const fs::path& path) { return sweep_spec_from_json(read_json_file(path), path.parent_path()); }

// --- data ---------------------------------------------------------------------------

Corpus load_data_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataFormatError("data directory not found: " + dir.string());
  Corpus c;
  c.supervised = load_dataset(dataset_path(dir, "corpus", Split::kSupervised));
  c.unsupervised = load_dataset(dataset_path(dir, "corpus", Split::kUnsupervised));
  c.dev = load_dataset(dataset_path(dir, "corpus", Split::kDev));
  c.test = load_dataset(dataset_path(dir, "corpus", Split::kTest));
  return c;
}

void write_data_dir(const fs::path& dir, const CorpusConfig& config, bool force) {
  config.validate();
  const fs::path manifest = dir / "manifest.json";
  std::vector<fs::path> targets{manifest};
  for (Split s : kSplits) targets.push_back(dataset_path(dir, "corpus", s));
  if (!force) {
    for (const auto& p : targets) {
      if (fs::exists(p)) throw ConfigError(p.string() + " already exists (use --force to overwrite)");
    }
  }
  fs::create_directories(dir);
  const Corpus corpus = generate_corpus(config);
  Json files = Json::object();
  for (Split s : kSplits) {
    const fs::path p = dataset_path(dir, "corpus", s);
    save_dataset(p, corpus.split(s));
    files[std::string(to_string(s))] = {{"path", p.filename().string()}, {"records", corpus.split(s).size()}};
  }
  write_json_file(manifest, {{"corpus", to_json(config)}, {"seed", config.seed}, {"files", files}});
}

// --- one run ------------------------------------------------------------------------

RunOutcome run_experiment(const ExperimentConfig& config, const Corpus& corpus, const fs::path& run_dir,
                          const RunOptions& options, const ParameterVector* seed_model) {
  const TrainRunConfig& tc = config.train;
  const fs::path metrics_path = run_dir / "metrics.csv";
  const fs::path checkpoint_path = run_dir / "checkpoint.json";
  const fs::path seed_path = run_dir / "seed.json";
  const std::uint64_t hash = config_hash(tc);

  if (!options.resume && !options.force && fs::exists(metrics_path)) {
    throw ConfigError(run_dir.string() + " already holds a run (use --force or --resume)");
  }
  fs::create_directories(run_dir);

  RunOutcome outcome;
  std::vector<MetricsRecord> history;
  try {
    tc.validate();
    const Json resolved = to_json(config);
    write_json_file(run_dir / "config.json", resolved);
    if (options.log) *options.log << "resolved config:\n" << resolved.dump(2) << '\n';

    ParameterVector seed;
    std::optional<RunState> resume_state;
    if (options.resume) {
      Checkpoint ck = load_checkpoint(checkpoint_path);
      if (ck.config_hash != hash) throw ConfigError("checkpoint was written by a different config");
      if (!ck.run) throw ConfigError(checkpoint_path.string() + " is not resumable");
      resume_state = std::move(ck.run);
      seed = load_checkpoint(seed_path).params;
      if (options.log) *options.log << "resuming at step " << resume_state->step << '\n';
    } else if (seed_model) {
      seed = *seed_model;
    } else if (config.seed_checkpoint) {
      seed = load_checkpoint(*config.seed_checkpoint).params;
    } else {
      seed = train_supervised(corpus.supervised, tc, tc.supervised_steps, derive_seed(tc.seed, {kTagSeedModel}));
    }
    check_params(tc.model, seed);
    if (!options.resume) save_checkpoint(seed_path, Checkpoint{"seed", tc.model, hash, seed, std::nullopt});

    MetricsWriter writer(metrics_path, resume_state ? resume_state->metrics : std::vector<MetricsRecord>{});
    RunHooks hooks;
    hooks.metrics.on_record = [&](const MetricsRecord& r) {
      writer.write(r);
      if (options.log) {
        *options.log << "step " << r.step << ' ' << to_string(r.stage) << " dev_wer=" << format_real(r.dev_wer)
                     << " blank_ratio=" << format_real(r.blank_ratio) << '\n';
      }
    };
    hooks.checkpoint_every = tc.eval_every;
    hooks.on_checkpoint = [&](const RunState& st) {
      save_checkpoint(checkpoint_path, Checkpoint{"run", tc.model, hash, st.student, st});
    };

    RunResult result;
    try {
      result = run_kaizen(corpus, seed, tc, hooks, std::move(resume_state));
    } catch (const CollapseError& e) {
      outcome.exit_code = kExitCollapse;
      outcome.collapse_step = e.step();
      outcome.final_dev_wer = e.metrics().empty() ? 1.0 : e.metrics().back().dev_wer;
      outcome.message = e.what();
      write_outcome(run_dir, outcome);
      return outcome;
    }

    ParameterVector tuned = fine_tune(result.student, corpus.supervised, tc, tc.fine_tune_steps, tc.seed, corpus.dev,
                                      tc.total_steps, hooks.metrics, &history);
    save_checkpoint(run_dir / "final.json", Checkpoint{"final", tc.model, hash, tuned, std::nullopt});
    save_checkpoint(run_dir / "teacher.json", Checkpoint{"final", tc.model, hash, result.teacher, std::nullopt});
    outcome.final_dev_wer = evaluate(tc.model, tuned, corpus.dev).wer;
    outcome.message = "ok";
  } catch (const std::exception& e) {
    outcome.exit_code = exit_code_for(e);
    outcome.final_dev_wer = std::numeric_limits<double>::quiet_NaN();
    outcome.message = e.what();
  }
  write_outcome(run_dir, outcome);
  return outcome;
}

// --- commands -----------------------------------------------------------------------

int cmd_generate(const GenerateArgs& args, std::ostream& out, std::ostream& err) {
  try {
    CorpusConfig config = corpus_config_from_json(read_json_file(args.config));
    if (args.seed_override) config.seed = *args.seed_override;
    write_data_dir(args.out, config, args.force);
    out << "wrote " << args.out.string() << '\n';
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

int cmd_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
  try {
    ExperimentConfig config = load_experiment_config(args.config);
    if (args.seed_override) config.train.seed = *args.seed_override;
    const Corpus corpus = load_data_dir(config.data_dir);
    RunOptions options;
    options.force = args.force;
    options.resume = args.resume;
    options.log = &out;
    const RunOutcome outcome = run_experiment(config, corpus, args.out, options);
    if (outcome.exit_code == kExitOk) {
      out << "final_dev_wer=" << format_real(outcome.final_dev_wer) << '\n';
    } else {
      err << "error: " << outcome.message << '\n';
    }
    return outcome.exit_code;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace kaizen::cli
