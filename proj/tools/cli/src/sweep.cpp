// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <thread>
#include <tuple>

#include "kaizen/cli/commands.hpp"
#include "kaizen/errors.hpp"
#include "kaizen/rng.hpp"

namespace kaizen::cli {

namespace {

constexpr std::uint64_t kTagSeedModel = 0x5eed;

/// Runs job(i) for i in [0, n) on up to `jobs` threads. Each job owns its
/// slot of any output; nothing else is shared.
template <typename F>
void parallel_for(std::size_t n, int jobs, F job) {
  const auto workers = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) job(i);
    });
  }
}

std::string tau_text(double alpha, std::int64_t delta) {
  const double tau = effective_half_life(alpha, delta);
  if (std::isinf(tau)) return "inf";
  return std::to_string(std::llround(tau));
}

}  // namespace

std::string run_name(double alpha, std::int64_t delta, PrecisionMode mode, bool cache, std::uint64_t seed) {
  return "a" + format_real_fixed(alpha) + "_d" + std::to_string(delta) + "_" + std::string(to_string(mode)) + "_" +
         (cache ? "cache" : "nocache") + "_s" + std::to_string(seed);
}

std::string summary_csv_header() {
  return "alpha,delta,tau,precision_mode,cache,seed,final_dev_wer,collapsed,steps_to_collapse";
}

std::string summary_csv_row(const SweepRow& r) {
  return format_real_fixed(r.alpha) + "," + std::to_string(r.delta) + "," + tau_text(r.alpha, r.delta) + "," +
         std::string(to_string(r.precision_mode)) + "," + (r.cache ? "true" : "false") + "," + std::to_string(r.seed) +
         "," + format_real(r.final_dev_wer) + "," + (r.collapsed ? "true" : "false") + "," +
         (r.steps_to_collapse ? std::to_string(*r.steps_to_collapse) : "");
}

void sort_rows(std::vector<SweepRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    return std::make_tuple(a.alpha, a.delta, static_cast<int>(a.precision_mode), a.cache, a.seed) <
           std::make_tuple(b.alpha, b.delta, static_cast<int>(b.precision_mode), b.cache, b.seed);
  });
}

void write_summary_csv(const fs::path& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataFormatError("cannot write " + path.string());
  out << summary_csv_header() << '\n';
  for (const auto& r : rows) out << summary_csv_row(r) << '\n';
}

std::vector<SweepRow> run_sweep(const SweepSpec& spec, int jobs, bool force, std::ostream* log) {
  struct Point {
    double alpha;
    std::int64_t delta;
    PrecisionMode mode;
    bool cache;
    std::uint64_t seed;
  };
  std::vector<Point> points;
  for (double a : spec.alphas) {
    for (std::int64_t d : spec.deltas) {
      for (PrecisionMode m : spec.precision_modes) {
        for (bool c : spec.cache) {
          for (std::uint64_t s : spec.seeds) points.push_back(Point{a, d, m, c, s});
        }
      }
    }
  }

  const Corpus corpus = load_data_dir(spec.base.data_dir);
  fs::create_directories(spec.output_dir);

  // Seed models depend only on the seed, so each is trained once up front
  // and then shared read-only by every run with that seed.
  std::vector<std::uint64_t> seeds = spec.seeds;
  std::sort(seeds.begin(), seeds.end());
  seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
  std::vector<ParameterVector> seed_models(seeds.size());
  if (spec.base.seed_checkpoint) {
    const ParameterVector shared = load_checkpoint(*spec.base.seed_checkpoint).params;
    std::fill(seed_models.begin(), seed_models.end(), shared);
  } else {
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
      TrainRunConfig tc = spec.base.train;
      tc.seed = seeds[i];
      seed_models[i] = train_supervised(corpus.supervised, tc, tc.supervised_steps, derive_seed(tc.seed, {kTagSeedModel}));
    });
  }

  std::mutex log_mutex;
  std::vector<SweepRow> rows(points.size());
  parallel_for(points.size(), jobs, [&](std::size_t i) {
    const Point& p = points[i];
    ExperimentConfig config = spec.base;
    config.train.ema.alpha = p.alpha;
    config.train.ema.delta = p.delta;
    config.train.ema.precision_mode = p.mode;
    config.train.seed = p.seed;
    if (p.cache && !config.train.cache) config.train.cache = CacheConfig{};
    if (!p.cache) config.train.cache.reset();
    const auto seed_at = std::lower_bound(seeds.begin(), seeds.end(), p.seed) - seeds.begin();

    RunOptions options;
    options.force = force;
    const fs::path dir = spec.output_dir / run_name(p.alpha, p.delta, p.mode, p.cache, p.seed);
    RunOutcome outcome;
    try {
      outcome = run_experiment(config, corpus, dir, options, &seed_models[static_cast<std::size_t>(seed_at)]);
    } catch (const std::exception& e) {
      outcome.exit_code = exit_code_for(e);
      outcome.final_dev_wer = std::numeric_limits<double>::quiet_NaN();
      outcome.message = e.what();
    }

    SweepRow& row = rows[i];
    row.alpha = p.alpha;
    row.delta = p.delta;
    row.tau = effective_half_life(p.alpha, p.delta);
    row.precision_mode = p.mode;
    row.cache = p.cache;
    row.seed = p.seed;
    row.final_dev_wer = outcome.final_dev_wer;
    row.collapsed = outcome.collapse_step.has_value();
    row.steps_to_collapse = outcome.collapse_step;
    row.exit_code = outcome.exit_code;
    if (log) {
      std::lock_guard lock(log_mutex);
      *log << dir.filename().string() << ": "
           << (outcome.exit_code == kExitOk ? "final_dev_wer=" + format_real(outcome.final_dev_wer) : outcome.message)
           << '\n';
    }
  });

  sort_rows(rows);
  write_summary_csv(spec.output_dir / "summary.csv", rows);
  return rows;
}

int cmd_sweep(const SweepArgs& args, std::ostream& out, std::ostream& err) {
  try {
    SweepSpec spec = load_sweep_spec(args.spec);
    if (args.out) spec.output_dir = *args.out;
    if (args.seed_override) spec.seeds = {*args.seed_override};
    if (args.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const auto rows = run_sweep(spec, args.jobs, args.force, &out);
    std::size_t failed = 0;
    for (const auto& r : rows) failed += (r.exit_code != kExitOk && r.exit_code != kExitCollapse);
    out << "wrote " << (spec.output_dir / "summary.csv").string() << " (" << rows.size() << " runs";
    if (failed) out << ", " << failed << " failed";
    out << ")\n";
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace kaizen::cli
