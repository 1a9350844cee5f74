// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only 1,5,9` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "kaizen/cli/commands.hpp"
#include "kaizen/ema.hpp"
#include "kaizen/errors.hpp"
#include "kaizen/losses.hpp"
#include "kaizen/model.hpp"
#include "kaizen/rng.hpp"
#include "kaizen/trainer.hpp"
#include "oracles.hpp"

namespace {

using namespace kaizen;
namespace fs = std::filesystem;

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
  Matrix m(rows, cols);
  for (double& v : m.values()) v = scale * rng.normal();
  return m;
}

std::vector<int> random_tokens(Rng& rng, std::size_t n, int vocab) {
  std::vector<int> t(n);
  for (int& x : t) x = static_cast<int>(rng.uniform_int(1, vocab));
  return t;
}

// Relative error floor for finite-difference comparisons: gradient entries
// below it are compared absolutely.
constexpr double kFdFloor = 1e-4;
constexpr double kFdStep = 1e-5;

// --- 1 ----------------------------------------------------------------------------------

Verdict half_life_table() {
  // (alpha, delta, printed tau) rows of the published half-life table.
  const std::tuple<double, std::int64_t, long long> rows[] = {
      {0.01, 1, 69}, {0.001, 1, 693}, {0.0001, 1, 6931}, {0.001, 10, 6928}, {0.0025, 10, 2769}};
  Verdict v{true, ""};
  for (const auto& [alpha, delta, tau] : rows) {
    const long long got = std::llround(half_life(alpha, delta));
    v.detail += (v.detail.empty() ? "" : " ") + std::to_string(got);
    v.pass = v.pass && got == tau;
  }
  return v;
}

// --- 2 ----------------------------------------------------------------------------------

Verdict ctc_oracle() {
  Rng rng(2024);
  std::size_t compared = 0;
  double worst = 0.0;
  while (compared < 600) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const int vocab = static_cast<int>(rng.uniform_int(1, 3));
    auto target = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 4)), vocab);
    while (ctc_min_frames(target) > frames) target.pop_back();
    const auto lp = log_softmax(random_matrix(rng, frames, static_cast<std::size_t>(vocab) + 1, 2.0));
    const double loss = ctc_loss(lp, target).loss;
    const double reference = -std::log(oracle::ctc_probability(lp, target));
    worst = std::max({worst, std::fabs(loss - reference), std::fabs(loss - ctc_bruteforce(lp, target))});
    ++compared;
  }
  Matrix uniform(2, 2, std::log(0.5));
  const double analytic = ctc_loss(uniform, std::vector<int>{1}).loss;
  const double analytic_err = std::fabs(analytic + std::log(0.75));
  return {worst <= 1e-9 && analytic_err <= 1e-12,
          std::to_string(compared) + " instances, max |diff| " + fmt(worst, 3) + "; T=2 uniform " + fmt(analytic, 12)};
}

// --- 3 ----------------------------------------------------------------------------------

template <typename Loss>
double worst_fd_error(const Matrix& logits, const Matrix& analytic, Loss loss) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  auto f = [&](std::vector<double>& z) {
    Matrix m(rows, cols);
    std::copy(z.begin(), z.end(), m.values().begin());
    return loss(m);
  };
  const std::vector<double> z(logits.values().begin(), logits.values().end());
  double worst = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    worst = std::max(worst, oracle::relative_error(analytic.values()[i], oracle::central_difference(f, z, i, kFdStep),
                                                   kFdFloor));
  }
  return worst;
}

Verdict gradient_fidelity() {
  constexpr int kCases = 120;
  Rng rng(3);
  double ctc_worst = 0.0, kl_worst = 0.0, model_worst = 0.0;
  for (int trial = 0; trial < kCases; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const int vocab = static_cast<int>(rng.uniform_int(1, 4));
    auto target = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 3)), vocab);
    while (ctc_min_frames(target) > frames) target.pop_back();
    const Matrix logits = random_matrix(rng, frames, static_cast<std::size_t>(vocab) + 1, 1.5);
    const auto lp = log_softmax(logits);
    ctc_worst = std::max(ctc_worst, worst_fd_error(logits, log_softmax_backward(lp, ctc_loss(lp, target).grad),
                                                   [&](const Matrix& m) { return ctc_loss(log_softmax(m), target).loss; }));
  }
  for (int trial = 0; trial < kCases; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const auto classes = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const auto teacher = log_softmax(random_matrix(rng, frames, classes, 2.0));
    const Matrix logits = random_matrix(rng, frames, classes, 1.5);
    const double threshold = rng.uniform(0.5, 0.999);
    const auto lp = log_softmax(logits);
    kl_worst = std::max(kl_worst, worst_fd_error(logits, log_softmax_backward(lp, kl_topk_loss(teacher, lp, threshold).grad),
                                                 [&](const Matrix& m) {
                                                   return kl_topk_loss(teacher, log_softmax(m), threshold).loss;
                                                 }));
  }
  for (int trial = 0; trial < kCases; ++trial) {
    const ModelDims dims{static_cast<std::size_t>(rng.uniform_int(1, 3)), static_cast<std::size_t>(rng.uniform_int(0, 2)),
                         static_cast<std::size_t>(rng.uniform_int(1, 4)), static_cast<std::size_t>(rng.uniform_int(1, 3))};
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 5));
    auto params = init_params(dims, static_cast<std::uint64_t>(trial));
    for (double& v : params.values()) v += 0.3 * rng.normal();
    const Matrix x = random_matrix(rng, frames, dims.feature_dim);
    const Matrix w = random_matrix(rng, frames, dims.output_dim());
    const auto mode = trial % 2 ? ForwardMode::kTrain : ForwardMode::kEval;
    const auto seed = static_cast<std::uint64_t>(trial) + 7;
    const ParameterVector analytic = backward(forward(dims, params, x, mode, 0.3, seed).trace, w);
    auto f = [&](std::vector<double>& theta) {
      ParameterVector p = params;
      std::copy(theta.begin(), theta.end(), p.values().begin());
      const Matrix logits = forward(dims, p, x, mode, 0.3, seed).logits;
      double total = 0.0;
      for (std::size_t i = 0; i < logits.values().size(); ++i) total += logits.values()[i] * w.values()[i];
      return total;
    };
    const std::vector<double> theta(params.values().begin(), params.values().end());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      model_worst = std::max(model_worst, oracle::relative_error(analytic.values()[i],
                                                                 oracle::central_difference(f, theta, i, kFdStep), kFdFloor));
    }
  }
  return {std::max({ctc_worst, kl_worst, model_worst}) <= 1e-5,
          std::to_string(kCases) + " cases each; worst rel err ctc " + fmt(ctc_worst, 2) + ", kl " + fmt(kl_worst, 2) +
              ", model " + fmt(model_worst, 2)};
}

// --- 4 ----------------------------------------------------------------------------------

Verdict ema_algebra() {
  Rng rng(4);
  double worst_unrolled = 0.0, worst_sum = 0.0;
  for (int trial = 0; trial < 60; ++trial) {
    const double alpha = trial % 3 == 0 ? rng.uniform(0.5, 1.0) : std::pow(10.0, rng.uniform(-4.0, 0.0));
    const auto n = rng.uniform_int(0, 200);
    std::vector<ParameterVector> students;
    ParameterVector initial = zero_params(ModelDims{1, 0, 1, 1});
    for (double& v : initial.values()) v = rng.normal();
    EmaState state = ema_init(initial, EmaConfig{alpha, 1, PrecisionMode::kMaster64, 0});
    for (std::int64_t k = 1; k <= n; ++k) {
      ParameterVector s = initial;
      for (double& v : s.values()) v = rng.normal();
      students.push_back(s);
      state = ema_update(std::move(state), s, k);
    }
    const UnrolledWeights w = unrolled_weights(alpha, n);
    double weight_total = w.residual;
    for (double x : w.weights) weight_total += x;
    worst_sum = std::max(worst_sum, std::fabs(weight_total - 1.0));
    for (std::size_t i = 0; i < initial.size(); ++i) {
      double expected = w.residual * initial.values()[i];
      for (std::size_t j = 0; j < w.weights.size(); ++j) {
        expected += w.weights[j] * students[students.size() - 1 - j].values()[i];
      }
      worst_unrolled = std::max(worst_unrolled, std::fabs(expected - state.master.values()[i]));
    }
  }

  // Frozen and snapshot teachers, bitwise.
  const ParameterVector start = init_params(ModelDims{2, 1, 3, 2}, 1);
  EmaState frozen = ema_init(start, EmaConfig{0.0, 1, PrecisionMode::kMaster64, 0});
  const std::int64_t d = 7;
  EmaState snap = ema_init(start, EmaConfig{1.0, d, PrecisionMode::kMaster64, 0});
  bool frozen_ok = true, snapshot_ok = true;
  for (std::int64_t step = 1; step <= 100; ++step) {
    const ParameterVector student = init_params(ModelDims{2, 1, 3, 2}, static_cast<std::uint64_t>(step) + 10);
    frozen = ema_update(std::move(frozen), student, step);
    snap = ema_update(std::move(snap), student, step);
    frozen_ok = frozen_ok && frozen.master == start;
    if (step % d == 0) snapshot_ok = snapshot_ok && snap.master == student;
  }
  return {worst_unrolled <= 1e-12 && worst_sum <= 1e-12 && frozen_ok && snapshot_ok,
          "max unrolled diff " + fmt(worst_unrolled, 2) + ", max |sum-1| " + fmt(worst_sum, 2) +
              ", alpha=0 frozen " + (frozen_ok ? "yes" : "no") + ", alpha=1 snapshots " + (snapshot_ok ? "yes" : "no")};
}

// --- 5 ----------------------------------------------------------------------------------

Verdict precision_effect() {
  constexpr double kAlpha = 1e-4;
  constexpr std::int64_t kUpdates = 10000;
  Rng rng(5);
  ParameterVector teacher = init_params(ModelDims{3, 1, 4, 3}, 5);
  for (double& v : teacher.values()) v = quantize_binary16(rng.uniform(0.25, 4.0) * (rng.bernoulli(0.5) ? 1 : -1));
  ParameterVector student = teacher;
  for (double& v : student.values()) v *= 1.0 + 1e-3;
  const EmaConfig config{kAlpha, 1, PrecisionMode::kMaster64, 0};
  EmaState lo = ema_init(teacher, config);
  EmaState hi = lo;
  for (std::int64_t step = 1; step <= kUpdates; ++step) {
    lo = ema_update_lowprecision(std::move(lo), student, step);
    hi = ema_update(std::move(hi), student, step);
  }
  const double expected = std::pow(1.0 - kAlpha, static_cast<double>(kUpdates));
  double worst = 0.0, mean_factor = 0.0;
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    const double factor = std::fabs(hi.master.values()[i] - student.values()[i]) /
                          std::fabs(teacher.values()[i] - student.values()[i]);
    mean_factor += factor / static_cast<double>(teacher.size());
    worst = std::max(worst, std::fabs(factor - expected) / expected);
  }
  const bool unchanged = lo.master == teacher;
  return {unchanged && worst <= 0.01,
          std::string("binary16 master ") + (unchanged ? "bitwise unchanged" : "CHANGED") + "; full-precision gap factor " +
              fmt(mean_factor, 6) + " vs (1-a)^n " + fmt(expected, 6) + " (max rel dev " + fmt(worst, 2) + ")"};
}

// --- 6-8: training runs on the default corpus --------------------------------------

struct RunKey {
  Paradigm paradigm;
  double alpha;
  std::int64_t delta;
  bool cache;
  std::uint64_t seed;
  auto operator<=>(const RunKey&) const = default;
};

struct RunRecord {
  bool collapsed = false;
  std::int64_t collapse_step = 0;
  std::optional<double> final_dev_wer;  // after fine-tuning
};

constexpr std::uint64_t kTagSeedModel = 0x5eed;
const std::uint64_t kSeeds[] = {1, 2, 3};

class Lab {
 public:
  Lab() : corpus_(generate_corpus(CorpusConfig{})) {}

  const RunRecord& run(const RunKey& key, bool need_fine_tune) {
    auto it = runs_.find(key);
    if (it != runs_.end() && (!need_fine_tune || it->second.final_dev_wer || it->second.collapsed)) return it->second;
    TrainRunConfig tc;
    tc.paradigm = key.paradigm;
    tc.ema.alpha = key.alpha;
    tc.ema.delta = key.delta;
    tc.seed = key.seed;
    if (key.cache) tc.cache = CacheConfig{100, 0.1};
    tc.validate();
    RunRecord rec;
    try {
      const RunResult result = run_kaizen(corpus_, seed_model(key.seed), tc);
      if (need_fine_tune) {
        const ParameterVector tuned =
            fine_tune(result.student, corpus_.supervised, tc, tc.fine_tune_steps, tc.seed);
        rec.final_dev_wer = evaluate(tc.model, tuned, corpus_.dev).wer;
      }
    } catch (const CollapseError& e) {
      rec.collapsed = true;
      rec.collapse_step = e.step();
    }
    std::cout << "    run " << to_string(key.paradigm) << " a=" << format_real_fixed(key.alpha) << " d=" << key.delta
              << (key.cache ? " cache" : "") << " seed=" << key.seed << ": "
              << (rec.collapsed ? "collapsed at step " + std::to_string(rec.collapse_step)
                                : rec.final_dev_wer ? "fine-tuned dev WER " + fmt(*rec.final_dev_wer) : "stable")
              << std::endl;
    return runs_[key] = rec;
  }

 private:
  const ParameterVector& seed_model(std::uint64_t seed) {
    auto it = seed_models_.find(seed);
    if (it == seed_models_.end()) {
      TrainRunConfig tc;
      tc.seed = seed;
      it = seed_models_
               .emplace(seed, train_supervised(corpus_.supervised, tc, tc.supervised_steps,
                                               derive_seed(seed, {kTagSeedModel})))
               .first;
    }
    return it->second;
  }

  Corpus corpus_;
  std::map<std::uint64_t, ParameterVector> seed_models_;
  std::map<RunKey, RunRecord> runs_;
};

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict with_budget(Verdict v, double start_cpu, double budget_seconds) {
  const double used = cpu_seconds() - start_cpu;
  v.detail += "; " + fmt(used, 4) + " s CPU (budget " + fmt(budget_seconds, 4) + " s)";
  v.pass = v.pass && used <= budget_seconds;
  return v;
}

Verdict stability_trend(Lab& lab) {
  const double start = cpu_seconds();
  const std::pair<double, std::int64_t> grid[] = {{0.1, 1},   {0.001, 1}, {0.001, 10},
                                                  {0.0001, 1}, {1.0, 20},  {1.0, 2000}};
  int fast = 0, fast_collapsed = 0, slow = 0, slow_stable = 0;
  std::string detail;
  for (const auto& [alpha, delta] : grid) {
    const double tau = effective_half_life(alpha, delta);
    int collapsed = 0;
    for (std::uint64_t seed : kSeeds) collapsed += lab.run({Paradigm::kCtc, alpha, delta, false, seed}, false).collapsed;
    if (tau < 100) {
      fast += 3;
      fast_collapsed += collapsed;
    } else if (tau >= 2000) {
      slow += 3;
      slow_stable += 3 - collapsed;
    }
    detail += (detail.empty() ? "" : ", ") + std::string("tau=") + std::to_string(std::llround(tau)) + ":" +
              std::to_string(collapsed) + "/3 collapsed";
  }
  Verdict v{fast_collapsed == fast && slow_stable == slow, detail};
  return with_budget(v, start, 15 * 60);
}

Verdict kaizen_beats_frozen(Lab& lab) {
  const double start = cpu_seconds();
  bool pass = true;
  std::string detail;
  for (Paradigm p : {Paradigm::kCtc, Paradigm::kFrameKl}) {
    std::vector<double> kaizen, frozen;
    bool any_collapse = false;
    for (std::uint64_t seed : kSeeds) {
      const RunRecord& k = lab.run({p, 0.0025, 10, false, seed}, true);
      const RunRecord& f = lab.run({p, 0.0, 1, false, seed}, true);
      any_collapse = any_collapse || k.collapsed || f.collapsed;
      if (k.final_dev_wer) kaizen.push_back(*k.final_dev_wer);
      if (f.final_dev_wer) frozen.push_back(*f.final_dev_wer);
    }
    if (any_collapse || kaizen.empty() || frozen.empty()) {
      pass = false;
      detail += std::string(to_string(p)) + ": collapsed run; ";
      continue;
    }
    const double mk = median(kaizen), mf = median(frozen);
    const double gain = (mf - mk) / mf;
    pass = pass && gain >= 0.05;
    detail += std::string(to_string(p)) + ": median WER Kaizen " + fmt(mk) + " vs frozen " + fmt(mf) + " (" +
              fmt(100 * gain, 3) + "% rel); ";
  }
  if (detail.size() >= 2) detail.resize(detail.size() - 2);
  return with_budget({pass, detail}, start, 20 * 60);
}

Verdict cache_composition(Lab& lab) {
  const double start = cpu_seconds();
  bool pass = true;
  std::vector<double> with_cache, without;
  for (std::uint64_t seed : kSeeds) {
    const RunRecord& c = lab.run({Paradigm::kCtc, 0.0025, 10, true, seed}, true);
    const RunRecord& k = lab.run({Paradigm::kCtc, 0.0025, 10, false, seed}, true);
    if (c.collapsed || !c.final_dev_wer || !k.final_dev_wer) {
      pass = false;
      continue;
    }
    with_cache.push_back(*c.final_dev_wer);
    without.push_back(*k.final_dev_wer);
  }
  if (!pass) return with_budget({false, "cache run collapsed or failed"}, start, 10 * 60);
  const double mc = median(with_cache), mk = median(without);
  return with_budget({mc <= mk * 1.02, "median WER cache " + fmt(mc) + " vs no-cache " + fmt(mk) + " (limit " +
                                           fmt(mk * 1.02) + "), no collapse in 3/3"},
                     start, 10 * 60);
}

// --- 9 ----------------------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Verdict determinism() {
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("kaizen_acceptance_" + std::to_string(rd()));
  fs::create_directories(dir);
  std::ostringstream out, err;
  Verdict v{true, ""};
  try {
    {
      std::ofstream(dir / "corpus.json") << to_json(CorpusConfig{}).dump();
    }
    if (cli::cmd_generate({dir / "corpus.json", dir / "data", false, std::nullopt}, out, err) != 0) {
      throw Error("generate failed: " + err.str());
    }
    TrainRunConfig short_run;
    short_run.supervised_steps = 150;
    short_run.burn_in_steps = 100;
    short_run.total_steps = 300;
    short_run.fine_tune_steps = 50;
    short_run.eval_every = 50;
    short_run.ema.alpha = 0.1;
    short_run.ema.delta = 1;
    short_run.ema.start_step = 100;
    short_run.cache = CacheConfig{100, 0.1};
    std::ofstream(dir / "train.json") << Json{{"data", "data"}, {"train", to_json(short_run)}}.dump();
    for (const char* run : {"a", "b"}) {
      const int code = cli::cmd_train({dir / "train.json", dir / run, false, false, std::nullopt}, out, err);
      if (code != cli::kExitOk && code != cli::kExitCollapse) {
        throw Error("train failed: " + err.str());
      }
    }
    const bool train_same = slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv");

    Json spec = {{"base", "train.json"},
                 {"alpha", {0.1, 0.0025}},
                 {"delta", {1, 10}},
                 {"cache", {false, true}},
                 {"seeds", {1, 2}}};
    std::ofstream(dir / "sweep.json") << spec.dump();
    for (const auto& [name, jobs] : {std::pair{"serial", 1}, std::pair{"parallel", 4}}) {
      if (cli::cmd_sweep({dir / "sweep.json", dir / name, jobs, false, std::nullopt}, out, err) != 0) {
        throw Error("sweep failed: " + err.str());
      }
    }
    const std::string serial = slurp(dir / "serial" / "summary.csv");
    const bool sweep_same = !serial.empty() && serial == slurp(dir / "parallel" / "summary.csv");
    v = {train_same && sweep_same, std::string("train metrics.csv ") + (train_same ? "identical" : "DIFFER") +
                                       "; sweep summary.csv --jobs 1 vs 4 " + (sweep_same ? "identical" : "DIFFER") +
                                       " (16 runs)"};
  } catch (const std::exception& e) {
    v = {false, e.what()};
  }
  fs::remove_all(dir);
  return v;
}

// --- 10 ---------------------------------------------------------------------------------

Verdict topk_selection() {
  const std::vector<double> probs{0.6, 0.3, 0.08, 0.02};
  std::vector<double> logrow;
  for (double p : probs) logrow.push_back(std::log(p));
  const std::size_t k = topk_support(logrow, 0.99);

  // One-hot teacher rows (all mass on one class, floored elsewhere) against
  // a random student: loss per frame is -log q(class).
  Rng rng(10);
  double worst = 0.0;
  std::size_t one_hot_k = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 5;
    const auto hot = static_cast<std::size_t>(rng.uniform_int(0, 4));
    Matrix teacher(1, classes, -1e300);
    teacher(0, hot) = 0.0;
    const auto student = log_softmax(random_matrix(rng, 1, classes));
    one_hot_k = std::max(one_hot_k, topk_support(teacher.row(0), 0.99));
    worst = std::max(worst, std::fabs(kl_topk_loss(teacher, student).loss + student(0, hot)));
  }
  return {k == 4 && one_hot_k == 1 && worst <= 1e-12,
          "k=" + std::to_string(k) + " for [0.6,0.3,0.08,0.02]; one-hot k=" + std::to_string(one_hot_k) +
              ", max |loss + log q| " + fmt(worst, 2)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
    }
  }
  Lab lab;
  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"half-life table", half_life_table},
      {"CTC matches brute-force enumeration", ctc_oracle},
      {"gradients match finite differences", gradient_fidelity},
      {"EMA algebra", ema_algebra},
      {"binary16 accumulation stalls a slow teacher", precision_effect},
      {"short half-lives collapse, long ones stay stable", [&] { return stability_trend(lab); }},
      {"Kaizen beats frozen-teacher PL", [&] { return kaizen_beats_frozen(lab); }},
      {"Kaizen + cache is non-inferior", [&] { return cache_composition(lab); }},
      {"determinism", determinism},
      {"KL top-k selection", topk_selection},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failures += !v.pass;
    std::cout << (v.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << v.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
