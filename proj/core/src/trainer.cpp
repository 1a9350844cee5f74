// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace kaizen {

namespace {

// Stream tags for derive_seed.
constexpr std::uint64_t kTagBatch = 0xba7c;
constexpr std::uint64_t kTagMask = 0x3a5c;
constexpr std::uint64_t kTagDropout = 0xd40;
constexpr std::uint64_t kTagCache = 0xcac4e;
constexpr std::uint64_t kTagStudent = 0x57d;
constexpr std::uint64_t kTagSupBatch = 0x5b;

template <typename E>
struct Names {
  E value;
  std::string_view name;
};

template <typename E, std::size_t N>
std::string_view lookup(const Names<E> (&table)[N], E v) {
  for (const auto& n : table) {
    if (n.value == v) return n.name;
  }
  return "unknown";
}

template <typename E, std::size_t N>
E parse(const Names<E> (&table)[N], std::string_view s, std::string_view what) {
  for (const auto& n : table) {
    if (n.name == s) return n.value;
  }
  std::string allowed;
  for (const auto& n : table) allowed += (allowed.empty() ? "" : ", ") + std::string(n.name);
  throw ConfigError("unknown " + std::string(what) + " '" + std::string(s) + "' (expected one of: " + allowed + ")");
}

constexpr Names<Paradigm> kParadigms[] = {{Paradigm::kCtc, "ctc"}, {Paradigm::kFrameKl, "frame_kl"}};
constexpr Names<Stage> kStages[] = {
    {Stage::kBurnIn, "burn_in"}, {Stage::kContinuousPl, "continuous_pl"}, {Stage::kFineTune, "fine_tune"}};
constexpr Names<StudentInit> kInits[] = {{StudentInit::kRandom, "random"},
                                         {StudentInit::kWarmStartFromSeed, "warm_start_from_seed"}};
constexpr Names<EmaAccumulation> kAccums[] = {{EmaAccumulation::kFull, "full"},
                                              {EmaAccumulation::kBinary16, "binary16"}};
constexpr Names<PlSource> kSources[] = {
    {PlSource::kSeedModel, "seed_model"}, {PlSource::kEmaTeacher, "ema_teacher"}, {PlSource::kCache, "cache"}};

}  // namespace

std::string_view to_string(Paradigm v) { return lookup(kParadigms, v); }
std::string_view to_string(Stage v) { return lookup(kStages, v); }
std::string_view to_string(StudentInit v) { return lookup(kInits, v); }
std::string_view to_string(EmaAccumulation v) { return lookup(kAccums, v); }
std::string_view to_string(PlSource v) { return lookup(kSources, v); }
Paradigm paradigm_from_string(std::string_view s) { return parse(kParadigms, s, "paradigm"); }
Stage stage_from_string(std::string_view s) { return parse(kStages, s, "stage"); }
StudentInit student_init_from_string(std::string_view s) { return parse(kInits, s, "student_init"); }
EmaAccumulation ema_accumulation_from_string(std::string_view s) { return parse(kAccums, s, "ema_accumulation"); }

void TrainRunConfig::validate() const {
  model.validate();
  ema.validate();
  if (ema.start_step < 0) throw ConfigError("ema.start_step must be >= 0");
  // The teacher must exist when the continuous stage starts labeling.
  if (ema.start_step > burn_in_steps) throw ConfigError("ema.start_step must be <= burn_in_steps");
  if (supervised_steps < 0) throw ConfigError("supervised_steps must be >= 0");
  if (burn_in_steps < 0) throw ConfigError("burn_in_steps must be >= 0");
  if (total_steps < burn_in_steps) throw ConfigError("total_steps must be >= burn_in_steps");
  if (fine_tune_steps < 0) throw ConfigError("fine_tune_steps must be >= 0");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw ConfigError("dropout_rate must lie in [0, 1)");
  if (!(supervised_mix_fraction >= 0.0 && supervised_mix_fraction <= 1.0)) {
    throw ConfigError("supervised_mix_fraction must lie in [0, 1]");
  }
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (!(collapse_blank_threshold > 0.0 && collapse_blank_threshold <= 1.0)) {
    throw ConfigError("collapse_blank_threshold must lie in (0, 1]");
  }
  if (collapse_patience < 1) throw ConfigError("collapse_patience must be >= 1");
  if (!(kl_mass_threshold > 0.0 && kl_mass_threshold <= 1.0)) throw ConfigError("kl_mass_threshold must lie in (0, 1]");
  for (const StageSchedule* s : {&optimizer.supervised, &optimizer.semi_supervised, &optimizer.fine_tune}) {
    if (s->warmup_steps < 0) throw ConfigError("warmup_steps must be >= 0");
    if (!(s->peak_lr >= 0.0) || !std::isfinite(s->peak_lr)) throw ConfigError("peak_lr must be finite and >= 0");
  }
  if (cache) {
    // The cache stores token sequences, which only the CTC paradigm consumes.
    if (paradigm != Paradigm::kCtc) throw ConfigError("cache requires paradigm ctc");
    if (cache->size == 0) throw ConfigError("cache.size must be positive");
    if (!(cache->refresh_prob > 0.0 && cache->refresh_prob <= 1.0)) {
      throw ConfigError("cache.refresh_prob must lie in (0, 1]");
    }
  }
}

CollapseError::CollapseError(std::int64_t step, std::vector<MetricsRecord> metrics)
    : Error("training collapsed at step " + std::to_string(step) + ": teacher predicts blank on " +
            (metrics.empty() ? std::string("?") : std::to_string(metrics.back().blank_ratio)) + " of dev frames"),
      step_(step),
      metrics_(std::move(metrics)) {}

double effective_half_life(double alpha, std::int64_t delta) {
  if (alpha == 1.0) return static_cast<double>(delta);
  if (alpha == 0.0) return std::numeric_limits<double>::infinity();
  return half_life(alpha, delta);
}

// --- evaluation ---------------------------------------------------------------

EvalResult evaluate(const ModelDims& dims, const ParameterVector& params, std::span<const Utterance> labeled) {
  if (labeled.empty()) throw InvalidArgument("evaluate: empty set");
  EvalResult result;
  result.details.reserve(labeled.size());
  for (const Utterance& utt : labeled) {
    if (!utt.labeled()) throw InvalidArgument("evaluate: utterance " + utt.id + " has no reference");
    const auto frames = frame_argmax(log_softmax(infer_logits(dims, params, utt.features)));
    UtteranceScore score;
    score.id = utt.id;
    score.reference = *utt.reference;
    score.hypothesis = ctc_collapse(frames);
    score.edits = edit_distance(score.reference, score.hypothesis);
    score.frames = frames.size();
    score.blank_frames = static_cast<std::size_t>(std::count(frames.begin(), frames.end(), kBlank));
    result.errors += score.edits.total();
    result.reference_tokens += score.reference.size();
    result.frames += score.frames;
    result.blank_frames += score.blank_frames;
    result.details.push_back(std::move(score));
  }
  result.wer = static_cast<double>(result.errors) / static_cast<double>(std::max<std::size_t>(1, result.reference_tokens));
  result.blank_ratio =
      static_cast<double>(result.blank_frames) / static_cast<double>(std::max<std::size_t>(1, result.frames));
  return result;
}

// --- pseudo-labels and cache ---------------------------------------------------

PseudoLabel generate_pseudo_label(const ModelDims& dims, const ParameterVector& teacher, const Utterance& utterance,
                                  std::int64_t step, PlSource source) {
  return PseudoLabel{utterance.id, greedy_decode(log_softmax(infer_logits(dims, teacher, utterance.features))), step,
                     source};
}

ServedBatch cache_step(PlCache& cache, std::span<const std::size_t> batch, const Labeler& labeler,
                       double refresh_prob, Rng& rng) {
  if (cache.capacity == 0) throw InvalidArgument("cache_step: zero capacity");
  ServedBatch served;
  const bool full = cache.entries.size() >= cache.capacity;
  if (!full || rng.bernoulli(refresh_prob)) {
    for (std::size_t u : batch) {
      PseudoLabel label = labeler(u);
      CacheEntry entry{u, label};
      if (cache.entries.size() < cache.capacity) {
        cache.entries.push_back(std::move(entry));
      } else {
        const auto slot = rng.uniform_int(0, static_cast<std::int64_t>(cache.capacity) - 1);
        cache.entries[static_cast<std::size_t>(slot)] = std::move(entry);
      }
      served.utterances.push_back(u);
      served.labels.push_back(std::move(label));
    }
    served.fresh = true;
    return served;
  }
  served.fresh = false;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto slot = rng.uniform_int(0, static_cast<std::int64_t>(cache.entries.size()) - 1);
    const CacheEntry& entry = cache.entries[static_cast<std::size_t>(slot)];
    served.utterances.push_back(entry.utterance);
    PseudoLabel label = entry.label;
    label.source = PlSource::kCache;
    served.labels.push_back(std::move(label));
  }
  return served;
}

// --- training -------------------------------------------------------------------

namespace {

/// One training example: CTC tokens, or frame-level teacher log-posteriors.
struct Example {
  const Utterance* utterance = nullptr;
  TokenSequence tokens;
  Matrix teacher_logprobs;
  bool frame_level = false;
};

/// Log one-hot rows from a frame alignment (log 0 = -inf).
Matrix one_hot_logprobs(const Utterance& utt, std::size_t classes) {
  Matrix out(utt.frames(), classes, -std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < utt.frames(); ++t) out(t, static_cast<std::size_t>(utt.alignment[t])) = 0.0;
  return out;
}

Example supervised_example(const Utterance& utt, const TrainRunConfig& config) {
  Example ex;
  ex.utterance = &utt;
  if (config.paradigm == Paradigm::kFrameKl) {
    ex.frame_level = true;
    ex.teacher_logprobs = one_hot_logprobs(utt, config.model.output_dim());
  } else {
    ex.tokens = *utt.reference;
  }
  return ex;
}

void require_trainable(std::span<const Utterance> supervised, const TrainRunConfig& config) {
  if (supervised.empty()) throw InvalidArgument("no supervised utterances");
  std::string bad;
  for (const Utterance& utt : supervised) {
    if (!utt.labeled()) throw InvalidArgument("utterance " + utt.id + " has no reference");
    check_tokens(*utt.reference, config.model.vocab);
    if (utt.features.cols() != config.model.feature_dim) {
      throw LayoutError("utterance " + utt.id + " has feature dimension " + std::to_string(utt.features.cols()));
    }
    const bool too_short = config.paradigm == Paradigm::kFrameKl ? utt.alignment.size() != utt.frames()
                                                                  : ctc_min_frames(*utt.reference) > utt.frames();
    if (too_short) bad += (bad.empty() ? "" : ", ") + utt.id;
  }
  if (!bad.empty()) {
    throw InfeasibleTargetError(config.paradigm == Paradigm::kFrameKl
                                    ? "utterances without a frame alignment: " + bad
                                    : "references longer than their utterances allow: " + bad);
  }
}

/// Adds the batch-mean loss gradient into `grads`; returns the mean loss.
double accumulate_batch(std::span<const Example> batch, const TrainRunConfig& config, const ParameterVector& params,
                        std::uint64_t step_seed, ParameterVector& grads) {
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = batch[i];
    const Matrix masked =
        apply_masks(ex.utterance->features, config.mask, derive_seed(step_seed, {kTagMask, i}));
    ForwardResult fwd = forward(config.model, params, masked, ForwardMode::kTrain, config.dropout_rate,
                                derive_seed(step_seed, {kTagDropout, i}));
    const LogPosteriorSeq lp = log_softmax(fwd.logits);
    double loss = 0.0;
    Matrix dlp;
    if (ex.frame_level) {
      KlResult r = kl_topk_loss(ex.teacher_logprobs, lp, config.kl_mass_threshold);
      loss = r.loss;
      dlp = std::move(r.grad);
    } else {
      CtcResult r = ctc_loss(lp, ex.tokens);
      loss = r.loss;
      dlp = std::move(r.grad);
    }
    if (!std::isfinite(loss)) throw NumericError("non-finite loss on " + ex.utterance->id);
    for (double& g : dlp.values()) g *= scale;
    backward_accumulate(fwd.trace, log_softmax_backward(lp, dlp), grads);
    total += loss;
  }
  return total * scale;
}

struct StepOutcome {
  double loss = 0.0;
  bool updated = false;
};

StepOutcome optimizer_step(std::span<const Example> batch, const TrainRunConfig& config, ParameterVector& params,
                           AdamState& adam, double lr, std::uint64_t step_seed, std::int64_t step,
                           std::string_view stage) {
  if (batch.empty()) return {};
  try {
    ParameterVector grads = ParameterVector::zeros_like(params);
    const double loss = accumulate_batch(batch, config, params, step_seed, grads);
    AdamResult res = adam_step(std::move(params), std::move(grads), std::move(adam), lr);
    params = std::move(res.params);
    adam = std::move(res.state);
    return {loss, true};
  } catch (const NumericError& e) {
    throw NumericError("step " + std::to_string(step) + " (" + std::string(stage) + "): " + e.what());
  }
}

std::vector<std::size_t> sample_indices(Rng& rng, std::size_t pool, std::size_t count) {
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool) - 1));
  return out;
}

/// Shared loop of seed-model training and fine-tuning.
ParameterVector supervised_loop(ParameterVector params, std::span<const Utterance> supervised,
                                const TrainRunConfig& config, const LrSchedule& schedule, std::int64_t steps,
                                std::uint64_t seed, Stage stage, std::span<const Utterance> dev,
                                std::int64_t step_offset, const MetricsSink& sink,
                                std::vector<MetricsRecord>* history) {
  require_trainable(supervised, config);
  check_params(config.model, params);
  std::vector<Example> pool;
  pool.reserve(supervised.size());
  for (const Utterance& utt : supervised) pool.push_back(supervised_example(utt, config));

  AdamState adam = AdamState::for_params(params, config.optimizer.adam);
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  std::vector<Example> batch;
  for (std::int64_t t = 0; t < steps; ++t) {
    Rng rng(derive_seed(seed, {kTagSupBatch, static_cast<std::uint64_t>(t)}));
    batch.clear();
    for (std::size_t i : sample_indices(rng, pool.size(), config.batch_size)) batch.push_back(pool[i]);
    const double lr = lr_at(schedule, t);
    const auto out = optimizer_step(batch, config, params, adam, lr,
                                    derive_seed(seed, {kTagBatch, static_cast<std::uint64_t>(t)}), t,
                                    to_string(stage));
    loss_sum += out.loss;
    ++loss_count;

    const std::int64_t done = t + 1;
    if (!dev.empty() && (done % config.eval_every == 0 || done == steps)) {
      const EvalResult ev = evaluate(config.model, params, dev);
      MetricsRecord rec;
      rec.step = step_offset + done;
      rec.stage = stage;
      rec.train_loss = loss_sum / static_cast<double>(loss_count);
      rec.dev_wer = ev.wer;
      rec.blank_ratio = ev.blank_ratio;
      rec.teacher_student_l2 = std::numeric_limits<double>::quiet_NaN();
      rec.lr = lr;
      rec.half_life_steps = effective_half_life(config.ema.alpha, config.ema.delta);
      loss_sum = 0.0;
      loss_count = 0;
      if (history) history->push_back(rec);
      if (sink.on_record) sink.on_record(rec);
    }
  }
  return params;
}

}  // namespace

ParameterVector train_supervised(std::span<const Utterance> supervised, const TrainRunConfig& config,
                                 std::int64_t steps, std::uint64_t seed) {
  config.validate();
  return supervised_loop(init_params(config.model, seed), supervised, config, config.optimizer.supervised.over(steps),
                         steps, seed, Stage::kBurnIn, {}, 0, {}, nullptr);
}

ParameterVector fine_tune(ParameterVector student, std::span<const Utterance> supervised, const TrainRunConfig& config,
                          std::int64_t steps, std::uint64_t seed, std::span<const Utterance> dev,
                          std::int64_t step_offset, const MetricsSink& sink, std::vector<MetricsRecord>* history) {
  config.validate();
  return supervised_loop(std::move(student), supervised, config, config.optimizer.fine_tune.over(steps), steps,
                         derive_seed(seed, {0xf1e}), Stage::kFineTune, dev, step_offset, sink, history);
}

RunState initial_run_state(const ParameterVector& seed_model, const TrainRunConfig& config) {
  config.validate();
  check_params(config.model, seed_model);
  RunState state;
  state.student = config.student_init == StudentInit::kRandom
                      ? init_params(config.model, derive_seed(config.seed, {kTagStudent}))
                      : seed_model;
  state.adam = AdamState::for_params(state.student, config.optimizer.adam);
  if (config.ema.start_step == 0) state.ema = ema_init(state.student, config.ema);
  if (config.cache) state.cache.capacity = config.cache->size;
  return state;
}

RunResult run_kaizen(const Corpus& corpus, const ParameterVector& seed_model, const TrainRunConfig& config,
                     const RunHooks& hooks, std::optional<RunState> resume) {
  config.validate();
  check_params(config.model, seed_model);
  if (corpus.unsupervised.empty()) throw InvalidArgument("run_kaizen: empty unlabeled pool");
  if (corpus.dev.empty()) throw InvalidArgument("run_kaizen: empty dev set");
  const auto n_sup = static_cast<std::size_t>(
      std::llround(config.supervised_mix_fraction * static_cast<double>(config.batch_size)));
  if (n_sup > 0) require_trainable(corpus.supervised, config);
  for (const Utterance& utt : corpus.unsupervised) {
    if (utt.features.cols() != config.model.feature_dim) {
      throw LayoutError("utterance " + utt.id + " has feature dimension " + std::to_string(utt.features.cols()));
    }
  }

  RunState st = resume ? std::move(*resume) : initial_run_state(seed_model, config);
  check_params(config.model, st.student);
  const std::uint64_t seed = config.seed;
  const LrSchedule schedule = config.optimizer.semi_supervised.over(config.total_steps);
  const double tau = effective_half_life(config.ema.alpha, config.ema.delta);
  const ModelDims& dims = config.model;

  ParameterVector teacher = st.ema ? teacher_snapshot(*st.ema) : seed_model;
  std::vector<Example> batch;
  batch.reserve(config.batch_size);

  auto teacher_example = [&](std::size_t u, const ParameterVector& model, std::int64_t t, PlSource source) {
    const Utterance& utt = corpus.unsupervised[u];
    Example ex;
    ex.utterance = &utt;
    if (config.paradigm == Paradigm::kFrameKl) {
      ex.frame_level = true;
      ex.teacher_logprobs = log_softmax(infer_logits(dims, model, utt.features));
      if (hooks.on_pseudo_label) {
        hooks.on_pseudo_label(t, PseudoLabel{utt.id, greedy_decode(ex.teacher_logprobs), t, source});
      }
    } else {
      PseudoLabel pl = generate_pseudo_label(dims, model, utt, t, source);
      if (hooks.on_pseudo_label) hooks.on_pseudo_label(t, pl);
      ex.tokens = std::move(pl.tokens);
    }
    return ex;
  };

  while (st.step < config.total_steps) {
    const std::int64_t t = st.step;
    const auto ut = static_cast<std::uint64_t>(t);
    const Stage stage = t < config.burn_in_steps ? Stage::kBurnIn : Stage::kContinuousPl;
    const bool from_seed = stage == Stage::kBurnIn || !st.ema;
    const ParameterVector& labeler_model = from_seed ? seed_model : teacher;
    const PlSource source = from_seed ? PlSource::kSeedModel : PlSource::kEmaTeacher;

    Rng rng(derive_seed(seed, {kTagBatch, ut}));
    const std::vector<std::size_t> unsup =
        sample_indices(rng, corpus.unsupervised.size(), config.batch_size - n_sup);
    const std::vector<std::size_t> sup = n_sup > 0 ? sample_indices(rng, corpus.supervised.size(), n_sup)
                                                   : std::vector<std::size_t>{};

    batch.clear();
    if (config.cache && stage == Stage::kContinuousPl) {
      Rng cache_rng(derive_seed(seed, {kTagCache, ut}));
      const ServedBatch served = cache_step(
          st.cache, unsup,
          [&](std::size_t u) { return generate_pseudo_label(dims, labeler_model, corpus.unsupervised[u], t, source); },
          config.cache->refresh_prob, cache_rng);
      for (std::size_t i = 0; i < served.utterances.size(); ++i) {
        if (hooks.on_pseudo_label) hooks.on_pseudo_label(t, served.labels[i]);
        Example ex;
        ex.utterance = &corpus.unsupervised[served.utterances[i]];
        ex.tokens = served.labels[i].tokens;
        batch.push_back(std::move(ex));
      }
    } else {
      for (std::size_t u : unsup) batch.push_back(teacher_example(u, labeler_model, t, source));
    }
    if (config.filter_empty_pseudo_labels && config.paradigm == Paradigm::kCtc) {
      std::erase_if(batch, [](const Example& ex) { return ex.tokens.empty(); });
    }
    for (std::size_t i : sup) batch.push_back(supervised_example(corpus.supervised[i], config));

    const double lr = lr_at(schedule, t);
    const StepOutcome out = optimizer_step(batch, config, st.student, st.adam, lr,
                                           derive_seed(seed, {kTagBatch, ut, 1}), t, to_string(stage));
    if (out.updated) {
      st.loss_sum += out.loss;
      ++st.loss_count;
    }
    st.step = t + 1;

    // Teacher bookkeeping, in units of completed optimizer steps.
    const std::int64_t s = st.step;
    if (!st.ema) {
      if (s == config.ema.start_step) {
        st.ema = ema_init(st.student, config.ema);
        teacher = teacher_snapshot(*st.ema);
        st.teacher_refreshed = true;
      }
    } else if (s > config.ema.start_step && ema_update_due(config.ema, s)) {
      EmaState next = config.ema_accumulation == EmaAccumulation::kBinary16
                          ? ema_update_lowprecision(*st.ema, st.student, s)
                          : ema_update(*st.ema, st.student, s);
      if (next.master != st.ema->master) {
        st.teacher_refreshed = true;
        st.ema = std::move(next);
        teacher = teacher_snapshot(*st.ema);
      } else {
        st.ema = std::move(next);
      }
    }

    if (s % config.eval_every == 0 || s == config.total_steps) {
      const ParameterVector& judge = st.ema ? teacher : seed_model;
      const EvalResult student_eval = evaluate(dims, st.student, corpus.dev);
      const EvalResult teacher_eval = evaluate(dims, judge, corpus.dev);
      MetricsRecord rec;
      rec.step = s;
      rec.stage = stage;
      rec.teacher_refreshed = st.teacher_refreshed;
      rec.train_loss =
          st.loss_count > 0 ? st.loss_sum / static_cast<double>(st.loss_count) : std::numeric_limits<double>::quiet_NaN();
      rec.dev_wer = student_eval.wer;
      rec.blank_ratio = teacher_eval.blank_ratio;
      rec.teacher_student_l2 = l2_distance(st.ema ? st.ema->master : seed_model, st.student);
      rec.lr = lr;
      rec.half_life_steps = tau;
      st.loss_sum = 0.0;
      st.loss_count = 0;
      st.teacher_refreshed = false;
      st.metrics.push_back(rec);
      if (hooks.metrics.on_record) hooks.metrics.on_record(rec);

      if (stage == Stage::kContinuousPl) {
        st.collapse_streak = rec.blank_ratio > config.collapse_blank_threshold ? st.collapse_streak + 1 : 0;
        if (st.collapse_streak >= config.collapse_patience) throw CollapseError(s, st.metrics);
      }
    }
    if (hooks.checkpoint_every > 0 && hooks.on_checkpoint && s % hooks.checkpoint_every == 0) hooks.on_checkpoint(st);
  }

  RunResult result;
  result.teacher = st.ema ? teacher : seed_model;
  result.student = std::move(st.student);
  result.metrics = std::move(st.metrics);
  return result;
}

}  // namespace kaizen
