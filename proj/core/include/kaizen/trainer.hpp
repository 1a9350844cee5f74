// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaizen/data.hpp"
#include "kaizen/ema.hpp"
#include "kaizen/errors.hpp"
#include "kaizen/losses.hpp"
#include "kaizen/model.hpp"
#include "kaizen/numeric.hpp"
#include "kaizen/rng.hpp"

namespace kaizen {

/// ctc: sequence-level CTC on greedy pseudo-labels.
/// frame_kl: frame-level KL to the teacher's top-k posteriors.
enum class Paradigm { kCtc, kFrameKl };
enum class Stage { kBurnIn, kContinuousPl, kFineTune };
enum class StudentInit { kRandom, kWarmStartFromSeed };
/// kBinary16 rounds the EMA master after every update (precision ablation).
enum class EmaAccumulation { kFull, kBinary16 };
enum class PlSource { kSeedModel, kEmaTeacher, kCache };

std::string_view to_string(Paradigm v);
std::string_view to_string(Stage v);
std::string_view to_string(StudentInit v);
std::string_view to_string(EmaAccumulation v);
std::string_view to_string(PlSource v);
Paradigm paradigm_from_string(std::string_view s);
Stage stage_from_string(std::string_view s);
StudentInit student_init_from_string(std::string_view s);
EmaAccumulation ema_accumulation_from_string(std::string_view s);

/// Learning-rate shape of one training stage; the stage length supplies
/// the schedule's total_steps.
struct StageSchedule {
  std::int64_t warmup_steps = 0;
  double peak_lr = 1e-3;
  ScheduleShape shape = ScheduleShape::kLinearWarmupLinearDecay;

  LrSchedule over(std::int64_t total_steps) const { return LrSchedule{warmup_steps, peak_lr, total_steps, shape}; }
};

struct OptimizerConfig {
  AdamConfig adam;
  /// Seed-model training on supervised data.
  StageSchedule supervised{100, 5e-3, ScheduleShape::kLinearWarmupLinearDecay};
  /// Burn-in plus continuous pseudo-labeling.
  StageSchedule semi_supervised{500, 2e-2, ScheduleShape::kLinearWarmupLinearDecay};
  StageSchedule fine_tune{500, 5e-4, ScheduleShape::kLinearWarmupLinearDecay};
};

/// Dynamic pseudo-label cache from older model states.
struct CacheConfig {
  std::size_t size = 100;
  /// Probability that a batch gets fresh labels once the cache is full.
  double refresh_prob = 0.1;
};

struct TrainRunConfig {
  Paradigm paradigm = Paradigm::kCtc;
  ModelDims model{16, 2, 96, 8};
  EmaConfig ema{0.0025, 10, PrecisionMode::kMaster64, 1500};
  EmaAccumulation ema_accumulation = EmaAccumulation::kFull;
  /// Seed-model steps when no seed checkpoint is supplied.
  std::int64_t supervised_steps = 1500;
  std::int64_t burn_in_steps = 2000;
  /// Burn-in plus continuous pseudo-labeling.
  std::int64_t total_steps = 8000;
  std::int64_t fine_tune_steps = 1000;
  std::size_t batch_size = 8;
  double dropout_rate = 0.3;
  MaskConfig mask{2, 3, 2, 4, 0.0};
  OptimizerConfig optimizer;
  std::optional<CacheConfig> cache;
  StudentInit student_init = StudentInit::kRandom;
  /// Fraction of every semi-supervised batch drawn from the labeled set.
  double supervised_mix_fraction = 0.0;
  /// Drop utterances whose pseudo-label is empty instead of training them
  /// towards all-blank output.
  bool filter_empty_pseudo_labels = false;
  std::uint64_t seed = 1;
  std::int64_t eval_every = 500;
  double collapse_blank_threshold = 0.95;
  int collapse_patience = 3;
  double kl_mass_threshold = 0.99;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

struct PseudoLabel {
  std::string utterance_id;
  TokenSequence tokens;
  std::int64_t generated_at_step = 0;
  PlSource source = PlSource::kEmaTeacher;

  bool operator==(const PseudoLabel&) const = default;
};

/// One row of metrics.csv.
struct MetricsRecord {
  std::int64_t step = 0;
  Stage stage = Stage::kBurnIn;
  /// The teacher parameters changed since the previous row.
  bool teacher_refreshed = false;
  double train_loss = 0.0;
  double dev_wer = 0.0;
  /// Fraction of dev frames whose teacher argmax is the blank.
  double blank_ratio = 0.0;
  double teacher_student_l2 = 0.0;
  double lr = 0.0;
  double half_life_steps = 0.0;

  bool operator==(const MetricsRecord&) const = default;
};

/// Raised when the teacher keeps predicting mostly blanks on the dev set.
class CollapseError : public Error {
 public:
  CollapseError(std::int64_t step, std::vector<MetricsRecord> metrics);
  std::int64_t step() const { return step_; }
  const std::vector<MetricsRecord>& metrics() const { return metrics_; }

 private:
  std::int64_t step_;
  std::vector<MetricsRecord> metrics_;
};

// --- evaluation ---------------------------------------------------------------

struct UtteranceScore {
  std::string id;
  TokenSequence reference;
  TokenSequence hypothesis;
  EditCounts edits;
  std::size_t frames = 0;
  std::size_t blank_frames = 0;
};

struct EvalResult {
  /// Total edits over total reference tokens.
  double wer = 0.0;
  double blank_ratio = 0.0;
  std::size_t errors = 0;
  std::size_t reference_tokens = 0;
  std::size_t frames = 0;
  std::size_t blank_frames = 0;
  std::vector<UtteranceScore> details;
};

/// Greedy-decodes every utterance and aggregates corpus-level WER and the
/// blank-argmax frame ratio. Throws InvalidArgument for an empty or
/// unlabeled set.
EvalResult evaluate(const ModelDims& dims, const ParameterVector& params, std::span<const Utterance> labeled);

// --- pseudo-labels and cache ---------------------------------------------------

/// Eval-mode forward on the clean features, log-softmax, greedy decode.
/// An empty decode yields an empty label.
PseudoLabel generate_pseudo_label(const ModelDims& dims, const ParameterVector& teacher, const Utterance& utterance,
                                  std::int64_t step, PlSource source = PlSource::kEmaTeacher);

struct CacheEntry {
  std::size_t utterance = 0;
  PseudoLabel label;
};

struct PlCache {
  std::size_t capacity = 0;
  std::vector<CacheEntry> entries;
};

/// Utterances (indices into the unlabeled pool) and their labels served to
/// the student for one batch.
struct ServedBatch {
  std::vector<std::size_t> utterances;
  std::vector<PseudoLabel> labels;
  bool fresh = true;
};

using Labeler = std::function<PseudoLabel(std::size_t utterance)>;

/// Cache policy for one batch. Below capacity: label the batch with the
/// current teacher, insert, and serve it. Once full: with probability
/// `refresh_prob` label the batch freshly, serve it, and overwrite random
/// slots; otherwise serve uniformly sampled cached pairs instead.
ServedBatch cache_step(PlCache& cache, std::span<const std::size_t> batch, const Labeler& labeler,
                       double refresh_prob, Rng& rng);

// --- training -------------------------------------------------------------------

/// Streaming callbacks; all optional.
struct MetricsSink {
  std::function<void(const MetricsRecord&)> on_record;
};

/// Trains a model from init_params(seed) on labeled data only: CTC on the
/// references, or (frame_kl) KL against one-hot frame alignments. Throws
/// InfeasibleTargetError listing utterance ids whose references cannot fit.
ParameterVector train_supervised(std::span<const Utterance> supervised, const TrainRunConfig& config,
                                 std::int64_t steps, std::uint64_t seed);

/// Continues training `student` on labeled data with the fine-tune
/// schedule. Records metrics every eval_every steps when `dev` is
/// non-empty, numbering steps from `step_offset`.
ParameterVector fine_tune(ParameterVector student, std::span<const Utterance> supervised, const TrainRunConfig& config,
                          std::int64_t steps, std::uint64_t seed, std::span<const Utterance> dev = {},
                          std::int64_t step_offset = 0, const MetricsSink& sink = {},
                          std::vector<MetricsRecord>* history = nullptr);

/// Everything needed to continue a run at `step`.
struct RunState {
  std::int64_t step = 0;
  ParameterVector student;
  AdamState adam;
  std::optional<EmaState> ema;
  PlCache cache;
  std::vector<MetricsRecord> metrics;
  int collapse_streak = 0;
  double loss_sum = 0.0;
  std::int64_t loss_count = 0;
  bool teacher_refreshed = false;
};

struct RunHooks {
  MetricsSink metrics;
  /// Called with the full state every `checkpoint_every` steps (0: never).
  std::int64_t checkpoint_every = 0;
  std::function<void(const RunState&)> on_checkpoint;
  /// Called for every pseudo-label generated or served in a step.
  std::function<void(std::int64_t step, const PseudoLabel&)> on_pseudo_label;
};

struct RunResult {
  ParameterVector student;
  ParameterVector teacher;
  std::vector<MetricsRecord> metrics;
};

/// Burn-in on the frozen seed model's labels, then continuous pseudo-labeling
/// from the EMA teacher, as configured. Throws CollapseError when the
/// teacher's dev blank ratio exceeds the threshold for `collapse_patience`
/// consecutive evaluations of the continuous stage, and NumericError on a
/// non-finite loss.
RunResult run_kaizen(const Corpus& corpus, const ParameterVector& seed_model, const TrainRunConfig& config,
                     const RunHooks& hooks = {}, std::optional<RunState> resume = std::nullopt);

/// Initial state of a run (step 0).
RunState initial_run_state(const ParameterVector& seed_model, const TrainRunConfig& config);

/// Half-life used in logs and summaries: half_life() inside (0, 1); for
/// alpha = 1 the teacher is never older than delta steps, so delta; for
/// alpha = 0 the teacher never moves, so +inf.
double effective_half_life(double alpha, std::int64_t delta);

}  // namespace kaizen
