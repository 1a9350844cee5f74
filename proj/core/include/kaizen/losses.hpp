// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kaizen/numeric.hpp"

namespace kaizen {

inline constexpr int kBlank = 0;

/// Token ids in [1, V]; the blank never appears.
using TokenSequence = std::vector<int>;

/// T x (V+1) matrix whose rows are log-probabilities.
using LogPosteriorSeq = Matrix;

/// Throws InvalidArgument if a token is the blank or exceeds `vocab`.
void check_tokens(std::span<const int> tokens, std::size_t vocab);

/// Row-wise log-softmax, stabilized by subtracting the row max.
LogPosteriorSeq log_softmax(const Matrix& logits);

/// Chain rule through log_softmax: maps d(loss)/d(logprobs) to
/// d(loss)/d(logits).
Matrix log_softmax_backward(const LogPosteriorSeq& logprobs, const Matrix& dlogprobs);

/// Log-sum-exp of two values, -inf safe.
double log_add(double a, double b);

// --- CTC --------------------------------------------------------------------

/// Minimum number of frames able to carry `target`: L plus one separating
/// blank per adjacent repeated pair.
std::size_t ctc_min_frames(std::span<const int> target);

struct CtcResult {
  double loss = 0.0;
  /// d(loss)/d(logprobs), same shape as the input.
  Matrix grad;
};

/// -log p(target | logprobs) with the blank-interleaved forward recursion
/// in log space; the gradient comes from the matching backward recursion.
/// The empty target is valid (only the all-blank path). Throws
/// InfeasibleTargetError when the sequence is too short for the target.
CtcResult ctc_loss(const LogPosteriorSeq& logprobs, std::span<const int> target);

/// Verification oracle: sums the probability of every one of the (V+1)^T
/// frame labelings whose collapse equals `target`. Limited to T <= 10 and
/// V+1 <= 5; returns +inf for unreachable targets.
double ctc_bruteforce(const LogPosteriorSeq& logprobs, std::span<const int> target);

/// Merges runs of equal labels, then drops blanks.
TokenSequence ctc_collapse(std::span<const int> frame_labels);

/// Per-frame argmax; ties go to the lowest index, so the blank wins.
std::vector<int> frame_argmax(const Matrix& scores);

/// frame_argmax followed by ctc_collapse.
TokenSequence greedy_decode(const LogPosteriorSeq& logprobs);

// --- frame-level distillation ----------------------------------------------

/// Smallest k such that the k most probable entries of a teacher
/// log-posterior row hold at least `mass_threshold` of the probability.
std::size_t topk_support(std::span<const double> teacher_logrow, double mass_threshold);

struct KlResult {
  /// Mean over frames.
  double loss = 0.0;
  /// d(loss)/d(student logprobs).
  Matrix grad;
  /// Selected k for each frame.
  std::vector<std::size_t> support;
};

/// Frame-averaged KL from the truncated teacher to the student. Per frame
/// the teacher keeps its top-k classes covering `mass_threshold` and is
/// renormalized over them; the student posterior is used as-is (not
/// renormalized), so the loss stays an upper bound of the truncated KL.
KlResult kl_topk_loss(const LogPosteriorSeq& teacher, const LogPosteriorSeq& student, double mass_threshold = 0.99);

// --- scoring ----------------------------------------------------------------

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;

  std::size_t total() const { return substitutions + insertions + deletions; }
  bool operator==(const EditCounts&) const = default;
};

/// Unit-cost Levenshtein alignment. When several alignments are optimal the
/// backtrace prefers substitution, then deletion, then insertion.
EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp);

/// (S + I + D) / max(1, |ref|).
double word_error_rate(std::span<const int> ref, std::span<const int> hyp);

}  // namespace kaizen
