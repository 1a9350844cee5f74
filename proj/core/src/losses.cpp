// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "kaizen/errors.hpp"

namespace kaizen {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

void check_tokens(std::span<const int> tokens, std::size_t vocab) {
  for (int tok : tokens) {
    if (tok <= kBlank || static_cast<std::size_t>(tok) > vocab) {
      throw InvalidArgument("token id " + std::to_string(tok) + " outside [1, " + std::to_string(vocab) + "]");
    }
  }
}

double log_add(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

LogPosteriorSeq log_softmax(const Matrix& logits) {
  LogPosteriorSeq out(logits.rows(), logits.cols());
  for (std::size_t t = 0; t < logits.rows(); ++t) {
    auto in = logits.row(t);
    auto res = out.row(t);
    const double peak = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (double v : in) sum += std::exp(v - peak);
    const double norm = peak + std::log(sum);
    for (std::size_t k = 0; k < in.size(); ++k) res[k] = in[k] - norm;
  }
  return out;
}

Matrix log_softmax_backward(const LogPosteriorSeq& logprobs, const Matrix& dlogprobs) {
  if (logprobs.rows() != dlogprobs.rows() || logprobs.cols() != dlogprobs.cols()) {
    throw LayoutError("log_softmax_backward: shape mismatch");
  }
  Matrix out(logprobs.rows(), logprobs.cols());
  for (std::size_t t = 0; t < logprobs.rows(); ++t) {
    auto lp = logprobs.row(t);
    auto g = dlogprobs.row(t);
    const double total = std::accumulate(g.begin(), g.end(), 0.0);
    auto res = out.row(t);
    for (std::size_t k = 0; k < lp.size(); ++k) res[k] = g[k] - std::exp(lp[k]) * total;
  }
  return out;
}

std::size_t ctc_min_frames(std::span<const int> target) {
  std::size_t n = target.size();
  for (std::size_t i = 1; i < target.size(); ++i) {
    if (target[i] == target[i - 1]) ++n;
  }
  return n;
}

CtcResult ctc_loss(const LogPosteriorSeq& logprobs, std::span<const int> target) {
  const std::size_t frames = logprobs.rows();
  const std::size_t classes = logprobs.cols();
  check_tokens(target, classes == 0 ? 0 : classes - 1);
  const std::size_t needed = ctc_min_frames(target);
  if (frames < needed) {
    throw InfeasibleTargetError("ctc_loss: target needs " + std::to_string(needed) + " frames, got " +
                                std::to_string(frames));
  }
  CtcResult result{0.0, Matrix(frames, classes)};
  if (frames == 0) return result;

  // Expanded label sequence: blank, y1, blank, y2, ..., yL, blank.
  const std::size_t states = 2 * target.size() + 1;
  std::vector<int> ext(states, kBlank);
  for (std::size_t i = 0; i < target.size(); ++i) ext[2 * i + 1] = target[i];
  auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != kBlank && ext[s] != ext[s - 2]; };

  Matrix alpha(frames, states, kNegInf);
  alpha(0, 0) = logprobs(0, kBlank);
  if (states > 1) alpha(0, 1) = logprobs(0, static_cast<std::size_t>(ext[1]));
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t s = 0; s < states; ++s) {
      double v = alpha(t - 1, s);
      if (s >= 1) v = log_add(v, alpha(t - 1, s - 1));
      if (can_skip(s)) v = log_add(v, alpha(t - 1, s - 2));
      if (v != kNegInf) alpha(t, s) = v + logprobs(t, static_cast<std::size_t>(ext[s]));
    }
  }

  Matrix beta(frames, states, kNegInf);
  const std::size_t last = frames - 1;
  beta(last, states - 1) = logprobs(last, kBlank);
  if (states > 1) beta(last, states - 2) = logprobs(last, static_cast<std::size_t>(ext[states - 2]));
  for (std::size_t t = last; t-- > 0;) {
    for (std::size_t s = 0; s < states; ++s) {
      double v = beta(t + 1, s);
      if (s + 1 < states) v = log_add(v, beta(t + 1, s + 1));
      if (s + 2 < states && can_skip(s + 2)) v = log_add(v, beta(t + 1, s + 2));
      if (v != kNegInf) beta(t, s) = v + logprobs(t, static_cast<std::size_t>(ext[s]));
    }
  }

  double log_p = alpha(last, states - 1);
  if (states > 1) log_p = log_add(log_p, alpha(last, states - 2));
  if (!std::isfinite(log_p)) throw NumericError("ctc_loss: target has zero probability");
  result.loss = -log_p;

  // Path occupancy per (t, class); alpha and beta both include the frame's
  // emission, so one copy is divided back out.
  std::vector<double> occupancy(classes);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(occupancy.begin(), occupancy.end(), kNegInf);
    for (std::size_t s = 0; s < states; ++s) {
      const double ab = alpha(t, s) + beta(t, s);
      if (ab == kNegInf) continue;
      auto k = static_cast<std::size_t>(ext[s]);
      occupancy[k] = log_add(occupancy[k], ab);
    }
    auto g = result.grad.row(t);
    for (std::size_t k = 0; k < classes; ++k) {
      if (occupancy[k] == kNegInf) continue;
      g[k] = -std::exp(occupancy[k] - logprobs(t, k) - log_p);
    }
  }
  return result;
}

TokenSequence ctc_collapse(std::span<const int> frame_labels) {
  TokenSequence out;
  int prev = -1;
  for (int label : frame_labels) {
    if (label != prev && label != kBlank) out.push_back(label);
    prev = label;
  }
  return out;
}

double ctc_bruteforce(const LogPosteriorSeq& logprobs, std::span<const int> target) {
  const std::size_t frames = logprobs.rows();
  const std::size_t classes = logprobs.cols();
  if (frames > 10 || classes > 5) {
    throw InvalidArgument("ctc_bruteforce: limited to T <= 10 and V + 1 <= 5");
  }
  check_tokens(target, classes - 1);

  const TokenSequence want(target.begin(), target.end());
  std::vector<int> labels(frames, 0);
  double log_total = kNegInf;
  while (true) {
    if (ctc_collapse(labels) == want) {
      double lp = 0.0;
      for (std::size_t t = 0; t < frames; ++t) lp += logprobs(t, static_cast<std::size_t>(labels[t]));
      log_total = log_add(log_total, lp);
    }
    // Odometer increment over {0..classes-1}^frames.
    std::size_t pos = 0;
    while (pos < frames && ++labels[pos] == static_cast<int>(classes)) labels[pos++] = 0;
    if (pos == frames) break;
  }
  return -log_total;
}

std::vector<int> frame_argmax(const Matrix& scores) {
  std::vector<int> out(scores.rows(), kBlank);
  for (std::size_t t = 0; t < scores.rows(); ++t) {
    auto row = scores.row(t);
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[best]) best = k;
    }
    out[t] = static_cast<int>(best);
  }
  return out;
}

TokenSequence greedy_decode(const LogPosteriorSeq& logprobs) { return ctc_collapse(frame_argmax(logprobs)); }

namespace {

// Class indices by decreasing teacher probability; ties keep index order.
std::vector<std::size_t> rank_classes(std::span<const double> row) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

std::size_t support_from_ranking(std::span<const double> row, std::span<const std::size_t> order,
                                 double mass_threshold) {
  double mass = 0.0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    mass += std::exp(row[order[k]]);
    if (mass >= mass_threshold) return k + 1;
  }
  return order.size();
}

}  // namespace

std::size_t topk_support(std::span<const double> teacher_logrow, double mass_threshold) {
  if (!(mass_threshold > 0.0 && mass_threshold <= 1.0)) {
    throw InvalidArgument("mass_threshold must lie in (0, 1]");
  }
  const auto order = rank_classes(teacher_logrow);
  return support_from_ranking(teacher_logrow, order, mass_threshold);
}

KlResult kl_topk_loss(const LogPosteriorSeq& teacher, const LogPosteriorSeq& student, double mass_threshold) {
  if (teacher.rows() != student.rows() || teacher.cols() != student.cols()) {
    throw LayoutError("kl_topk_loss: teacher and student shapes differ");
  }
  if (!(mass_threshold > 0.0 && mass_threshold <= 1.0)) {
    throw InvalidArgument("mass_threshold must lie in (0, 1]");
  }
  const std::size_t frames = teacher.rows();
  KlResult result{0.0, Matrix(frames, teacher.cols()), std::vector<std::size_t>(frames, 0)};
  if (frames == 0) return result;

  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    auto p = teacher.row(t);
    auto q = student.row(t);
    const auto order = rank_classes(p);
    const std::size_t k = support_from_ranking(p, order, mass_threshold);
    result.support[t] = k;

    double log_mass = kNegInf;
    for (std::size_t i = 0; i < k; ++i) log_mass = log_add(log_mass, p[order[i]]);
    double frame_loss = 0.0;
    auto g = result.grad.row(t);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t c = order[i];
      const double log_pt = p[c] - log_mass;
      const double pt = std::exp(log_pt);
      if (pt == 0.0) continue;
      frame_loss += pt * (log_pt - q[c]);
      g[c] = -pt * inv_frames;
    }
    result.loss += frame_loss * inv_frames;
  }
  return result;
}

EditCounts edit_distance(std::span<const int> ref, std::span<const int> hyp) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  EditCounts counts;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const bool same = ref[i - 1] == hyp[j - 1];
      if (at(i, j) == at(i - 1, j - 1) + (same ? 0 : 1)) {
        if (!same) ++counts.substitutions;
        --i;
        --j;
        continue;
      }
    }
    if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++counts.deletions;
      --i;
    } else {
      ++counts.insertions;
      --j;
    }
  }
  return counts;
}

double word_error_rate(std::span<const int> ref, std::span<const int> hyp) {
  const auto counts = edit_distance(ref, hyp);
  return static_cast<double>(counts.total()) / static_cast<double>(std::max<std::size_t>(1, ref.size()));
}

}  // namespace kaizen
