// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "kaizen/errors.hpp"
#include "kaizen/losses.hpp"
#include "kaizen/rng.hpp"
#include "oracles.hpp"

namespace kaizen {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix random_logits(Rng& rng, std::size_t frames, std::size_t classes, double scale = 2.0) {
  Matrix m(frames, classes);
  for (double& v : m.values()) v = rng.normal() * scale;
  return m;
}

TokenSequence random_tokens(Rng& rng, std::size_t length, int vocab) {
  TokenSequence out(length);
  for (int& t : out) t = static_cast<int>(rng.uniform_int(1, vocab));
  return out;
}

Matrix from_probs(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    for (std::size_t c = 0; c < rows[t].size(); ++c) m(t, c) = std::log(rows[t][c]);
  }
  return m;
}

TEST(LogSoftmax, RowsNormalize) {
  Rng rng(1);
  const auto lp = log_softmax(random_logits(rng, 6, 5, 30.0));
  for (std::size_t t = 0; t < lp.rows(); ++t) {
    double total = 0.0;
    for (double v : lp.row(t)) total += std::exp(v);
    EXPECT_NEAR(total, 1.0, 1e-12);
  }
}

TEST(LogAdd, HandlesInfinities) {
  EXPECT_EQ(log_add(-kInf, -kInf), -kInf);
  EXPECT_EQ(log_add(-kInf, 1.5), 1.5);
  EXPECT_NEAR(log_add(std::log(0.25), std::log(0.5)), std::log(0.75), 1e-15);
}

// --- CTC ------------------------------------------------------------------------

TEST(Ctc, TwoUniformFramesOneToken) {
  const Matrix lp = from_probs({{0.5, 0.5}, {0.5, 0.5}});
  const std::vector<int> target{1};
  EXPECT_NEAR(ctc_loss(lp, target).loss, -std::log(0.75), 1e-12);
  EXPECT_NEAR(ctc_bruteforce(lp, target), -std::log(0.75), 1e-12);
}

TEST(Ctc, EmptyTargetIsAllBlankPath) {
  const Matrix lp = from_probs({{0.2, 0.8}, {0.4, 0.6}, {0.5, 0.5}});
  EXPECT_NEAR(ctc_loss(lp, std::vector<int>{}).loss, -std::log(0.2 * 0.4 * 0.5), 1e-12);
}

TEST(Ctc, MinFramesCountsRepeatSeparators) {
  EXPECT_EQ(ctc_min_frames(std::vector<int>{}), 0u);
  EXPECT_EQ(ctc_min_frames(std::vector<int>{1, 2, 3}), 3u);
  EXPECT_EQ(ctc_min_frames(std::vector<int>{1, 1}), 3u);
  EXPECT_EQ(ctc_min_frames(std::vector<int>{2, 2, 2, 1}), 6u);
}

TEST(Ctc, InfeasibleTargetThrows) {
  const Matrix lp = from_probs({{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{1, 1}), InfeasibleTargetError);
  EXPECT_EQ(ctc_bruteforce(lp, std::vector<int>{1, 1}), kInf);
}

TEST(Ctc, RejectsBlankOrOutOfRangeTokens) {
  const Matrix lp = from_probs({{0.5, 0.5}, {0.5, 0.5}});
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{0}), InvalidArgument);
  EXPECT_THROW(ctc_loss(lp, std::vector<int>{2}), InvalidArgument);
}

TEST(Ctc, MatchesEnumerationOnSeededInstances) {
  Rng rng(2026);
  int compared = 0;
  for (int trial = 0; trial < 800; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const int vocab = static_cast<int>(rng.uniform_int(1, 3));
    const auto length = static_cast<std::size_t>(rng.uniform_int(0, 4));
    const auto lp = log_softmax(random_logits(rng, frames, static_cast<std::size_t>(vocab) + 1));
    const auto target = random_tokens(rng, length, vocab);
    const double brute = ctc_bruteforce(lp, target);
    const double independent = oracle::ctc_probability(lp, target);
    if (ctc_min_frames(target) > frames) {
      EXPECT_EQ(brute, kInf);
      EXPECT_EQ(independent, 0.0);
      EXPECT_THROW(ctc_loss(lp, target), InfeasibleTargetError);
      continue;
    }
    const double loss = ctc_loss(lp, target).loss;
    ASSERT_NEAR(loss, brute, 1e-9) << "trial " << trial;
    ASSERT_NEAR(loss, -std::log(independent), 1e-9) << "trial " << trial;
    ++compared;
  }
  EXPECT_GE(compared, 500);
}

TEST(Ctc, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  for (int trial = 0; trial < 120; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 7));
    const int vocab = static_cast<int>(rng.uniform_int(1, 4));
    auto target = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 3)), vocab);
    while (ctc_min_frames(target) > frames) target.pop_back();
    const Matrix logits = random_logits(rng, frames, static_cast<std::size_t>(vocab) + 1, 1.5);

    const auto lp = log_softmax(logits);
    const Matrix analytic = log_softmax_backward(lp, ctc_loss(lp, target).grad);
    auto f = [&](std::vector<double>& z) {
      Matrix m(frames, logits.cols());
      std::copy(z.begin(), z.end(), m.values().begin());
      return ctc_loss(log_softmax(m), target).loss;
    };
    const std::vector<double> z(logits.values().begin(), logits.values().end());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double numeric = oracle::central_difference(f, z, i);
      ASSERT_LE(oracle::relative_error(analytic.values()[i], numeric, 1e-4), 1e-5) << "trial " << trial << " i " << i;
    }
  }
}

TEST(Ctc, LossIsNonNegativeAndGradRowsSumToOne) {
  // d(-log p)/d(logprob) rows sum to -1: each frame emits exactly one label
  // along every path.
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const auto lp = log_softmax(random_logits(rng, 6, 4));
    const auto target = random_tokens(rng, 2, 3);
    const auto res = ctc_loss(lp, target);
    EXPECT_GE(res.loss, 0.0);
    for (std::size_t t = 0; t < 6; ++t) {
      double total = 0.0;
      for (double g : res.grad.row(t)) total += g;
      ASSERT_NEAR(total, -1.0, 1e-10);
    }
  }
}

TEST(Ctc, CollapsedAlignmentIsAlwaysFeasible) {
  Rng rng(6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<int> alignment(static_cast<std::size_t>(rng.uniform_int(1, 12)));
    for (int& a : alignment) a = static_cast<int>(rng.uniform_int(0, 3));
    const auto target = ctc_collapse(alignment);
    EXPECT_LE(ctc_min_frames(target), alignment.size());
    const auto lp = log_softmax(random_logits(rng, alignment.size(), 4));
    EXPECT_TRUE(std::isfinite(ctc_loss(lp, target).loss));
  }
}

// --- decoding -------------------------------------------------------------------

TEST(Decode, CollapseExamples) {
  EXPECT_EQ(ctc_collapse(std::vector<int>{1, 1, 0, 1, 2, 2, 0}), (TokenSequence{1, 1, 2}));
  EXPECT_EQ(ctc_collapse(std::vector<int>{0, 0, 0}), TokenSequence{});
  EXPECT_EQ(ctc_collapse(std::vector<int>{3}), TokenSequence{3});
}

TEST(Decode, TiesGoToLowestIndex) {
  Matrix m(2, 3, 0.0);
  EXPECT_EQ(frame_argmax(m), (std::vector<int>{0, 0}));
  m(1, 1) = 1.0;
  m(1, 2) = 1.0;
  EXPECT_EQ(frame_argmax(m), (std::vector<int>{0, 1}));
  EXPECT_EQ(greedy_decode(log_softmax(Matrix(4, 5, 0.0))), TokenSequence{});
}

TEST(Decode, OutputHasNoBlanksOrArgmaxRunDuplicates) {
  Rng rng(12);
  for (int trial = 0; trial < 500; ++trial) {
    const auto lp = log_softmax(random_logits(rng, 10, 4));
    const auto argmax = frame_argmax(lp);
    const auto hyp = greedy_decode(lp);
    for (int tok : hyp) ASSERT_NE(tok, kBlank);
    // Independent collapse: count runs of non-blank labels.
    std::vector<int> runs;
    for (std::size_t t = 0; t < argmax.size(); ++t) {
      if (argmax[t] != kBlank && (t == 0 || argmax[t - 1] != argmax[t])) runs.push_back(argmax[t]);
    }
    ASSERT_EQ(hyp, runs);
  }
}

// --- KL top-k -------------------------------------------------------------------

TEST(TopK, SupportExamples) {
  const std::vector<double> row{std::log(0.6), std::log(0.3), std::log(0.08), std::log(0.02)};
  EXPECT_EQ(topk_support(row, 0.99), 4u);
  EXPECT_EQ(topk_support(row, 0.85), 2u);
  EXPECT_EQ(topk_support(row, 0.6), 1u);
  const std::vector<double> one_hot{-kInf, 0.0, -kInf};
  EXPECT_EQ(topk_support(one_hot, 0.99), 1u);
}

TEST(TopK, OneHotTeacherGivesNegativeLogStudent) {
  Rng rng(3);
  const auto student = log_softmax(random_logits(rng, 3, 4));
  Matrix teacher(3, 4, -kInf);
  const int cls[] = {2, 0, 3};
  for (std::size_t t = 0; t < 3; ++t) teacher(t, static_cast<std::size_t>(cls[t])) = 0.0;
  const auto res = kl_topk_loss(teacher, student, 0.99);
  double expected = 0.0;
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(res.support[t], 1u);
    expected -= student(t, static_cast<std::size_t>(cls[t])) / 3.0;
  }
  EXPECT_NEAR(res.loss, expected, 1e-12);
}

TEST(TopK, IdenticalFullSupportGivesZero) {
  Rng rng(9);
  const auto p = log_softmax(random_logits(rng, 5, 4, 0.5));
  const auto res = kl_topk_loss(p, p, 1.0);
  EXPECT_NEAR(res.loss, 0.0, 1e-12);
}

TEST(TopK, LossIsNonNegative) {
  Rng rng(10);
  for (int trial = 0; trial < 300; ++trial) {
    const auto p = log_softmax(random_logits(rng, 4, 5, 3.0));
    const auto q = log_softmax(random_logits(rng, 4, 5, 3.0));
    EXPECT_GE(kl_topk_loss(p, q, rng.uniform(0.5, 1.0)).loss, -1e-12);
  }
}

TEST(TopK, GradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 120; ++trial) {
    const auto frames = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const auto classes = static_cast<std::size_t>(rng.uniform_int(2, 6));
    const auto teacher = log_softmax(random_logits(rng, frames, classes, 2.0));
    const Matrix logits = random_logits(rng, frames, classes, 1.5);
    const double threshold = rng.uniform(0.5, 0.999);

    const auto lp = log_softmax(logits);
    const Matrix analytic = log_softmax_backward(lp, kl_topk_loss(teacher, lp, threshold).grad);
    auto f = [&](std::vector<double>& z) {
      Matrix m(frames, classes);
      std::copy(z.begin(), z.end(), m.values().begin());
      return kl_topk_loss(teacher, log_softmax(m), threshold).loss;
    };
    const std::vector<double> z(logits.values().begin(), logits.values().end());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double numeric = oracle::central_difference(f, z, i);
      ASSERT_LE(oracle::relative_error(analytic.values()[i], numeric, 1e-4), 1e-5) << "trial " << trial;
    }
  }
}

TEST(TopK, ShapeMismatchAndBadThreshold) {
  EXPECT_THROW(kl_topk_loss(Matrix(2, 3), Matrix(3, 3)), LayoutError);
  EXPECT_THROW(kl_topk_loss(Matrix(2, 3), Matrix(2, 3), 0.0), InvalidArgument);
}

// --- scoring --------------------------------------------------------------------

TEST(EditDistance, Examples) {
  EXPECT_EQ(edit_distance(std::vector<int>{1, 2, 3}, std::vector<int>{1, 2, 3}).total(), 0u);
  EXPECT_EQ(edit_distance(std::vector<int>{1, 2, 3}, std::vector<int>{1, 3}), (EditCounts{0, 0, 1}));
  EXPECT_EQ(edit_distance(std::vector<int>{1, 3}, std::vector<int>{1, 2, 3}), (EditCounts{0, 1, 0}));
  EXPECT_EQ(edit_distance(std::vector<int>{1, 2}, std::vector<int>{1, 4}), (EditCounts{1, 0, 0}));
  EXPECT_DOUBLE_EQ(word_error_rate(std::vector<int>{1, 2, 3, 4}, std::vector<int>{}), 1.0);
  EXPECT_DOUBLE_EQ(word_error_rate(std::vector<int>{}, std::vector<int>{5, 5}), 2.0);
}

TEST(EditDistance, MatchesOracleAndBookkeeping) {
  Rng rng(31);
  for (int trial = 0; trial < 2000; ++trial) {
    const auto a = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 9)), 4);
    const auto b = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 9)), 4);
    const auto e = edit_distance(a, b);
    ASSERT_EQ(e.total(), oracle::levenshtein(a, b));
    // Matches are the ref tokens that are neither substituted nor deleted.
    ASSERT_LE(e.substitutions + e.deletions, a.size());
    ASSERT_EQ(a.size() - e.substitutions - e.deletions, b.size() - e.substitutions - e.insertions);
    ASSERT_EQ(edit_distance(b, a).total(), e.total());
  }
}

TEST(EditDistance, TriangleInequality) {
  Rng rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const auto a = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 6)), 3);
    const auto b = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 6)), 3);
    const auto c = random_tokens(rng, static_cast<std::size_t>(rng.uniform_int(0, 6)), 3);
    ASSERT_LE(edit_distance(a, c).total(), edit_distance(a, b).total() + edit_distance(b, c).total());
  }
}

}  // namespace
}  // namespace kaizen
