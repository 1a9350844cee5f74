// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kaizen/losses.hpp"
#include "kaizen/numeric.hpp"

namespace kaizen {

/// Synthetic corpus: every token v owns a prototype vector e_v ~ N(0, I);
/// an utterance emits a run of noisy copies of e_v for each of its tokens.
struct CorpusConfig {
  std::size_t vocab = 8;
  std::size_t feature_dim = 16;
  std::size_t frames_min = 2;
  std::size_t frames_max = 4;
  double noise_sigma = 1.3;
  std::size_t length_min = 3;
  std::size_t length_max = 6;
  std::size_t supervised_n = 10;
  std::size_t unsupervised_n = 2000;
  std::size_t dev_n = 100;
  std::size_t test_n = 100;
  std::uint64_t seed = 1;
  /// When false, consecutive tokens of an utterance always differ.
  bool allow_adjacent_repeats = false;

  void validate() const;
};

enum class Split { kSupervised, kUnsupervised, kDev, kTest };

std::string_view to_string(Split split);
/// File-name suffix for a split: "sup", "unsup", "dev", "test".
std::string_view split_suffix(Split split);

struct Utterance {
  std::string id;
  Matrix features;
  /// Absent for the unlabeled pool.
  std::optional<TokenSequence> reference;
  /// Token id of every frame, known by construction. Only kept for labeled
  /// splits; the frame-level paradigm uses it as one-hot seed targets, CTC
  /// training never reads it.
  std::vector<int> alignment;

  bool labeled() const { return reference.has_value(); }
  std::size_t frames() const { return features.rows(); }
};

struct Corpus {
  std::vector<Utterance> supervised;
  std::vector<Utterance> unsupervised;
  std::vector<Utterance> dev;
  std::vector<Utterance> test;

  const std::vector<Utterance>& split(Split s) const;
};

/// The V x D prototype table drawn from the corpus seed.
Matrix token_embeddings(const CorpusConfig& config);

/// Seed of one split, derived from the corpus seed.
std::uint64_t split_seed(const CorpusConfig& config, Split split);

/// Generates one split on its own; identical to the matching member of
/// generate_corpus().
std::vector<Utterance> generate_split(const CorpusConfig& config, Split split);

Corpus generate_corpus(const CorpusConfig& config);

// --- masking ---------------------------------------------------------------

struct MaskConfig {
  std::size_t num_time_masks = 1;
  std::size_t max_time_width = 3;
  std::size_t num_feature_masks = 1;
  std::size_t max_feature_width = 4;
  double mask_value = 0.0;
};

/// A mask interval: [start, start + width).
struct MaskSpan {
  std::size_t start = 0;
  std::size_t width = 0;
  bool operator==(const MaskSpan&) const = default;
};

struct MaskPlan {
  std::vector<MaskSpan> time;
  std::vector<MaskSpan> feature;
};

/// Draws mask widths uniformly from [0, max_width] (clipped to the axis
/// length) and start positions uniformly among the positions that fit.
MaskPlan sample_masks(std::size_t frames, std::size_t feature_dim, const MaskConfig& config, std::uint64_t seed);

Matrix apply_mask_plan(const Matrix& features, const MaskPlan& plan, double mask_value);

/// Time and feature masking with a seeded plan. The input is not modified.
Matrix apply_masks(const Matrix& features, const MaskConfig& config, std::uint64_t seed);

// --- files -----------------------------------------------------------------

/// One JSON object per line: {"id", "features": [[...], ...], "tokens": [...],
/// "alignment": [...]}; tokens and alignment are omitted for unlabeled
/// utterances.
void save_dataset(const std::filesystem::path& path, std::span<const Utterance> utterances);

/// Throws DataFormatError naming the line on malformed input.
std::vector<Utterance> load_dataset(const std::filesystem::path& path);

/// "<dir>/<name>.<suffix>.jsonl"
std::filesystem::path dataset_path(const std::filesystem::path& dir, std::string_view name, Split split);

}  // namespace kaizen
