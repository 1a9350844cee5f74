// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kaizen/data.hpp"
#include "kaizen/model.hpp"
#include "kaizen/trainer.hpp"

namespace kaizen {

using Json = nlohmann::json;

/// Strict reader for one JSON object: typed getters report the dotted path
/// of missing or mistyped fields, and finish() rejects unknown keys.
class JsonFields {
 public:
  JsonFields(const Json& object, std::string path = "");

  bool has(std::string_view key) const;
  const Json& raw(std::string_view key);

  double real(std::string_view key);
  double real(std::string_view key, double fallback);
  std::int64_t integer(std::string_view key);
  std::int64_t integer(std::string_view key, std::int64_t fallback);
  std::uint64_t natural(std::string_view key);
  std::uint64_t natural(std::string_view key, std::uint64_t fallback);
  bool boolean(std::string_view key, bool fallback);
  std::string string(std::string_view key);
  std::string string(std::string_view key, std::string_view fallback);
  JsonFields object(std::string_view key);

  std::string where(std::string_view key) const;
  /// Throws ConfigError on the first key that was never read.
  void finish() const;

 private:
  const Json& need(std::string_view key);

  const Json& object_;
  std::string path_;
  std::set<std::string, std::less<>> seen_;
};

// --- configs ---------------------------------------------------------------------

/// Every field except allow_adjacent_repeats is required.
CorpusConfig corpus_config_from_json(const Json& j);
Json to_json(const CorpusConfig& config);

/// Every field is optional and falls back to the TrainRunConfig default;
/// unknown fields are rejected.
TrainRunConfig train_config_from_json(const Json& j);
Json to_json(const TrainRunConfig& config);

Json read_json_file(const std::filesystem::path& path);
/// Pretty-printed, newline terminated.
void write_json_file(const std::filesystem::path& path, const Json& j);

/// FNV-1a over the canonical JSON form.
std::uint64_t config_hash(const TrainRunConfig& config);
std::string hex64(std::uint64_t v);

// --- checkpoints -----------------------------------------------------------------

struct Checkpoint {
  /// "seed", "run" (resumable), or "final".
  std::string kind;
  ModelDims dims;
  std::uint64_t config_hash = 0;
  /// The model to evaluate: seed model, or the student.
  ParameterVector params;
  /// Present for resumable checkpoints.
  std::optional<RunState> run;
};

/// Structured text with every real written in shortest round-trip form, so
/// load(save(x)) is bitwise exact.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// --- metrics CSV -----------------------------------------------------------------

/// Shortest round-trip decimal; "nan", "inf", "-inf" for special values.
std::string format_real(double v);
/// Like format_real but never in exponent form: 0.0001, not 1e-04.
std::string format_real_fixed(double v);
double parse_real(std::string_view s);

/// step,stage,train_loss,dev_wer,blank_ratio,teacher_student_l2,lr,half_life_steps
std::string metrics_csv_header();
/// The stage column reads "continuous_pl+refresh" on continuous-stage rows
/// whose teacher changed since the previous row.
std::string metrics_csv_row(const MetricsRecord& record);
std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path);

}  // namespace kaizen
