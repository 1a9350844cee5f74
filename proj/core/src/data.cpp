// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "kaizen/errors.hpp"
#include "kaizen/rng.hpp"

namespace kaizen {

using json = nlohmann::json;

void CorpusConfig::validate() const {
  if (vocab == 0) throw ConfigError("vocab must be positive");
  if (feature_dim == 0) throw ConfigError("feature_dim must be positive");
  if (frames_min < 1) throw ConfigError("frames_min must be >= 1");
  if (frames_max < frames_min) throw ConfigError("frames_max must be >= frames_min");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
  if (length_min < 1) throw ConfigError("length_min must be >= 1");
  if (length_max < length_min) throw ConfigError("length_max must be >= length_min");
  if (!allow_adjacent_repeats && vocab < 2 && length_max > 1) {
    throw ConfigError("allow_adjacent_repeats=false needs vocab >= 2");
  }
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kSupervised:
      return "supervised";
    case Split::kUnsupervised:
      return "unsupervised";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

std::string_view split_suffix(Split split) {
  switch (split) {
    case Split::kSupervised:
      return "sup";
    case Split::kUnsupervised:
      return "unsup";
    case Split::kDev:
      return "dev";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

const std::vector<Utterance>& Corpus::split(Split s) const {
  switch (s) {
    case Split::kSupervised:
      return supervised;
    case Split::kUnsupervised:
      return unsupervised;
    case Split::kDev:
      return dev;
    case Split::kTest:
      return test;
  }
  return supervised;
}

Matrix token_embeddings(const CorpusConfig& config) {
  config.validate();
  Rng rng(derive_seed(config.seed, {0xe3b}));
  Matrix table(config.vocab, config.feature_dim);
  for (double& v : table.values()) v = rng.normal();
  return table;
}

std::uint64_t split_seed(const CorpusConfig& config, Split split) {
  return derive_seed(config.seed, {0x5917, static_cast<std::uint64_t>(split)});
}

namespace {

std::size_t split_count(const CorpusConfig& config, Split split) {
  switch (split) {
    case Split::kSupervised:
      return config.supervised_n;
    case Split::kUnsupervised:
      return config.unsupervised_n;
    case Split::kDev:
      return config.dev_n;
    case Split::kTest:
      return config.test_n;
  }
  return 0;
}

std::string make_id(Split split, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "-%05zu", index);
  return std::string(split_suffix(split)) + buf;
}

}  // namespace

std::vector<Utterance> generate_split(const CorpusConfig& config, Split split) {
  const Matrix embeddings = token_embeddings(config);
  Rng rng(split_seed(config, split));
  const std::size_t count = split_count(config, split);
  const auto vocab = static_cast<std::int64_t>(config.vocab);

  std::vector<Utterance> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    const auto length = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(config.length_min), static_cast<std::int64_t>(config.length_max)));
    TokenSequence tokens;
    tokens.reserve(length);
    for (std::size_t i = 0; i < length; ++i) {
      int tok = 0;
      if (config.allow_adjacent_repeats || tokens.empty()) {
        tok = static_cast<int>(rng.uniform_int(1, vocab));
      } else {
        // Uniform over the V-1 tokens that differ from the previous one.
        tok = static_cast<int>(rng.uniform_int(1, vocab - 1));
        if (tok >= tokens.back()) ++tok;
      }
      tokens.push_back(tok);
    }

    std::vector<int> alignment;
    for (int tok : tokens) {
      const auto repeat = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(config.frames_min),
                                                                    static_cast<std::int64_t>(config.frames_max)));
      alignment.insert(alignment.end(), repeat, tok);
    }

    Utterance utt;
    utt.id = make_id(split, n);
    utt.features = Matrix(alignment.size(), config.feature_dim);
    for (std::size_t t = 0; t < alignment.size(); ++t) {
      auto proto = embeddings.row(static_cast<std::size_t>(alignment[t] - 1));
      auto row = utt.features.row(t);
      for (std::size_t d = 0; d < config.feature_dim; ++d) {
        row[d] = proto[d] + (config.noise_sigma > 0.0 ? config.noise_sigma * rng.normal() : 0.0);
      }
    }
    if (split != Split::kUnsupervised) {
      utt.reference = std::move(tokens);
      utt.alignment = std::move(alignment);
    }
    out.push_back(std::move(utt));
  }
  return out;
}

Corpus generate_corpus(const CorpusConfig& config) {
  config.validate();
  Corpus corpus;
  corpus.supervised = generate_split(config, Split::kSupervised);
  corpus.unsupervised = generate_split(config, Split::kUnsupervised);
  corpus.dev = generate_split(config, Split::kDev);
  corpus.test = generate_split(config, Split::kTest);
  return corpus;
}

MaskPlan sample_masks(std::size_t frames, std::size_t feature_dim, const MaskConfig& config, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x3a5c}));
  auto draw = [&rng](std::size_t axis, std::size_t max_width, std::size_t count) {
    std::vector<MaskSpan> spans;
    for (std::size_t i = 0; i < count; ++i) {
      auto width = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(max_width)));
      width = std::min(width, axis);
      const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(axis - width)));
      spans.push_back(MaskSpan{start, width});
    }
    return spans;
  };
  MaskPlan plan;
  plan.time = draw(frames, config.max_time_width, config.num_time_masks);
  plan.feature = draw(feature_dim, config.max_feature_width, config.num_feature_masks);
  return plan;
}

Matrix apply_mask_plan(const Matrix& features, const MaskPlan& plan, double mask_value) {
  Matrix out = features;
  for (const MaskSpan& span : plan.time) {
    for (std::size_t t = span.start; t < std::min(span.start + span.width, out.rows()); ++t) {
      for (double& v : out.row(t)) v = mask_value;
    }
  }
  for (const MaskSpan& span : plan.feature) {
    for (std::size_t t = 0; t < out.rows(); ++t) {
      auto row = out.row(t);
      for (std::size_t d = span.start; d < std::min(span.start + span.width, out.cols()); ++d) row[d] = mask_value;
    }
  }
  return out;
}

Matrix apply_masks(const Matrix& features, const MaskConfig& config, std::uint64_t seed) {
  return apply_mask_plan(features, sample_masks(features.rows(), features.cols(), config, seed), config.mask_value);
}

void save_dataset(const std::filesystem::path& path, std::span<const Utterance> utterances) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot open " + path.string() + " for writing");
  for (const Utterance& utt : utterances) {
    json rec;
    rec["id"] = utt.id;
    json rows = json::array();
    for (std::size_t t = 0; t < utt.features.rows(); ++t) {
      auto row = utt.features.row(t);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    rec["features"] = std::move(rows);
    if (utt.reference) {
      rec["tokens"] = *utt.reference;
      if (!utt.alignment.empty()) rec["alignment"] = utt.alignment;
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw DataFormatError("write failed for " + path.string());
}

namespace {

Utterance parse_record(const std::string& line) {
  const json rec = json::parse(line);
  if (!rec.is_object()) throw DataFormatError("record is not an object");
  if (!rec.contains("id") || !rec["id"].is_string()) throw DataFormatError("missing string field: id");
  if (!rec.contains("features") || !rec["features"].is_array()) throw DataFormatError("missing array field: features");

  Utterance utt;
  utt.id = rec["id"].get<std::string>();
  const json& rows = rec["features"];
  const std::size_t frames = rows.size();
  const std::size_t dim = frames == 0 ? 0 : rows[0].size();
  utt.features = Matrix(frames, dim);
  for (std::size_t t = 0; t < frames; ++t) {
    if (!rows[t].is_array() || rows[t].size() != dim) {
      throw DataFormatError("feature row " + std::to_string(t) + " has inconsistent dimension");
    }
    for (std::size_t d = 0; d < dim; ++d) {
      if (!rows[t][d].is_number()) throw DataFormatError("non-numeric feature value");
      utt.features(t, d) = rows[t][d].get<double>();
    }
  }
  if (rec.contains("tokens")) {
    utt.reference = rec["tokens"].get<TokenSequence>();
    if (rec.contains("alignment")) {
      utt.alignment = rec["alignment"].get<std::vector<int>>();
      if (utt.alignment.size() != frames) throw DataFormatError("alignment length differs from frame count");
    }
  }
  return utt;
}

}  // namespace

std::vector<Utterance> load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  std::vector<Utterance> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const json::exception& e) {
      throw DataFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DataFormatError& e) {
      throw DataFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path dataset_path(const std::filesystem::path& dir, std::string_view name, Split split) {
  return dir / (std::string(name) + "." + std::string(split_suffix(split)) + ".jsonl");
}

}  // namespace kaizen
