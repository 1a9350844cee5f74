// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "kaizen/errors.hpp"

namespace kaizen {

// --- JsonFields --------------------------------------------------------------------

JsonFields::JsonFields(const Json& object, std::string path) : object_(object), path_(std::move(path)) {
  if (!object_.is_object()) {
    throw ConfigError(path_.empty() ? std::string("config must be an object") : path_ + " must be an object");
  }
}

std::string JsonFields::where(std::string_view key) const {
  return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
}

bool JsonFields::has(std::string_view key) const { return object_.contains(key); }

const Json& JsonFields::need(std::string_view key) {
  auto it = object_.find(key);
  if (it == object_.end()) throw ConfigError("missing field: " + where(key));
  seen_.emplace(key);
  return *it;
}

const Json& JsonFields::raw(std::string_view key) { return need(key); }

double JsonFields::real(std::string_view key) {
  const Json& v = need(key);
  if (!v.is_number()) throw ConfigError("field " + where(key) + ": expected a number");
  return v.get<double>();
}

double JsonFields::real(std::string_view key, double fallback) { return has(key) ? real(key) : fallback; }

std::int64_t JsonFields::integer(std::string_view key) {
  const Json& v = need(key);
  if (!v.is_number_integer()) throw ConfigError("field " + where(key) + ": expected an integer");
  if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
    throw ConfigError("field " + where(key) + ": out of range");
  }
  return v.get<std::int64_t>();
}

std::int64_t JsonFields::integer(std::string_view key, std::int64_t fallback) {
  return has(key) ? integer(key) : fallback;
}

std::uint64_t JsonFields::natural(std::string_view key) {
  const Json& v = need(key);
  if (!v.is_number_unsigned()) throw ConfigError("field " + where(key) + ": expected a non-negative integer");
  return v.get<std::uint64_t>();
}

std::uint64_t JsonFields::natural(std::string_view key, std::uint64_t fallback) {
  return has(key) ? natural(key) : fallback;
}

bool JsonFields::boolean(std::string_view key, bool fallback) {
  if (!has(key)) return fallback;
  const Json& v = need(key);
  if (!v.is_boolean()) throw ConfigError("field " + where(key) + ": expected true or false");
  return v.get<bool>();
}

std::string JsonFields::string(std::string_view key) {
  const Json& v = need(key);
  if (!v.is_string()) throw ConfigError("field " + where(key) + ": expected a string");
  return v.get<std::string>();
}

std::string JsonFields::string(std::string_view key, std::string_view fallback) {
  return has(key) ? string(key) : std::string(fallback);
}

JsonFields JsonFields::object(std::string_view key) { return JsonFields(need(key), where(key)); }

void JsonFields::finish() const {
  for (auto it = object_.begin(); it != object_.end(); ++it) {
    if (!seen_.contains(it.key())) throw ConfigError("unknown field: " + where(it.key()));
  }
}

// --- configs ---------------------------------------------------------------------------

namespace {

std::pair<std::size_t, std::size_t> read_range(JsonFields& f, std::string_view key) {
  const Json& v = f.raw(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned()) {
    throw ConfigError("field " + f.where(key) + ": expected [min, max]");
  }
  return {v[0].get<std::size_t>(), v[1].get<std::size_t>()};
}

// Wraps an enum parser so its error names the field.
template <typename F>
auto parse_enum(JsonFields& f, std::string_view key, std::string_view fallback, F parser) {
  const std::string s = f.string(key, fallback);
  try {
    return parser(s);
  } catch (const ConfigError& e) {
    throw ConfigError("field " + f.where(key) + ": " + e.what());
  }
}

template <typename F>
auto parse_enum(JsonFields& f, std::string_view key, F parser) {
  const std::string s = f.string(key);
  try {
    return parser(s);
  } catch (const ConfigError& e) {
    throw ConfigError("field " + f.where(key) + ": " + e.what());
  }
}

StageSchedule read_stage(JsonFields f, const StageSchedule& d) {
  StageSchedule s;
  s.warmup_steps = f.integer("warmup_steps", d.warmup_steps);
  s.peak_lr = f.real("peak_lr", d.peak_lr);
  s.shape = parse_enum(f, "shape", to_string(d.shape), schedule_shape_from_string);
  f.finish();
  return s;
}

Json stage_json(const StageSchedule& s) {
  return {{"warmup_steps", s.warmup_steps}, {"peak_lr", s.peak_lr}, {"shape", to_string(s.shape)}};
}

}  // namespace

CorpusConfig corpus_config_from_json(const Json& j) {
  JsonFields f(j);
  CorpusConfig c;
  c.vocab = f.natural("vocab");
  c.feature_dim = f.natural("feature_dim");
  std::tie(c.frames_min, c.frames_max) = read_range(f, "frames_per_token");
  c.noise_sigma = f.real("noise_sigma");
  std::tie(c.length_min, c.length_max) = read_range(f, "utterance_length");
  c.supervised_n = f.natural("supervised_n");
  c.unsupervised_n = f.natural("unsupervised_n");
  c.dev_n = f.natural("dev_n");
  c.test_n = f.natural("test_n");
  c.seed = f.natural("seed");
  c.allow_adjacent_repeats = f.boolean("allow_adjacent_repeats", false);
  f.finish();
  c.validate();
  return c;
}

Json to_json(const CorpusConfig& c) {
  return {{"vocab", c.vocab},
          {"feature_dim", c.feature_dim},
          {"frames_per_token", {c.frames_min, c.frames_max}},
          {"noise_sigma", c.noise_sigma},
          {"utterance_length", {c.length_min, c.length_max}},
          {"supervised_n", c.supervised_n},
          {"unsupervised_n", c.unsupervised_n},
          {"dev_n", c.dev_n},
          {"test_n", c.test_n},
          {"seed", c.seed},
          {"allow_adjacent_repeats", c.allow_adjacent_repeats}};
}

TrainRunConfig train_config_from_json(const Json& j) {
  const TrainRunConfig d;
  TrainRunConfig c;
  JsonFields f(j);
  c.paradigm = parse_enum(f, "paradigm", to_string(d.paradigm), paradigm_from_string);
  if (f.has("model")) {
    JsonFields m = f.object("model");
    c.model.feature_dim = m.natural("feature_dim", d.model.feature_dim);
    c.model.context = m.natural("context", d.model.context);
    c.model.hidden = m.natural("hidden", d.model.hidden);
    c.model.vocab = m.natural("vocab", d.model.vocab);
    m.finish();
  }
  if (f.has("ema")) {
    JsonFields e = f.object("ema");
    c.ema.alpha = e.real("alpha", d.ema.alpha);
    c.ema.delta = e.integer("delta", d.ema.delta);
    c.ema.precision_mode = parse_enum(e, "precision_mode", to_string(d.ema.precision_mode), precision_mode_from_string);
    c.ema.start_step = e.integer("start_step", d.ema.start_step);
    c.ema_accumulation = parse_enum(e, "accumulation", to_string(d.ema_accumulation), ema_accumulation_from_string);
    e.finish();
  }
  c.supervised_steps = f.integer("supervised_steps", d.supervised_steps);
  c.burn_in_steps = f.integer("burn_in_steps", d.burn_in_steps);
  c.total_steps = f.integer("total_steps", d.total_steps);
  c.fine_tune_steps = f.integer("fine_tune_steps", d.fine_tune_steps);
  c.batch_size = f.natural("batch_size", d.batch_size);
  c.dropout_rate = f.real("dropout_rate", d.dropout_rate);
  if (f.has("mask")) {
    JsonFields m = f.object("mask");
    c.mask.num_time_masks = m.natural("num_time_masks", d.mask.num_time_masks);
    c.mask.max_time_width = m.natural("max_time_width", d.mask.max_time_width);
    c.mask.num_feature_masks = m.natural("num_feature_masks", d.mask.num_feature_masks);
    c.mask.max_feature_width = m.natural("max_feature_width", d.mask.max_feature_width);
    c.mask.mask_value = m.real("mask_value", d.mask.mask_value);
    m.finish();
  }
  if (f.has("optimizer")) {
    JsonFields o = f.object("optimizer");
    const auto& da = d.optimizer.adam;
    c.optimizer.adam.beta1 = o.real("beta1", da.beta1);
    c.optimizer.adam.beta2 = o.real("beta2", da.beta2);
    c.optimizer.adam.epsilon = o.real("epsilon", da.epsilon);
    c.optimizer.adam.clip_threshold = o.real("clip_threshold", da.clip_threshold);
    if (o.has("supervised")) c.optimizer.supervised = read_stage(o.object("supervised"), d.optimizer.supervised);
    if (o.has("semi_supervised")) {
      c.optimizer.semi_supervised = read_stage(o.object("semi_supervised"), d.optimizer.semi_supervised);
    }
    if (o.has("fine_tune")) c.optimizer.fine_tune = read_stage(o.object("fine_tune"), d.optimizer.fine_tune);
    o.finish();
  }
  if (f.has("cache") && !f.raw("cache").is_null()) {
    JsonFields k = f.object("cache");
    const CacheConfig dk;
    c.cache = CacheConfig{k.natural("size", dk.size), k.real("refresh_prob", dk.refresh_prob)};
    k.finish();
  }
  c.student_init = parse_enum(f, "student_init", to_string(d.student_init), student_init_from_string);
  c.supervised_mix_fraction = f.real("supervised_mix_fraction", d.supervised_mix_fraction);
  c.filter_empty_pseudo_labels = f.boolean("filter_empty_pseudo_labels", d.filter_empty_pseudo_labels);
  c.seed = f.natural("seed", d.seed);
  c.eval_every = f.integer("eval_every", d.eval_every);
  c.collapse_blank_threshold = f.real("collapse_blank_threshold", d.collapse_blank_threshold);
  c.collapse_patience = static_cast<int>(f.integer("collapse_patience", d.collapse_patience));
  c.kl_mass_threshold = f.real("kl_mass_threshold", d.kl_mass_threshold);
  f.finish();
  c.validate();
  return c;
}

Json to_json(const TrainRunConfig& c) {
  Json j;
  j["paradigm"] = to_string(c.paradigm);
  j["model"] = {{"feature_dim", c.model.feature_dim},
                {"context", c.model.context},
                {"hidden", c.model.hidden},
                {"vocab", c.model.vocab}};
  j["ema"] = {{"alpha", c.ema.alpha},
              {"delta", c.ema.delta},
              {"precision_mode", to_string(c.ema.precision_mode)},
              {"start_step", c.ema.start_step},
              {"accumulation", to_string(c.ema_accumulation)}};
  j["supervised_steps"] = c.supervised_steps;
  j["burn_in_steps"] = c.burn_in_steps;
  j["total_steps"] = c.total_steps;
  j["fine_tune_steps"] = c.fine_tune_steps;
  j["batch_size"] = c.batch_size;
  j["dropout_rate"] = c.dropout_rate;
  j["mask"] = {{"num_time_masks", c.mask.num_time_masks},
               {"max_time_width", c.mask.max_time_width},
               {"num_feature_masks", c.mask.num_feature_masks},
               {"max_feature_width", c.mask.max_feature_width},
               {"mask_value", c.mask.mask_value}};
  j["optimizer"] = {{"beta1", c.optimizer.adam.beta1},
                    {"beta2", c.optimizer.adam.beta2},
                    {"epsilon", c.optimizer.adam.epsilon},
                    {"clip_threshold", c.optimizer.adam.clip_threshold},
                    {"supervised", stage_json(c.optimizer.supervised)},
                    {"semi_supervised", stage_json(c.optimizer.semi_supervised)},
                    {"fine_tune", stage_json(c.optimizer.fine_tune)}};
  j["cache"] = c.cache ? Json{{"size", c.cache->size}, {"refresh_prob", c.cache->refresh_prob}} : Json(nullptr);
  j["student_init"] = to_string(c.student_init);
  j["supervised_mix_fraction"] = c.supervised_mix_fraction;
  j["filter_empty_pseudo_labels"] = c.filter_empty_pseudo_labels;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["collapse_blank_threshold"] = c.collapse_blank_threshold;
  j["collapse_patience"] = c.collapse_patience;
  j["kl_mass_threshold"] = c.kl_mass_threshold;
  return j;
}

Json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed for " + path.string());
}

std::uint64_t config_hash(const TrainRunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : to_json(config).dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// --- checkpoints -------------------------------------------------------------------------

namespace {

// JSON has no NaN or infinity, so specials travel as strings.
Json real_json(double v) { return std::isfinite(v) ? Json(v) : Json(format_real(v)); }

double real_from(const Json& v) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return parse_real(v.get<std::string>());
  throw DataFormatError("expected a real");
}

Json params_json(const ParameterVector& p) {
  Json segs = Json::array();
  for (const Segment& s : p.layout()) segs.push_back({{"name", s.name}, {"length", s.length}});
  return {{"segments", segs}, {"values", std::vector<double>(p.values().begin(), p.values().end())}};
}

ParameterVector params_from(const Json& j) {
  std::vector<std::pair<std::string, std::size_t>> sizes;
  for (const Json& s : j.at("segments")) sizes.emplace_back(s.at("name").get<std::string>(), s.at("length").get<std::size_t>());
  ParameterVector p = ParameterVector::with_segments(sizes);
  const Json& values = j.at("values");
  if (values.size() != p.size()) throw DataFormatError("parameter count does not match the segment table");
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = values[i].get<double>();
  return p;
}

Json metrics_json(const MetricsRecord& r) {
  return {{"step", r.step},
          {"stage", to_string(r.stage)},
          {"teacher_refreshed", r.teacher_refreshed},
          {"train_loss", real_json(r.train_loss)},
          {"dev_wer", real_json(r.dev_wer)},
          {"blank_ratio", real_json(r.blank_ratio)},
          {"teacher_student_l2", real_json(r.teacher_student_l2)},
          {"lr", real_json(r.lr)},
          {"half_life_steps", real_json(r.half_life_steps)}};
}

MetricsRecord metrics_from(const Json& j) {
  MetricsRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.stage = stage_from_string(j.at("stage").get<std::string>());
  r.teacher_refreshed = j.at("teacher_refreshed").get<bool>();
  r.train_loss = real_from(j.at("train_loss"));
  r.dev_wer = real_from(j.at("dev_wer"));
  r.blank_ratio = real_from(j.at("blank_ratio"));
  r.teacher_student_l2 = real_from(j.at("teacher_student_l2"));
  r.lr = real_from(j.at("lr"));
  r.half_life_steps = real_from(j.at("half_life_steps"));
  return r;
}

Json run_json(const RunState& s) {
  Json j;
  j["step"] = s.step;
  j["student"] = params_json(s.student);
  j["adam"] = {{"first_moment", params_json(s.adam.first_moment)},
               {"second_moment", params_json(s.adam.second_moment)},
               {"step_count", s.adam.step_count},
               {"beta1", s.adam.config.beta1},
               {"beta2", s.adam.config.beta2},
               {"epsilon", s.adam.config.epsilon},
               {"clip_threshold", s.adam.config.clip_threshold}};
  if (s.ema) {
    j["ema"] = {{"master", params_json(s.ema->master)},
                {"update_count", s.ema->update_count},
                {"alpha", s.ema->config.alpha},
                {"delta", s.ema->config.delta},
                {"precision_mode", to_string(s.ema->config.precision_mode)},
                {"start_step", s.ema->config.start_step}};
  } else {
    j["ema"] = nullptr;
  }
  Json entries = Json::array();
  for (const CacheEntry& e : s.cache.entries) {
    entries.push_back({{"utterance", e.utterance},
                       {"id", e.label.utterance_id},
                       {"tokens", e.label.tokens},
                       {"generated_at_step", e.label.generated_at_step},
                       {"source", to_string(e.label.source)}});
  }
  j["cache"] = {{"capacity", s.cache.capacity}, {"entries", entries}};
  Json metrics = Json::array();
  for (const MetricsRecord& r : s.metrics) metrics.push_back(metrics_json(r));
  j["metrics"] = metrics;
  j["collapse_streak"] = s.collapse_streak;
  j["loss_sum"] = real_json(s.loss_sum);
  j["loss_count"] = s.loss_count;
  j["teacher_refreshed"] = s.teacher_refreshed;
  return j;
}

PlSource source_from(std::string_view s) {
  if (s == "seed_model") return PlSource::kSeedModel;
  if (s == "ema_teacher") return PlSource::kEmaTeacher;
  if (s == "cache") return PlSource::kCache;
  throw DataFormatError("unknown pseudo-label source " + std::string(s));
}

RunState run_from(const Json& j) {
  RunState s;
  s.step = j.at("step").get<std::int64_t>();
  s.student = params_from(j.at("student"));
  const Json& a = j.at("adam");
  s.adam.first_moment = params_from(a.at("first_moment"));
  s.adam.second_moment = params_from(a.at("second_moment"));
  s.adam.step_count = a.at("step_count").get<std::uint64_t>();
  s.adam.config.beta1 = a.at("beta1").get<double>();
  s.adam.config.beta2 = a.at("beta2").get<double>();
  s.adam.config.epsilon = a.at("epsilon").get<double>();
  s.adam.config.clip_threshold = a.at("clip_threshold").get<double>();
  if (const Json& e = j.at("ema"); !e.is_null()) {
    EmaState ema;
    ema.master = params_from(e.at("master"));
    ema.update_count = e.at("update_count").get<std::int64_t>();
    ema.config.alpha = e.at("alpha").get<double>();
    ema.config.delta = e.at("delta").get<std::int64_t>();
    ema.config.precision_mode = precision_mode_from_string(e.at("precision_mode").get<std::string>());
    ema.config.start_step = e.at("start_step").get<std::int64_t>();
    s.ema = std::move(ema);
  }
  const Json& c = j.at("cache");
  s.cache.capacity = c.at("capacity").get<std::size_t>();
  for (const Json& e : c.at("entries")) {
    s.cache.entries.push_back(CacheEntry{e.at("utterance").get<std::size_t>(),
                                         PseudoLabel{e.at("id").get<std::string>(), e.at("tokens").get<TokenSequence>(),
                                                     e.at("generated_at_step").get<std::int64_t>(),
                                                     source_from(e.at("source").get<std::string>())}});
  }
  for (const Json& r : j.at("metrics")) s.metrics.push_back(metrics_from(r));
  s.collapse_streak = j.at("collapse_streak").get<int>();
  s.loss_sum = real_from(j.at("loss_sum"));
  s.loss_count = j.at("loss_count").get<std::int64_t>();
  s.teacher_refreshed = j.at("teacher_refreshed").get<bool>();
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Json j;
  j["format"] = "kaizen-checkpoint";
  j["version"] = 1;
  j["kind"] = ck.kind;
  j["config_hash"] = hex64(ck.config_hash);
  j["dims"] = {{"feature_dim", ck.dims.feature_dim},
               {"context", ck.dims.context},
               {"hidden", ck.dims.hidden},
               {"vocab", ck.dims.vocab}};
  j["params"] = params_json(ck.params);
  if (ck.run) j["run"] = run_json(*ck.run);
  // Write-then-rename so an interrupted save never leaves a torn checkpoint.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << j.dump() << '\n';
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  try {
    const Json j = Json::parse(in);
    if (j.at("format") != "kaizen-checkpoint") throw DataFormatError("not a checkpoint");
    if (j.at("version") != 1) throw DataFormatError("unsupported checkpoint version");
    Checkpoint ck;
    ck.kind = j.at("kind").get<std::string>();
    ck.config_hash = std::stoull(j.at("config_hash").get<std::string>(), nullptr, 16);
    const Json& d = j.at("dims");
    ck.dims.feature_dim = d.at("feature_dim").get<std::size_t>();
    ck.dims.context = d.at("context").get<std::size_t>();
    ck.dims.hidden = d.at("hidden").get<std::size_t>();
    ck.dims.vocab = d.at("vocab").get<std::size_t>();
    ck.params = params_from(j.at("params"));
    check_params(ck.dims, ck.params);
    if (j.contains("run")) ck.run = run_from(j.at("run"));
    return ck;
  } catch (const Json::exception& e) {
    throw DataFormatError(path.string() + ": " + e.what());
  } catch (const DataFormatError& e) {
    throw DataFormatError(path.string() + ": " + e.what());
  }
}

// --- metrics CSV ----------------------------------------------------------------------------

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_real_fixed(double v) {
  if (!std::isfinite(v)) return format_real(v);
  char buf[400];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DataFormatError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::string metrics_csv_header() {
  return "step,stage,train_loss,dev_wer,blank_ratio,teacher_student_l2,lr,half_life_steps";
}

std::string metrics_csv_row(const MetricsRecord& r) {
  std::string stage(to_string(r.stage));
  if (r.stage == Stage::kContinuousPl && r.teacher_refreshed) stage += "+refresh";
  return std::to_string(r.step) + "," + stage + "," + format_real(r.train_loss) + "," + format_real(r.dev_wer) + "," +
         format_real(r.blank_ratio) + "," + format_real(r.teacher_student_l2) + "," + format_real(r.lr) + "," +
         format_real(r.half_life_steps);
}

std::vector<MetricsRecord> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != metrics_csv_header()) {
    throw DataFormatError(path.string() + ": missing or unexpected header");
  }
  std::vector<MetricsRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    try {
      if (cells.size() != 8) throw DataFormatError("expected 8 columns");
      MetricsRecord r;
      r.step = static_cast<std::int64_t>(parse_real(cells[0]));
      std::string_view stage = cells[1];
      constexpr std::string_view kRefresh = "+refresh";
      if (stage.ends_with(kRefresh)) {
        r.teacher_refreshed = true;
        stage.remove_suffix(kRefresh.size());
      }
      r.stage = stage_from_string(stage);
      r.train_loss = parse_real(cells[2]);
      r.dev_wer = parse_real(cells[3]);
      r.blank_ratio = parse_real(cells[4]);
      r.teacher_student_l2 = parse_real(cells[5]);
      r.lr = parse_real(cells[6]);
      r.half_life_steps = parse_real(cells[7]);
      out.push_back(r);
    } catch (const Error& e) {
      throw DataFormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kaizen
