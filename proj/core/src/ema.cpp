// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/ema.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "kaizen/errors.hpp"

namespace kaizen {

std::string_view to_string(PrecisionMode mode) {
  switch (mode) {
    case PrecisionMode::kMaster64:
      return "master64";
    case PrecisionMode::kEmulated16:
      return "emulated16";
  }
  return "unknown";
}

PrecisionMode precision_mode_from_string(std::string_view name) {
  if (name == "master64") return PrecisionMode::kMaster64;
  if (name == "emulated16") return PrecisionMode::kEmulated16;
  throw ConfigError("unknown precision mode: " + std::string(name));
}

void EmaConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("ema.alpha must lie in [0, 1]");
  if (delta < 1) throw ConfigError("ema.delta must be >= 1");
  if (start_step < 0) throw ConfigError("ema.start_step must be >= 0");
}

EmaState ema_init(const ParameterVector& student, const EmaConfig& config) {
  config.validate();
  student.require_finite("ema_init");
  return EmaState{student, 0, config};
}

bool ema_update_due(const EmaConfig& config, std::int64_t step) {
  return step >= config.start_step && (step - config.start_step) % config.delta == 0;
}

namespace {

void check_update_args(const EmaState& state, const ParameterVector& student, std::int64_t step) {
  state.master.require_same_layout(student, "ema_update");
  if (auto bad = student.first_nonfinite_segment()) {
    throw NumericError("ema_update: non-finite student value in segment " + *bad);
  }
  if (step < state.config.start_step) {
    throw ConfigError("ema_update: step " + std::to_string(step) + " precedes start_step " +
                      std::to_string(state.config.start_step));
  }
}

void accumulate(ParameterVector& master, const ParameterVector& student, double alpha) {
  auto m = master.values();
  auto s = student.values();
  if (alpha == 1.0) {
    // Exact limit: the teacher becomes a bitwise copy of the student.
    std::copy(s.begin(), s.end(), m.begin());
    return;
  }
  if (alpha == 0.0) return;
  const double keep = 1.0 - alpha;
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = keep * m[i] + alpha * s[i];
}

}  // namespace

EmaState ema_update(EmaState state, const ParameterVector& student, std::int64_t step) {
  check_update_args(state, student, step);
  if (!ema_update_due(state.config, step)) return state;
  accumulate(state.master, student, state.config.alpha);
  state.update_count += 1;
  return state;
}

EmaState ema_update_lowprecision(EmaState state, const ParameterVector& student, std::int64_t step) {
  check_update_args(state, student, step);
  if (!ema_update_due(state.config, step)) return state;
  accumulate(state.master, student, state.config.alpha);
  for (double& v : state.master.values()) v = quantize_binary16(v);
  state.update_count += 1;
  return state;
}

ParameterVector teacher_snapshot(const EmaState& state) {
  if (state.config.precision_mode == PrecisionMode::kEmulated16) {
    return quantize_binary16(state.master);
  }
  return state.master;
}

double half_life(double alpha, std::int64_t delta) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ConfigError("half_life: undefined for alpha outside (0, 1)");
  }
  if (delta < 1) throw ConfigError("half_life: delta must be >= 1");
  return -static_cast<double>(delta) * std::numbers::ln2 / std::log1p(-alpha);
}

UnrolledWeights unrolled_weights(double alpha, std::int64_t n) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("unrolled_weights: alpha must lie in [0, 1]");
  if (n < 0) throw ConfigError("unrolled_weights: n must be >= 0");
  UnrolledWeights out;
  out.weights.reserve(static_cast<std::size_t>(n));
  double carry = 1.0;  // (1 - alpha)^i
  for (std::int64_t i = 0; i < n; ++i) {
    out.weights.push_back(alpha * carry);
    carry *= 1.0 - alpha;
  }
  out.residual = carry;
  return out;
}

}  // namespace kaizen
