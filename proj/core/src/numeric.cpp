// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/numeric.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "kaizen/errors.hpp"
#include "kaizen/rng.hpp"

namespace kaizen {

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

ParameterVector ParameterVector::with_segments(
    const std::vector<std::pair<std::string, std::size_t>>& sizes) {
  ParameterVector p;
  std::size_t offset = 0;
  for (const auto& [name, length] : sizes) {
    for (const Segment& s : p.layout_) {
      if (s.name == name) throw LayoutError("duplicate segment name: " + name);
    }
    p.layout_.push_back(Segment{name, offset, length});
    offset += length;
  }
  p.values_.assign(offset, 0.0);
  return p;
}

ParameterVector ParameterVector::zeros_like(const ParameterVector& other) {
  ParameterVector p;
  p.layout_ = other.layout_;
  p.values_.assign(other.values_.size(), 0.0);
  return p;
}

const Segment& ParameterVector::segment_info(std::string_view name) const {
  for (const Segment& s : layout_) {
    if (s.name == name) return s;
  }
  throw LayoutError("no segment named " + std::string(name));
}

std::span<double> ParameterVector::segment(std::string_view name) {
  const Segment& s = segment_info(name);
  return std::span<double>(values_).subspan(s.offset, s.length);
}

std::span<const double> ParameterVector::segment(std::string_view name) const {
  const Segment& s = segment_info(name);
  return std::span<const double>(values_).subspan(s.offset, s.length);
}

void ParameterVector::require_same_layout(const ParameterVector& other, std::string_view context) const {
  if (!same_layout(other) || values_.size() != other.values_.size()) {
    throw LayoutError(std::string(context) + ": parameter layouts differ");
  }
}

std::optional<std::string> ParameterVector::first_nonfinite_segment() const {
  for (const Segment& s : layout_) {
    for (std::size_t i = s.offset; i < s.offset + s.length; ++i) {
      if (!std::isfinite(values_[i])) return s.name;
    }
  }
  return std::nullopt;
}

void ParameterVector::require_finite(std::string_view context) const {
  if (auto bad = first_nonfinite_segment()) {
    throw NumericError(std::string(context) + ": non-finite value in segment " + *bad);
  }
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double l2_distance(const ParameterVector& a, const ParameterVector& b) {
  a.require_same_layout(b, "l2_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double quantize_binary16(double x) {
  if (!std::isfinite(x)) throw NumericError("quantize_binary16: non-finite input");
  if (x == 0.0) return x;
  const double mag = std::fabs(x);
  int exp2 = 0;
  std::frexp(mag, &exp2);
  // mag lies in [2^e, 2^(e+1)); below 2^-14 the spacing is the subnormal
  // step 2^-24.
  const int e = std::max(exp2 - 1, -14);
  const double ulp = std::ldexp(1.0, e - 10);
  const double rounded = std::nearbyint(mag / ulp) * ulp;
  if (rounded > kBinary16Max) {
    throw NumericError("quantize_binary16: overflow for value " + std::to_string(x));
  }
  return std::copysign(rounded, x);
}

ParameterVector quantize_binary16(const ParameterVector& p) {
  ParameterVector q = p;
  for (double& v : q.values()) v = quantize_binary16(v);
  return q;
}

AdamState AdamState::for_params(const ParameterVector& params, AdamConfig config) {
  return AdamState{ParameterVector::zeros_like(params), ParameterVector::zeros_like(params), 0, config};
}

double clip_global_norm(std::span<double> grads, double threshold) {
  const double norm = l2_norm(grads);
  if (threshold > 0.0 && norm > threshold) {
    const double scale = threshold / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

AdamResult adam_step(ParameterVector params, ParameterVector grads, AdamState state, double lr) {
  params.require_same_layout(grads, "adam_step gradients");
  params.require_same_layout(state.first_moment, "adam_step first moment");
  params.require_same_layout(state.second_moment, "adam_step second moment");
  if (!(lr >= 0.0)) throw ConfigError("adam_step: learning rate must be >= 0");
  if (auto bad = grads.first_nonfinite_segment()) {
    throw NumericError("adam_step: non-finite gradient in segment " + *bad);
  }

  const AdamConfig& cfg = state.config;
  const double grad_norm = clip_global_norm(grads.values(), cfg.clip_threshold);

  state.step_count += 1;
  const auto t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);

  auto m = state.first_moment.values();
  auto v = state.second_moment.values();
  auto g = grads.values();
  auto w = params.values();
  for (std::size_t i = 0; i < w.size(); ++i) {
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
  }
  if (lr > 0.0) {
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
  params.require_finite("adam_step");
  return AdamResult{std::move(params), std::move(state), grad_norm};
}

double lr_at(const LrSchedule& schedule, std::int64_t step) {
  if (step < 0) throw ConfigError("lr_at: negative step");
  const double peak = schedule.peak_lr;
  if (step < schedule.warmup_steps) {
    return peak * static_cast<double>(step) / static_cast<double>(schedule.warmup_steps);
  }
  if (schedule.shape == ScheduleShape::kLinearWarmupConstant) return peak;
  if (step >= schedule.total_steps) return 0.0;
  return peak * static_cast<double>(schedule.total_steps - step) /
         static_cast<double>(schedule.total_steps - schedule.warmup_steps);
}

std::string_view to_string(ScheduleShape shape) {
  switch (shape) {
    case ScheduleShape::kLinearWarmupLinearDecay:
      return "linear_warmup_linear_decay";
    case ScheduleShape::kLinearWarmupConstant:
      return "linear_warmup_constant";
  }
  return "unknown";
}

ScheduleShape schedule_shape_from_string(std::string_view name) {
  if (name == "linear_warmup_linear_decay") return ScheduleShape::kLinearWarmupLinearDecay;
  if (name == "linear_warmup_constant") return ScheduleShape::kLinearWarmupConstant;
  throw ConfigError("unknown schedule shape: " + std::string(name));
}

}  // namespace kaizen
