// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace kaizen {

/// Dense row-major matrix of 64-bit reals.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// One named, contiguous slice of a ParameterVector.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  bool operator==(const Segment&) const = default;
};

/// Flat vector of trainable weights plus the named segment table that
/// describes its structure. Segments are disjoint, ordered by offset, and
/// cover the vector exactly.
class ParameterVector {
 public:
  ParameterVector() = default;

  /// Zero-filled vector with segments laid out back to back in the given
  /// order.
  static ParameterVector with_segments(const std::vector<std::pair<std::string, std::size_t>>& sizes);

  /// Zero-filled vector with the same layout as `other`.
  static ParameterVector zeros_like(const ParameterVector& other);

  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment_info(std::string_view name) const;
  std::span<double> segment(std::string_view name);
  std::span<const double> segment(std::string_view name) const;

  bool same_layout(const ParameterVector& other) const { return layout_ == other.layout_; }
  /// Throws LayoutError naming `context` when layouts differ.
  void require_same_layout(const ParameterVector& other, std::string_view context) const;

  /// Name of the first segment holding a NaN or infinity, if any.
  std::optional<std::string> first_nonfinite_segment() const;
  /// Throws NumericError naming the offending segment.
  void require_finite(std::string_view context) const;

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> values_;
  std::vector<Segment> layout_;
};

/// Euclidean distance between two same-layout vectors.
double l2_distance(const ParameterVector& a, const ParameterVector& b);
double l2_norm(std::span<const double> v);

// --- binary16 emulation -----------------------------------------------------

inline constexpr double kBinary16Max = 65504.0;

/// Rounds `x` to the nearest IEEE 754 binary16 value (ties to even),
/// including the subnormal range, and returns it widened to double.
/// Throws NumericError when the rounded magnitude exceeds kBinary16Max, and
/// when `x` is not finite.
double quantize_binary16(double x);

/// Element-wise quantize_binary16.
ParameterVector quantize_binary16(const ParameterVector& p);

// --- Adam -------------------------------------------------------------------

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clipping threshold; <= 0 disables clipping.
  double clip_threshold = 10.0;
};

struct AdamState {
  ParameterVector first_moment;
  ParameterVector second_moment;
  std::uint64_t step_count = 0;
  AdamConfig config;

  static AdamState for_params(const ParameterVector& params, AdamConfig config = {});
};

struct AdamResult {
  ParameterVector params;
  AdamState state;
  /// Gradient norm before clipping.
  double grad_norm = 0.0;
};

/// Scales `grads` in place so that its global L2 norm is at most
/// `threshold`. Returns the norm before clipping.
double clip_global_norm(std::span<double> grads, double threshold);

/// One bias-corrected Adam update. Gradients are clipped to the configured
/// global norm before the moment updates.
AdamResult adam_step(ParameterVector params, ParameterVector grads, AdamState state, double lr);

// --- learning-rate schedules -----------------------------------------------

enum class ScheduleShape { kLinearWarmupLinearDecay, kLinearWarmupConstant };

struct LrSchedule {
  std::int64_t warmup_steps = 0;
  double peak_lr = 1e-3;
  std::int64_t total_steps = 0;
  ScheduleShape shape = ScheduleShape::kLinearWarmupLinearDecay;
};

/// Piecewise-linear learning rate; steps past total_steps keep the
/// terminal value.
double lr_at(const LrSchedule& schedule, std::int64_t step);

std::string_view to_string(ScheduleShape shape);
ScheduleShape schedule_shape_from_string(std::string_view name);

}  // namespace kaizen
