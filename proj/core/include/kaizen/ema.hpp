// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "kaizen/numeric.hpp"

namespace kaizen {

/// How the teacher is represented for its forward pass. The EMA master is
/// always accumulated in 64-bit; kEmulated16 only quantizes the snapshot.
enum class PrecisionMode { kMaster64, kEmulated16 };

std::string_view to_string(PrecisionMode mode);
PrecisionMode precision_mode_from_string(std::string_view name);

struct EmaConfig {
  /// Discount factor: weight given to the newest student parameters.
  double alpha = 0.0025;
  /// Update period in optimizer steps.
  std::int64_t delta = 10;
  PrecisionMode precision_mode = PrecisionMode::kMaster64;
  /// Step at which the teacher is initialized from the student.
  std::int64_t start_step = 0;

  /// 1 - alpha.
  double decay() const { return 1.0 - alpha; }
  /// Throws ConfigError unless 0 <= alpha <= 1 and delta >= 1.
  void validate() const;
};

struct EmaState {
  ParameterVector master;
  std::int64_t update_count = 0;
  EmaConfig config;
};

/// Teacher initialized as a copy of the student.
EmaState ema_init(const ParameterVector& student, const EmaConfig& config);

/// True when an EMA update is scheduled for `step`.
bool ema_update_due(const EmaConfig& config, std::int64_t step);

/// master <- (1 - alpha) * master + alpha * student on steps where
/// (step - start_step) is a multiple of delta; otherwise a no-op.
/// Accumulation is always 64-bit, whatever the precision mode.
EmaState ema_update(EmaState state, const ParameterVector& student, std::int64_t step);

/// Same as ema_update but rounds the master to binary16 after every
/// update, i.e. accumulates at half precision. Only meant for the
/// precision ablation: small updates vanish below the binary16 spacing.
EmaState ema_update_lowprecision(EmaState state, const ParameterVector& student, std::int64_t step);

/// Parameters used for the teacher forward pass: the master itself, or its
/// binary16 rounding in kEmulated16 mode. The master is never modified.
ParameterVector teacher_snapshot(const EmaState& state);

/// tau = -delta * ln 2 / ln(1 - alpha), in optimizer steps. Throws
/// ConfigError for alpha outside (0, 1), where the half-life is undefined.
double half_life(double alpha, std::int64_t delta);

struct UnrolledWeights {
  /// weights[i] multiplies the student from the i-th most recent update.
  std::vector<double> weights;
  /// Weight left on the initial teacher.
  double residual = 1.0;
};

/// Expansion of n EMA updates into per-student weights alpha (1-alpha)^i
/// plus the residual (1-alpha)^n on the initial teacher.
UnrolledWeights unrolled_weights(double alpha, std::int64_t n);

}  // namespace kaizen
