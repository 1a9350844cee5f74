// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>

#include "kaizen/numeric.hpp"

namespace kaizen {

/// Frame-level acoustic model shape. Output index 0 is the CTC blank, so
/// the output layer has vocab + 1 units.
struct ModelDims {
  std::size_t feature_dim = 16;
  /// Frames of left and right context stacked at each position.
  std::size_t context = 2;
  std::size_t hidden = 32;
  std::size_t vocab = 8;

  std::size_t input_dim() const { return (2 * context + 1) * feature_dim; }
  std::size_t output_dim() const { return vocab + 1; }
  void validate() const;

  bool operator==(const ModelDims&) const = default;
};

inline constexpr const char* kHiddenWeight = "hidden.weight";
inline constexpr const char* kHiddenBias = "hidden.bias";
inline constexpr const char* kOutputWeight = "output.weight";
inline constexpr const char* kOutputBias = "output.bias";

enum class ForwardMode { kTrain, kEval };

/// Zero-filled parameters with the layout the model expects.
ParameterVector zero_params(const ModelDims& dims);

/// Weights ~ U(-sqrt(1/fan_in), sqrt(1/fan_in)); biases zero.
ParameterVector init_params(const ModelDims& dims, std::uint64_t seed);

/// Throws LayoutError unless `params` has exactly the layout of `dims`.
void check_params(const ModelDims& dims, const ParameterVector& params);

/// Activations cached by forward() for the matching backward() call.
struct ForwardTrace {
  ModelDims dims;
  ForwardMode mode = ForwardMode::kEval;
  ParameterVector params;
  Matrix features;
  /// tanh outputs before dropout, T x H.
  Matrix hidden;
  /// Per-unit dropout multipliers (0 or 1/(1-p)); empty in eval mode or
  /// when the rate is zero.
  Matrix dropout_mask;
};

struct ForwardResult {
  Matrix logits;
  ForwardTrace trace;
};

/// Per frame t: stack frames t-c..t+c (zero padded at the edges), affine to
/// H units, tanh, inverted dropout (train mode only), affine to V+1 logits.
/// Eval mode never draws random numbers.
ForwardResult forward(const ModelDims& dims, const ParameterVector& params, const Matrix& features,
                      ForwardMode mode, double dropout_rate, std::uint64_t seed);

/// Eval-mode logits without keeping a trace.
Matrix infer_logits(const ModelDims& dims, const ParameterVector& params, const Matrix& features);

/// Gradient of sum(logits .* dlogits) with respect to the parameters.
ParameterVector backward(const ForwardTrace& trace, const Matrix& dlogits);

/// Same as backward() but adds into `grads` instead of allocating.
void backward_accumulate(const ForwardTrace& trace, const Matrix& dlogits, ParameterVector& grads);

}  // namespace kaizen
