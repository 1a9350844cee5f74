// Copyright 2026 The Kaizen Lab Authors
// SPDX-License-Identifier: Apache-2.0

#include "kaizen/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kaizen/errors.hpp"
#include "kaizen/rng.hpp"

namespace kaizen {

void ModelDims::validate() const {
  if (feature_dim == 0) throw ConfigError("model.feature_dim must be positive");
  if (hidden == 0) throw ConfigError("model.hidden must be positive");
  if (vocab == 0) throw ConfigError("model.vocab must be positive");
}

ParameterVector zero_params(const ModelDims& dims) {
  dims.validate();
  return ParameterVector::with_segments({
      {kHiddenWeight, dims.hidden * dims.input_dim()},
      {kHiddenBias, dims.hidden},
      {kOutputWeight, dims.output_dim() * dims.hidden},
      {kOutputBias, dims.output_dim()},
  });
}

ParameterVector init_params(const ModelDims& dims, std::uint64_t seed) {
  ParameterVector p = zero_params(dims);
  Rng rng(derive_seed(seed, {0x1417}));
  const double hidden_scale = std::sqrt(1.0 / static_cast<double>(dims.input_dim()));
  for (double& w : p.segment(kHiddenWeight)) w = rng.uniform(-hidden_scale, hidden_scale);
  const double output_scale = std::sqrt(1.0 / static_cast<double>(dims.hidden));
  for (double& w : p.segment(kOutputWeight)) w = rng.uniform(-output_scale, output_scale);
  return p;
}

void check_params(const ModelDims& dims, const ParameterVector& params) {
  const std::size_t expected[] = {dims.hidden * dims.input_dim(), dims.hidden, dims.output_dim() * dims.hidden,
                                  dims.output_dim()};
  const char* names[] = {kHiddenWeight, kHiddenBias, kOutputWeight, kOutputBias};
  const auto& layout = params.layout();
  bool ok = layout.size() == 4;
  for (std::size_t i = 0; ok && i < 4; ++i) ok = layout[i].name == names[i] && layout[i].length == expected[i];
  if (!ok) throw LayoutError("parameter layout does not match model dims");
}

namespace {

// Stacked input for frame t, zero padded outside [0, T).
void stack_context(const ModelDims& dims, const Matrix& features, std::size_t t, std::span<double> out) {
  const auto c = static_cast<std::ptrdiff_t>(dims.context);
  const auto frames = static_cast<std::ptrdiff_t>(features.rows());
  const std::size_t d = dims.feature_dim;
  std::size_t pos = 0;
  for (std::ptrdiff_t k = -c; k <= c; ++k, pos += d) {
    const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t) + k;
    if (src < 0 || src >= frames) {
      std::fill(out.begin() + static_cast<std::ptrdiff_t>(pos), out.begin() + static_cast<std::ptrdiff_t>(pos + d), 0.0);
    } else {
      auto row = features.row(static_cast<std::size_t>(src));
      std::copy(row.begin(), row.end(), out.begin() + static_cast<std::ptrdiff_t>(pos));
    }
  }
}

void check_features(const ModelDims& dims, const Matrix& features) {
  if (features.cols() != dims.feature_dim && features.rows() > 0) {
    throw LayoutError("feature dimension " + std::to_string(features.cols()) + " does not match model (" +
                      std::to_string(dims.feature_dim) + ")");
  }
}

// hidden = tanh(W1 x + b1) for all frames.
Matrix hidden_layer(const ModelDims& dims, const ParameterVector& params, const Matrix& features) {
  const std::size_t frames = features.rows();
  const std::size_t in_dim = dims.input_dim();
  const auto w1 = params.segment(kHiddenWeight);
  const auto b1 = params.segment(kHiddenBias);
  Matrix hidden(frames, dims.hidden);
  std::vector<double> stacked(in_dim);
  for (std::size_t t = 0; t < frames; ++t) {
    stack_context(dims, features, t, stacked);
    auto h = hidden.row(t);
    for (std::size_t j = 0; j < dims.hidden; ++j) {
      const double* w = w1.data() + j * in_dim;
      double acc = b1[j];
      for (std::size_t i = 0; i < in_dim; ++i) acc += w[i] * stacked[i];
      h[j] = std::tanh(acc);
    }
  }
  return hidden;
}

// logits = W2 h + b2, where h is the (possibly masked) hidden row.
void output_layer(const ModelDims& dims, const ParameterVector& params, const Matrix& hidden,
                  const Matrix* mask, Matrix& logits) {
  const auto w2 = params.segment(kOutputWeight);
  const auto b2 = params.segment(kOutputBias);
  const std::size_t out_dim = dims.output_dim();
  std::vector<double> h(dims.hidden);
  for (std::size_t t = 0; t < hidden.rows(); ++t) {
    auto src = hidden.row(t);
    if (mask != nullptr) {
      auto m = mask->row(t);
      for (std::size_t j = 0; j < dims.hidden; ++j) h[j] = src[j] * m[j];
    } else {
      std::copy(src.begin(), src.end(), h.begin());
    }
    auto out = logits.row(t);
    for (std::size_t k = 0; k < out_dim; ++k) {
      const double* w = w2.data() + k * dims.hidden;
      double acc = b2[k];
      for (std::size_t j = 0; j < dims.hidden; ++j) acc += w[j] * h[j];
      out[k] = acc;
    }
  }
}

}  // namespace

ForwardResult forward(const ModelDims& dims, const ParameterVector& params, const Matrix& features,
                      ForwardMode mode, double dropout_rate, std::uint64_t seed) {
  check_params(dims, params);
  check_features(dims, features);
  params.require_finite("forward");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("dropout_rate must lie in [0, 1)");
  }

  ForwardResult result;
  ForwardTrace& trace = result.trace;
  trace.dims = dims;
  trace.mode = mode;
  trace.params = params;
  trace.features = features;
  trace.hidden = hidden_layer(dims, params, features);

  const bool use_dropout = mode == ForwardMode::kTrain && dropout_rate > 0.0;
  if (use_dropout) {
    trace.dropout_mask = Matrix(features.rows(), dims.hidden);
    Rng rng(derive_seed(seed, {0xd409}));
    const double keep_scale = 1.0 / (1.0 - dropout_rate);
    for (double& m : trace.dropout_mask.values()) m = rng.uniform() < dropout_rate ? 0.0 : keep_scale;
  }
  result.logits = Matrix(features.rows(), dims.output_dim());
  output_layer(dims, params, trace.hidden, use_dropout ? &trace.dropout_mask : nullptr, result.logits);
  return result;
}

Matrix infer_logits(const ModelDims& dims, const ParameterVector& params, const Matrix& features) {
  check_params(dims, params);
  check_features(dims, features);
  params.require_finite("infer_logits");
  const Matrix hidden = hidden_layer(dims, params, features);
  Matrix logits(features.rows(), dims.output_dim());
  output_layer(dims, params, hidden, nullptr, logits);
  return logits;
}

ParameterVector backward(const ForwardTrace& trace, const Matrix& dlogits) {
  ParameterVector grads = ParameterVector::zeros_like(trace.params);
  backward_accumulate(trace, dlogits, grads);
  return grads;
}

void backward_accumulate(const ForwardTrace& trace, const Matrix& dlogits, ParameterVector& grads) {
  const ModelDims& dims = trace.dims;
  if (dlogits.rows() != trace.hidden.rows() || (dlogits.rows() > 0 && dlogits.cols() != dims.output_dim())) {
    throw LayoutError("backward: dlogits shape does not match the forward pass");
  }
  trace.params.require_same_layout(grads, "backward gradients");

  const std::size_t in_dim = dims.input_dim();
  const std::size_t out_dim = dims.output_dim();
  const std::size_t hid = dims.hidden;
  const auto w2 = trace.params.segment(kOutputWeight);
  auto gw1 = grads.segment(kHiddenWeight);
  auto gb1 = grads.segment(kHiddenBias);
  auto gw2 = grads.segment(kOutputWeight);
  auto gb2 = grads.segment(kOutputBias);
  const bool masked = !trace.dropout_mask.empty();

  std::vector<double> h(hid);
  std::vector<double> dh(hid);
  std::vector<double> stacked(in_dim);
  for (std::size_t t = 0; t < trace.hidden.rows(); ++t) {
    auto g = dlogits.row(t);
    auto act = trace.hidden.row(t);
    for (std::size_t j = 0; j < hid; ++j) h[j] = masked ? act[j] * trace.dropout_mask(t, j) : act[j];

    std::fill(dh.begin(), dh.end(), 0.0);
    for (std::size_t k = 0; k < out_dim; ++k) {
      const double gk = g[k];
      if (gk == 0.0) continue;
      gb2[k] += gk;
      double* gw = gw2.data() + k * hid;
      const double* w = w2.data() + k * hid;
      for (std::size_t j = 0; j < hid; ++j) {
        gw[j] += gk * h[j];
        dh[j] += gk * w[j];
      }
    }

    bool any = false;
    for (std::size_t j = 0; j < hid; ++j) {
      const double m = masked ? trace.dropout_mask(t, j) : 1.0;
      dh[j] *= m * (1.0 - act[j] * act[j]);
      any = any || dh[j] != 0.0;
    }
    if (!any) continue;
    stack_context(dims, trace.features, t, stacked);
    for (std::size_t j = 0; j < hid; ++j) {
      const double d = dh[j];
      if (d == 0.0) continue;
      gb1[j] += d;
      double* gw = gw1.data() + j * in_dim;
      for (std::size_t i = 0; i < in_dim; ++i) gw[i] += d * stacked[i];
    }
  }
}

}  // namespace kaizen
