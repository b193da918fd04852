#include "moemo/context.hpp"

#include <algorithm>
#include <cmath>

#include "moemo/errors.hpp"

namespace moemo {

Tensor ContextFeatureMap::as_matrix() const {
  std::vector<double> values(data.begin(), data.end());
  return Tensor({frames, rows * cols}, std::move(values));
}

void validate_context(const ContextFeatureMap& map, std::size_t rows, std::size_t cols) {
  if (map.frames < 1) throw ValidationError("context '" + map.clip_id + "' has no frames");
  if (map.rows != rows || map.cols != cols) {
    throw ValidationError("context '" + map.clip_id + "' has frames of " + std::to_string(map.rows) + "x" +
                          std::to_string(map.cols) + ", expected " + std::to_string(rows) + "x" +
                          std::to_string(cols));
  }
  if (map.data.size() != map.frames * map.rows * map.cols) {
    throw ValidationError("context '" + map.clip_id + "' holds the wrong number of values");
  }
  for (float v : map.data) {
    if (!std::isfinite(v)) throw ValidationError("context '" + map.clip_id + "' has a non-finite value");
  }
}

ContextFeatureMap select_frames(const ContextFeatureMap& map, const std::vector<std::size_t>& indices) {
  ContextFeatureMap out;
  out.clip_id = map.clip_id;
  out.rows = map.rows;
  out.cols = map.cols;
  out.frames = indices.size();
  const std::size_t stride = map.rows * map.cols;
  out.data.resize(out.frames * stride);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= map.frames) throw ValidationError("context frame index out of range");
    std::copy_n(map.data.begin() + static_cast<std::ptrdiff_t>(indices[k] * stride), stride,
                out.data.begin() + static_cast<std::ptrdiff_t>(k * stride));
  }
  return out;
}

double context_weight_scale(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
}

void init_context_parameters(ParameterStore& store, const ContextEmbedConfig& cfg, Rng& rng) {
  const std::size_t in = cfg.rows * cfg.cols;
  // Unit-variance uniform; the Glorot factor is applied in embed_context.
  const double a = std::sqrt(3.0);
  auto unit = [&](Shape shape) {
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-a, a);
    return Tensor(std::move(shape), std::move(v));
  };
  store.add("context.conv1.weight", unit({1, in, cfg.hidden}));
  store.add("context.conv1.bias", Tensor::zeros({cfg.hidden}));
  store.add("context.conv2.weight", unit({1, cfg.hidden, cfg.d_model}));
  store.add("context.conv2.bias", Tensor::zeros({cfg.d_model}));
}

ad::Var embed_context(Scope& scope, const ContextFeatureMap& map, const ContextEmbedConfig& cfg) {
  validate_context(map, cfg.rows, cfg.cols);
  const std::size_t in = cfg.rows * cfg.cols;
  ad::Var x = scope.constant(map.as_matrix());
  ad::Var w1 = ad::scale(scope.param("context.conv1.weight"), context_weight_scale(in, cfg.hidden));
  ad::Var w2 = ad::scale(scope.param("context.conv2.weight"), context_weight_scale(cfg.hidden, cfg.d_model));
  ad::Var h = ad::gelu(ad::conv1d(x, w1, scope.param("context.conv1.bias")));
  return ad::conv1d(h, w2, scope.param("context.conv2.bias"));
}

ContextTokens embed_context(const ContextFeatureMap& map, const ParameterStore& params,
                            const ContextEmbedConfig& cfg) {
  ad::Tape tape;
  Scope scope(tape, params, false);
  return ContextTokens{std::make_shared<const Tensor>(embed_context(scope, map, cfg).value())};
}

ContextTokens align_context(const ContextTokens& tokens, std::size_t motion_frames) {
  if (tokens.frames() != motion_frames) {
    throw ValidationError("context has " + std::to_string(tokens.frames()) + " frames but the clip has " +
                          std::to_string(motion_frames));
  }
  return tokens;
}

std::vector<ContextTokens> broadcast_to_persons(const ContextTokens& tokens, int persons) {
  if (persons < 1) throw ValidationError("broadcast_to_persons needs at least one person");
  return std::vector<ContextTokens>(static_cast<std::size_t>(persons), tokens);
}

}  // namespace moemo
