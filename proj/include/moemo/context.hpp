#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "moemo/autodiff.hpp"
#include "moemo/parameters.hpp"
#include "moemo/tensor.hpp"

namespace moemo {

/// Per-frame image-encoder output: frames x rows x cols (patch tokens x channels),
/// stored in single precision as on disk.
struct ContextFeatureMap {
  std::string clip_id;
  std::size_t frames = 0;
  std::size_t rows = 50;
  std::size_t cols = 768;
  std::vector<float> data;

  /// frames x (rows * cols): the patch tokens of each frame concatenated into one row.
  Tensor as_matrix() const;
  friend bool operator==(const ContextFeatureMap&, const ContextFeatureMap&) = default;
};

struct ContextEmbedConfig {
  std::size_t rows = 50;
  std::size_t cols = 768;
  std::size_t hidden = 1024;
  std::size_t d_model = 128;
};

/// Throws ValidationError unless the map has at least one frame, the expected
/// patch/channel dims and only finite values.
void validate_context(const ContextFeatureMap& map, std::size_t rows, std::size_t cols);

/// Keeps the listed frames, in order.
ContextFeatureMap select_frames(const ContextFeatureMap& map, const std::vector<std::size_t>& indices);

/// One d_model token per frame. Copies alias the same immutable buffer.
struct ContextTokens {
  std::shared_ptr<const Tensor> tokens;

  std::size_t frames() const { return tokens ? tokens->dim(0) : 0; }
  std::size_t width() const { return tokens ? tokens->dim(1) : 0; }
};

/// Runtime factor sqrt(2 / (fan_in + fan_out)) applied to each stored context weight.
/// Weights are stored at unit variance, so the effective initialization is Glorot
/// while an adaptive-moment step moves a 38400-wide layer's outputs by O(lr * sqrt(fan_in))
/// rather than O(lr * fan_in).
double context_weight_scale(std::size_t fan_in, std::size_t fan_out);

/// Adds "context.conv1.*" and "context.conv2.*" to the store.
void init_context_parameters(ParameterStore& store, const ContextEmbedConfig& cfg, Rng& rng);

/// Context embedding block on a tape: concatenated patch tokens pass through
/// conv(kernel 1) -> GELU -> conv(kernel 1), giving frames x d_model. Effective
/// weights are the stored ones times context_weight_scale.
ad::Var embed_context(Scope& scope, const ContextFeatureMap& map, const ContextEmbedConfig& cfg);

/// Inference-only evaluation of the embedding block.
ContextTokens embed_context(const ContextFeatureMap& map, const ParameterStore& params,
                            const ContextEmbedConfig& cfg);

/// Returns the tokens unchanged when they cover all `motion_frames` frames:
/// every movement vector attends over the whole context sequence.
ContextTokens align_context(const ContextTokens& tokens, std::size_t motion_frames);

/// p views of the same token buffer; nothing is recomputed per person.
std::vector<ContextTokens> broadcast_to_persons(const ContextTokens& tokens, int persons);

}  // namespace moemo
