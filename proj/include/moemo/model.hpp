#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "moemo/autodiff.hpp"
#include "moemo/context.hpp"
#include "moemo/motion.hpp"
#include "moemo/parameters.hpp"

namespace moemo {

enum class Variant {
  full,                // motion queries attend over context keys/values
  no_context,          // self-attention over motion tokens only
  no_cross_attention,  // context concatenated onto motion tokens, then self-attention
};

enum class Aggregation {
  mean_pool,       // mean of final tokens, then the classifier
  frame_log_prob,  // per-token log-probabilities summed over the sequence
};

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);
std::string_view aggregation_name(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

struct ModelConfig {
  std::size_t d_model = 128;
  std::size_t n_blocks = 4;
  std::size_t n_heads = 4;
  double mlp_ratio = 4.0;
  int n_classes = kNumClasses;
  Variant variant = Variant::full;
  /// Longest movement-vector sequence the positional table covers.
  std::size_t max_positions = 15;
  std::size_t context_rows = 50;
  std::size_t context_cols = 768;
  std::size_t context_hidden = 1024;
  Aggregation aggregation = Aggregation::mean_pool;
  double norm_eps = 1e-5;

  /// Throws ConfigError on inconsistent values.
  void validate() const;
  std::size_t head_width() const { return d_model / n_heads; }
  std::size_t mlp_hidden() const;
  ContextEmbedConfig context() const { return {context_rows, context_cols, context_hidden, d_model}; }
  bool uses_context() const { return variant != Variant::no_context; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Per-head view of one attention layer, recorded on request.
struct AttentionInternals {
  Tensor q;  // queries [n_q x d_model], from motion tokens
  Tensor k;  // keys    [n_k x d_model]
  Tensor v;  // values  [n_k x d_model]
  std::vector<Tensor> scores;   // per head, q_h k_h^T / sqrt(head width)
  std::vector<Tensor> weights;  // per head, row-wise softmax of scores
};

struct ForwardTrace {
  std::vector<AttentionInternals> attention;  // one per transformer block
  std::vector<Tensor> shared_residual;        // what the shared block added after each block
  Tensor logits;
};

struct EmotionDistribution {
  std::vector<double> probs;

  /// Most probable class; ties go to the lowest index.
  int argmax() const;
};

/// Cross-attention fusion transformer over movement vectors and context tokens.
class MoEmoNet {
 public:
  explicit MoEmoNet(ModelConfig config);

  const ModelConfig& config() const { return config_; }

  /// Fresh parameters drawn from the "init" substream of `seed`.
  ParameterStore init_parameters(std::uint64_t seed) const;

  /// Flattened 17x6 transitions -> linear projection plus learned positions: [(f-1) x d_model].
  ad::Var motion_tokens(Scope& scope, const MovementVectorSeq& seq) const;

  /// Context embedding block output [f x d_model].
  ad::Var context_tokens(Scope& scope, const ContextFeatureMap& map) const;

  /// Multi-head attention: queries from `queries`, keys and values from `memory`.
  /// Passing the same variable twice gives self-attention.
  ad::Var cross_attention(Scope& scope, const std::string& prefix, ad::Var queries, ad::Var memory,
                          AttentionInternals* internals = nullptr) const;

  /// Pre-norm block x + Attn(LN x), + MLP(LN .), then the weight-shared residual block.
  /// `context` is ignored by the self-attention variants.
  ad::Var transformer_block(Scope& scope, std::size_t index, ad::Var x, std::optional<ad::Var> context,
                            ForwardTrace* trace = nullptr) const;

  /// Class logits [1 x n_classes] from final token states.
  ad::Var classify_logits(Scope& scope, ad::Var tokens) const;

  /// Full network up to the logits [1 x n_classes].
  ad::Var logits(Scope& scope, const MovementVectorSeq& seq, std::optional<ad::Var> context,
                 ForwardTrace* trace = nullptr) const;

  /// Inference on precomputed context tokens (may be null for no_context).
  EmotionDistribution forward(const ParameterStore& params, const MovementVectorSeq& seq,
                              const ContextTokens* context, ForwardTrace* trace = nullptr) const;

  /// Mean-pool, linear map, softmax over plain token states.
  EmotionDistribution classify(const ParameterStore& params, const Tensor& tokens) const;

 private:
  ad::Var linear(Scope& scope, const std::string& prefix, ad::Var x) const;
  ad::Var norm(Scope& scope, const std::string& prefix, ad::Var x) const;
  ad::Var mlp(Scope& scope, const std::string& prefix, ad::Var x) const;

  ModelConfig config_;
};

}  // namespace moemo
