#include "moemo/model.hpp"

#include <cmath>

#include "moemo/errors.hpp"

namespace moemo {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_context: return "no_context";
    case Variant::no_cross_attention: return "no_cross_attention";
  }
  return "full";
}

Variant parse_variant(std::string_view name) {
  if (name == "full") return Variant::full;
  if (name == "no_context") return Variant::no_context;
  if (name == "no_cross_attention") return Variant::no_cross_attention;
  throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

std::string_view aggregation_name(Aggregation a) {
  return a == Aggregation::mean_pool ? "mean_pool" : "frame_log_prob";
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean_pool") return Aggregation::mean_pool;
  if (name == "frame_log_prob") return Aggregation::frame_log_prob;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
    throw ConfigError("d_model must be a positive multiple of n_heads");
  }
  if (n_blocks < 1) throw ConfigError("n_blocks must be at least 1");
  if (!(mlp_ratio > 0.0)) throw ConfigError("mlp_ratio must be positive");
  if (n_classes < 2) throw ConfigError("n_classes must be at least 2");
  if (max_positions < 1) throw ConfigError("max_positions must be at least 1");
  if (context_rows == 0 || context_cols == 0 || context_hidden == 0) {
    throw ConfigError("context dimensions must be positive");
  }
  if (!(norm_eps > 0.0)) throw ConfigError("norm_eps must be positive");
}

std::size_t ModelConfig::mlp_hidden() const {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(d_model))));
}

int EmotionDistribution::argmax() const {
  int best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  return best;
}

MoEmoNet::MoEmoNet(ModelConfig config) : config_(std::move(config)) { config_.validate(); }

ParameterStore MoEmoNet::init_parameters(std::uint64_t seed) const {
  Rng rng(seed, "init");
  ParameterStore store;
  const std::size_t d = config_.d_model;
  const std::size_t h = config_.mlp_hidden();
  const auto classes = static_cast<std::size_t>(config_.n_classes);

  auto add_linear = [&](const std::string& prefix, std::size_t in, std::size_t out) {
    store.add(prefix + ".weight", glorot_uniform(rng, {in, out}, in, out));
    store.add(prefix + ".bias", Tensor::zeros({out}));
  };
  auto add_norm = [&](const std::string& prefix) {
    store.add(prefix + ".gain", Tensor::filled({d}, 1.0));
    store.add(prefix + ".bias", Tensor::zeros({d}));
  };

  add_linear("motion.proj", kMotionFeatures, d);
  store.add("motion.pos", glorot_uniform(rng, {config_.max_positions, d}, config_.max_positions, d));
  if (config_.uses_context()) init_context_parameters(store, config_.context(), rng);
  if (config_.variant == Variant::no_cross_attention) add_linear("fuse", 2 * d, d);

  for (std::size_t b = 0; b < config_.n_blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    add_norm(p + ".norm1");
    for (const char* name : {"query", "key", "value", "out"}) add_linear(p + ".attn." + name, d, d);
    add_norm(p + ".norm2");
    add_linear(p + ".mlp.fc1", d, h);
    add_linear(p + ".mlp.fc2", h, d);
  }
  add_norm("shared.norm");
  add_linear("shared.fc1", d, h);
  add_linear("shared.fc2", h, d);

  add_norm("final_norm");
  // Zero classifier: an untrained model predicts the uniform distribution.
  store.add("head.weight", Tensor::zeros({d, classes}));
  store.add("head.bias", Tensor::zeros({classes}));
  return store;
}

ad::Var MoEmoNet::linear(Scope& scope, const std::string& prefix, ad::Var x) const {
  return ad::add_bias(ad::matmul(x, scope.param(prefix + ".weight")), scope.param(prefix + ".bias"));
}

ad::Var MoEmoNet::norm(Scope& scope, const std::string& prefix, ad::Var x) const {
  return ad::layer_norm(x, scope.param(prefix + ".gain"), scope.param(prefix + ".bias"), config_.norm_eps);
}

ad::Var MoEmoNet::mlp(Scope& scope, const std::string& prefix, ad::Var x) const {
  return linear(scope, prefix + ".fc2", ad::gelu(linear(scope, prefix + ".fc1", x)));
}

ad::Var MoEmoNet::motion_tokens(Scope& scope, const MovementVectorSeq& seq) const {
  if (seq.transitions == 0 || seq.vectors.size() != seq.transitions * kMotionFeatures) {
    throw ShapeError("movement vectors must have shape (f-1, 17, 6), got " + shape_string(seq.shape()));
  }
  if (seq.transitions > config_.max_positions) {
    throw ShapeError(std::to_string(seq.transitions) + " transitions exceed max_positions " +
                     std::to_string(config_.max_positions));
  }
  ad::Var x = linear(scope, "motion.proj", scope.constant(seq.as_tokens()));
  ad::Var pos = ad::narrow(scope.param("motion.pos"), 0, 0, seq.transitions);
  return ad::add(x, pos);
}

ad::Var MoEmoNet::context_tokens(Scope& scope, const ContextFeatureMap& map) const {
  if (!config_.uses_context()) throw ValidationError("the no_context variant has no context embedding");
  return embed_context(scope, map, config_.context());
}

ad::Var MoEmoNet::cross_attention(Scope& scope, const std::string& prefix, ad::Var queries, ad::Var memory,
                                  AttentionInternals* internals) const {
  const std::size_t d = config_.d_model;
  if (queries.value().rank() != 2 || memory.value().rank() != 2 || queries.value().dim(1) != d ||
      memory.value().dim(1) != d) {
    throw ShapeError("attention inputs must be [n x " + std::to_string(d) + "], got " +
                     shape_string(queries.shape()) + " and " + shape_string(memory.shape()));
  }
  ad::Var q = linear(scope, prefix + ".query", queries);
  ad::Var k = linear(scope, prefix + ".key", memory);
  ad::Var v = linear(scope, prefix + ".value", memory);
  if (internals) {
    internals->q = q.value();
    internals->k = k.value();
    internals->v = v.value();
  }
  const std::size_t hw = config_.head_width();
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(hw));
  std::vector<ad::Var> heads;
  heads.reserve(config_.n_heads);
  for (std::size_t h = 0; h < config_.n_heads; ++h) {
    ad::Var qh = ad::narrow(q, 1, h * hw, hw);
    ad::Var kh = ad::narrow(k, 1, h * hw, hw);
    ad::Var vh = ad::narrow(v, 1, h * hw, hw);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt_n);
    ad::Var weights = ad::softmax(scores, 1);
    if (internals) {
      internals->scores.push_back(scores.value());
      internals->weights.push_back(weights.value());
    }
    heads.push_back(ad::matmul(weights, vh));
  }
  ad::Var merged = heads.size() == 1 ? heads.front() : ad::concat(heads, 1);
  return linear(scope, prefix + ".out", merged);
}

ad::Var MoEmoNet::transformer_block(Scope& scope, std::size_t index, ad::Var x, std::optional<ad::Var> context,
                                    ForwardTrace* trace) const {
  if (index >= config_.n_blocks) throw ShapeError("block index out of range");
  const std::string p = "block" + std::to_string(index);
  AttentionInternals internals;
  ad::Var normed = norm(scope, p + ".norm1", x);
  ad::Var attended;
  if (config_.variant == Variant::full) {
    if (!context) throw ValidationError("the full variant needs context tokens");
    attended = cross_attention(scope, p + ".attn", normed, *context, trace ? &internals : nullptr);
  } else {
    attended = cross_attention(scope, p + ".attn", normed, normed, trace ? &internals : nullptr);
  }
  ad::Var h = ad::add(x, attended);
  h = ad::add(h, mlp(scope, p + ".mlp", norm(scope, p + ".norm2", h)));
  ad::Var shared = mlp(scope, "shared", norm(scope, "shared.norm", h));
  if (trace) {
    trace->attention.push_back(std::move(internals));
    trace->shared_residual.push_back(shared.value());
  }
  return ad::add(h, shared);
}

ad::Var MoEmoNet::classify_logits(Scope& scope, ad::Var tokens) const {
  if (tokens.value().rank() != 2 || tokens.value().dim(1) != config_.d_model) {
    throw ShapeError("classifier expects [n x d_model] tokens, got " + shape_string(tokens.shape()));
  }
  const std::size_t n = tokens.value().dim(0);
  if (config_.aggregation == Aggregation::mean_pool) {
    ad::Var pooled = ad::reshape(ad::mean(tokens, 0), {1, config_.d_model});
    return linear(scope, "head", pooled);
  }
  ad::Var per_frame = ad::log_softmax(linear(scope, "head", tokens), 1);
  ad::Var total = ad::scale(ad::mean(per_frame, 0), static_cast<double>(n));
  return ad::reshape(total, {1, static_cast<std::size_t>(config_.n_classes)});
}

ad::Var MoEmoNet::logits(Scope& scope, const MovementVectorSeq& seq, std::optional<ad::Var> context,
                         ForwardTrace* trace) const {
  ad::Var x = motion_tokens(scope, seq);
  if (config_.uses_context()) {
    if (!context) throw ValidationError(std::string(variant_name(config_.variant)) + " variant needs context");
    const Tensor& c = context->value();
    if (c.rank() != 2 || c.dim(1) != config_.d_model) {
      throw ShapeError("context tokens must be [f x d_model], got " + shape_string(c.shape()));
    }
    if (c.dim(0) != seq.transitions + 1) {
      throw ValidationError("context has " + std::to_string(c.dim(0)) + " frames but the clip has " +
                            std::to_string(seq.transitions + 1));
    }
  }
  std::optional<ad::Var> memory;
  if (config_.variant == Variant::full) {
    memory = context;
  } else if (config_.variant == Variant::no_cross_attention) {
    // Each transition is paired with the context token of its start frame.
    ad::Var starts = ad::narrow(*context, 0, 0, seq.transitions);
    const ad::Var parts[] = {x, starts};
    x = linear(scope, "fuse", ad::concat(parts, 1));
  }
  for (std::size_t b = 0; b < config_.n_blocks; ++b) x = transformer_block(scope, b, x, memory, trace);
  x = norm(scope, "final_norm", x);
  ad::Var out = classify_logits(scope, x);
  if (trace) trace->logits = out.value();
  return out;
}

EmotionDistribution MoEmoNet::forward(const ParameterStore& params, const MovementVectorSeq& seq,
                                      const ContextTokens* context, ForwardTrace* trace) const {
  ad::Tape tape;
  Scope scope(tape, params, false);
  std::optional<ad::Var> ctx;
  if (config_.uses_context()) {
    if (context == nullptr || !context->tokens) {
      throw ValidationError(std::string(variant_name(config_.variant)) + " variant needs context tokens");
    }
    ctx = scope.constant(*align_context(*context, seq.transitions + 1).tokens);
  }
  ad::Var out = logits(scope, seq, ctx, trace);
  ad::Var probs = ad::softmax(out, 1);
  return EmotionDistribution{std::vector<double>(probs.value().data().begin(), probs.value().data().end())};
}

EmotionDistribution MoEmoNet::classify(const ParameterStore& params, const Tensor& tokens) const {
  if (tokens.rank() != 2 || tokens.dim(0) == 0) throw ShapeError("classify needs at least one token");
  ad::Tape tape;
  Scope scope(tape, params, false);
  ad::Var probs = ad::softmax(classify_logits(scope, scope.constant(tokens)), 1);
  return EmotionDistribution{std::vector<double>(probs.value().data().begin(), probs.value().data().end())};
}

}  // namespace moemo
