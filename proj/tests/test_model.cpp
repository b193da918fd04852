#include <doctest.h>

#include <cmath>
#include <numeric>

#include "model_fixtures.hpp"
#include "moemo/context.hpp"
#include "moemo/errors.hpp"
#include "moemo/model.hpp"
#include "moemo/train.hpp"

using namespace moemo;
using namespace moemo::test;

namespace {

/// Worst per-parameter relative error of loss_and_gradients against central differences.
double model_gradcheck(const MoEmoNet& model, const ParameterStore& params, const Dataset& data,
                       std::string* worst_name = nullptr) {
  std::vector<const Example*> batch;
  for (const auto& ex : data) batch.push_back(&ex);
  ParameterStore analytic = params;
  loss_and_gradients(model, analytic, batch);

  const double h = 1e-6;
  double worst = 0.0;
  for (const auto& p : params) {
    std::vector<double> numeric(p.value.size());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      double f[2];
      for (int s = 0; s < 2; ++s) {
        ParameterStore probe = params;
        std::vector<double> v(p.value.data().begin(), p.value.data().end());
        v[i] += s == 0 ? h : -h;
        probe.at(p.name).value = Tensor(p.value.shape(), std::move(v));
        f[s] = loss_and_gradients(model, probe, batch);
      }
      numeric[i] = (f[0] - f[1]) / (2 * h);
    }
    const double err = relative_error(analytic.at(p.name).gradient->data(), numeric);
    if (err > worst) {
      worst = err;
      if (worst_name) *worst_name = p.name;
    }
  }
  return worst;
}

ParameterStore identity_attention(std::size_t d) {
  ParameterStore s;
  std::vector<double> eye(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) eye[i * d + i] = 1.0;
  for (const char* name : {"query", "key", "value", "out"}) {
    s.add(std::string("attn.") + name + ".weight", Tensor({d, d}, eye));
    s.add(std::string("attn.") + name + ".bias", Tensor::zeros({d}));
  }
  return s;
}

ModelConfig single_head(std::size_t d) {
  ModelConfig c = tiny_config();
  c.d_model = d;
  c.n_heads = 1;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  ModelConfig c;
  CHECK_NOTHROW(c.validate());
  c.n_heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = ModelConfig{};
  c.n_blocks = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("worked cross-attention example") {
  const MoEmoNet model(single_head(2));
  const ParameterStore params = identity_attention(2);
  ad::Tape tape;
  Scope scope(tape, params, false);
  auto q = scope.constant(Tensor::matrix({{1, 0}}));
  auto kv = scope.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  AttentionInternals in;
  const Tensor out = model.cross_attention(scope, "attn", q, kv, &in).value();
  const double e = std::exp(1.0 / std::sqrt(2.0));
  const double a0 = e / (e + 1.0), a1 = 1.0 / (e + 1.0);
  CHECK(std::abs(a0 - 0.6698) < 1e-4);
  CHECK(std::abs(in.weights[0].at(0, 0) - a0) < 1e-9);
  CHECK(std::abs(in.weights[0].at(0, 1) - a1) < 1e-9);
  CHECK(std::abs(out.at(0, 0) - a0) < 1e-9);
  CHECK(std::abs(out.at(0, 1) - a1) < 1e-9);
  CHECK(std::abs(in.scores[0].at(0, 0) - 1.0 / std::sqrt(2.0)) < 1e-12);
}

TEST_CASE("attention with one or identical context tokens returns the value row") {
  Rng rng(3, "t");
  const MoEmoNet model(single_head(4));
  const ParameterStore params = randomized(identity_attention(4), 4);
  ad::Tape tape;
  Scope scope(tape, params, false);
  auto q = scope.constant(random_tensor(rng, {5, 4}));
  const Tensor row = random_tensor(rng, {1, 4});
  std::vector<double> rep;
  for (int i = 0; i < 3; ++i) rep.insert(rep.end(), row.data().begin(), row.data().end());
  for (const Tensor& mem : {row, Tensor({3, 4}, rep)}) {
    AttentionInternals in;
    const Tensor out = model.cross_attention(scope, "attn", q, scope.constant(mem), &in).value();
    for (std::size_t r = 0; r < 5; ++r)
      for (std::size_t c = 0; c < 4; ++c) CHECK(std::abs(out.at(r, c) - out.at(0, c)) < 1e-12);
    if (mem.dim(0) == 1) {
      for (std::size_t r = 0; r < 5; ++r) CHECK(in.weights[0].at(r, 0) == 1.0);
    }
  }
}

TEST_CASE("attention rows are stochastic and invariant to score shifts") {
  Rng rng(5, "t");
  ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  const ParameterStore params = randomized(model.init_parameters(1), 2);
  for (int trial = 0; trial < 200; ++trial) {
    ad::Tape tape;
    Scope scope(tape, params, false);
    const std::size_t nq = 1 + rng.index(6), nk = 1 + rng.index(6);
    AttentionInternals in;
    model.cross_attention(scope, "block0.attn", scope.constant(random_tensor(rng, {nq, 8}, 3.0)),
                          scope.constant(random_tensor(rng, {nk, 8}, 3.0)), &in);
    REQUIRE(in.weights.size() == 2);
    for (std::size_t h = 0; h < 2; ++h) {
      for (std::size_t r = 0; r < nq; ++r) {
        double s = 0;
        for (std::size_t k = 0; k < nk; ++k) {
          CHECK(in.weights[h].at(r, k) >= 0.0);
          s += in.weights[h].at(r, k);
        }
        CHECK(std::abs(s - 1.0) < 1e-9);
      }
      std::vector<double> shifted(in.scores[h].data().begin(), in.scores[h].data().end());
      for (auto& v : shifted) v += 17.5;
      CHECK(max_abs_diff(ad::softmax_rows(Tensor(in.scores[h].shape(), shifted)), in.weights[h]) < 1e-9);
    }
  }
}

TEST_CASE("motion tokens: shape, positional term and dense oracle") {
  Rng rng(6, "t");
  ModelConfig c = tiny_config();
  c.max_positions = 15;
  const MoEmoNet model(c);
  const ParameterStore params = randomized(model.init_parameters(0), 7);
  const MovementVectorSeq seq = movement_vectors(random_track(rng, 16));
  ad::Tape tape;
  Scope scope(tape, params, false);
  const Tensor tok = model.motion_tokens(scope, seq).value();
  CHECK(tok.shape() == Shape{15, 8});
  const Tensor& w = params.at("motion.proj.weight").value;
  const Tensor& b = params.at("motion.proj.bias").value;
  const Tensor& pos = params.at("motion.pos").value;
  const Tensor x = seq.as_tokens();
  double worst = 0;
  for (std::size_t t = 0; t < 15; ++t)
    for (std::size_t j = 0; j < 8; ++j) {
      double acc = b[j] + pos.at(t, j);
      for (std::size_t i = 0; i < kMotionFeatures; ++i) acc += x.at(t, i) * w.at(i, j);
      worst = std::max(worst, std::abs(acc - tok.at(t, j)));
    }
  CHECK(worst < 1e-9);

  ParameterStore zero_bias;
  for (const auto& p : params) zero_bias.add(p.name, p.name == "motion.proj.bias" ? Tensor::zeros(p.value.shape()) : p.value);
  MovementVectorSeq zeros = seq;
  std::fill(zeros.vectors.begin(), zeros.vectors.end(), 0.0);
  ad::Tape t2;
  Scope s2(t2, zero_bias, false);
  const Tensor z = model.motion_tokens(s2, zeros).value();
  for (std::size_t t = 0; t < 15; ++t)
    for (std::size_t j = 0; j < 8; ++j) CHECK(z.at(t, j) == pos.at(t, j));

  ModelConfig small = c;
  small.max_positions = 4;
  ad::Tape t3;
  Scope s3(t3, MoEmoNet(small).init_parameters(0), false);
  CHECK_THROWS_AS(MoEmoNet(small).motion_tokens(s3, seq), ShapeError);
}

TEST_CASE("classify: uniform when zero, ties to lowest index, probabilities sum to one") {
  const MoEmoNet model(tiny_config());
  const ParameterStore params = model.init_parameters(0);
  const EmotionDistribution u = model.classify(params, Tensor::zeros({3, 8}));
  for (double p : u.probs) CHECK(std::abs(p - 1.0 / 6.0) < 1e-15);
  CHECK(u.argmax() == 0);
  CHECK(EmotionDistribution{{0.1, 0.3, 0.3, 0.1, 0.1, 0.1}}.argmax() == 1);

  Rng rng(8, "t");
  const ParameterStore rnd = randomized(params, 9, 2.0);
  for (int i = 0; i < 100; ++i) {
    const EmotionDistribution d = model.classify(rnd, random_tensor(rng, {1 + rng.index(5), 8}, 3.0));
    CHECK(std::abs(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) - 1.0) < 1e-6);
    for (double p : d.probs) CHECK(p >= 0.0);
  }
}

TEST_CASE("forward gives valid distributions for every variant") {
  Rng rng(10, "t");
  for (Variant v : {Variant::full, Variant::no_cross_attention, Variant::no_context}) {
    for (Aggregation a : {Aggregation::mean_pool, Aggregation::frame_log_prob}) {
      ModelConfig c = tiny_config(v);
      c.aggregation = a;
      const MoEmoNet model(c);
      const ParameterStore params = randomized(model.init_parameters(1), 11);
      const Example ex = random_example(rng, 4, c, 0);
      ContextTokens ctx;
      if (c.uses_context()) ctx = embed_context(*ex.context, params, c.context());
      const EmotionDistribution d = model.forward(params, ex.motion, c.uses_context() ? &ctx : nullptr);
      REQUIRE(d.probs.size() == 6);
      CHECK(std::abs(std::accumulate(d.probs.begin(), d.probs.end(), 0.0) - 1.0) < 1e-6);
    }
  }
}

TEST_CASE("untrained model predicts the uniform distribution") {
  Rng rng(12, "t");
  const ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  const ParameterStore params = model.init_parameters(3);
  const Example ex = random_example(rng, 4, c, 0);
  const ContextTokens ctx = embed_context(*ex.context, params, c.context());
  for (double p : model.forward(params, ex.motion, &ctx).probs) CHECK(std::abs(p - 1.0 / 6.0) < 1e-15);
}

TEST_CASE("no_context output ignores the context; full output depends on it") {
  Rng rng(13, "t");
  for (Variant v : {Variant::no_context, Variant::full}) {
    const ModelConfig c = tiny_config(v);
    const MoEmoNet model(c);
    ModelConfig cc = c;
    cc.variant = Variant::full;
    const ParameterStore ctx_params = randomized(MoEmoNet(cc).init_parameters(0), 14);
    const ParameterStore params = randomized(model.init_parameters(0), 14);
    const Example ex = random_example(rng, 4, c, 0);
    const ContextTokens base = embed_context(*ex.context, ctx_params, c.context());
    const EmotionDistribution ref = model.forward(params, ex.motion, v == Variant::full ? &base : nullptr);
    int changed = 0;
    for (int probe = 0; probe < 10; ++probe) {
      const auto other = random_context(rng, 4, c.context_rows, c.context_cols);
      const ContextTokens t = embed_context(*other, ctx_params, c.context());
      const EmotionDistribution d = v == Variant::full ? model.forward(params, ex.motion, &t)
                                                       : model.forward(params, ex.motion, nullptr);
      if (d.probs != ref.probs) ++changed;
    }
    if (v == Variant::no_context) {
      CHECK(changed == 0);
    } else {
      CHECK(changed == 10);
    }
  }
}

TEST_CASE("full variant is invariant to context frame order") {
  Rng rng(15, "t");
  const ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  const ParameterStore params = randomized(model.init_parameters(0), 16);
  const Example ex = random_example(rng, 4, c, 0);
  const ContextTokens ctx = embed_context(*ex.context, params, c.context());
  const ContextFeatureMap perm = select_frames(*ex.context, {2, 0, 3, 1});
  const ContextTokens pctx = embed_context(perm, params, c.context());
  ForwardTrace t1, t2;
  const auto a = model.forward(params, ex.motion, &ctx, &t1);
  const auto b = model.forward(params, ex.motion, &pctx, &t2);
  for (std::size_t k = 0; k < 6; ++k) CHECK(std::abs(a.probs[k] - b.probs[k]) < 1e-12);
  // Attention columns follow the permutation.
  const std::size_t order[] = {2, 0, 3, 1};
  const Tensor& w1 = t1.attention[0].weights[0];
  const Tensor& w2 = t2.attention[0].weights[0];
  for (std::size_t r = 0; r < w1.dim(0); ++r)
    for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(w2.at(r, k) - w1.at(r, order[k])) < 1e-12);
}

TEST_CASE("shared residual block: counted once, felt at every layer") {
  ModelConfig c2 = tiny_config(), c3 = tiny_config();
  c3.n_blocks = 3;
  const ParameterStore p2 = MoEmoNet(c2).init_parameters(0);
  const ParameterStore p3 = MoEmoNet(c3).init_parameters(0);
  std::size_t shared2 = 0, shared3 = 0, block = 0;
  for (const auto& p : p2)
    if (p.name.rfind("shared.", 0) == 0) shared2 += p.value.size();
  for (const auto& p : p3) {
    if (p.name.rfind("shared.", 0) == 0) shared3 += p.value.size();
    if (p.name.rfind("block2.", 0) == 0) block += p.value.size();
  }
  CHECK(shared2 == shared3);
  CHECK(p3.scalar_count() - p2.scalar_count() == block);

  Rng rng(17, "t");
  const MoEmoNet model(c3);
  const ParameterStore params = randomized(p3, 18);
  const Example ex = random_example(rng, 4, c3, 0);
  const ContextTokens ctx = embed_context(*ex.context, params, c3.context());
  ForwardTrace before;
  model.forward(params, ex.motion, &ctx, &before);
  ParameterStore mutated;
  for (const auto& p : params) {
    Tensor v = p.value;
    if (p.name == "shared.fc2.bias") v = Tensor::filled(v.shape(), 5.0);
    mutated.add(p.name, v);
  }
  ForwardTrace after;
  model.forward(mutated, ex.motion, &ctx, &after);
  REQUIRE(before.shared_residual.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) CHECK(max_abs_diff(before.shared_residual[b], after.shared_residual[b]) > 1e-3);
}

TEST_CASE("zero attention and MLP output projections leave only the shared residual") {
  Rng rng(19, "t");
  ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  ParameterStore params;
  for (const auto& p : randomized(model.init_parameters(0), 20)) {
    const bool zero = p.name.find(".attn.out.") != std::string::npos || p.name.find(".mlp.fc2.") != std::string::npos;
    params.add(p.name, zero ? Tensor::zeros(p.value.shape()) : p.value);
  }
  ad::Tape tape;
  Scope scope(tape, params, false);
  const Tensor x = random_tensor(rng, {3, 8});
  auto ctx = scope.constant(random_tensor(rng, {4, 8}));
  ForwardTrace trace;
  const Tensor y = model.transformer_block(scope, 0, scope.constant(x), ctx, &trace).value();
  CHECK(y.shape() == x.shape());
  const Tensor& shared = trace.shared_residual.at(0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y[i] - (x[i] + shared[i])) < 1e-12);
}

TEST_CASE("parameter census") {
  const ModelConfig c = tiny_config();
  const ParameterStore p = MoEmoNet(c).init_parameters(0);
  CHECK(p.at("context.conv1.weight").value.shape() == Shape{1, 6, 4});
  CHECK(p.at("head.weight").value.shape() == Shape{8, 6});
  CHECK_FALSE(p.contains("fuse.weight"));
  CHECK(MoEmoNet(tiny_config(Variant::no_cross_attention)).init_parameters(0).contains("fuse.weight"));
  CHECK_FALSE(MoEmoNet(tiny_config(Variant::no_context)).init_parameters(0).contains("context.conv1.weight"));
  CHECK(MoEmoNet(c).init_parameters(0) == MoEmoNet(c).init_parameters(0));
  CHECK_FALSE(MoEmoNet(c).init_parameters(0) == MoEmoNet(c).init_parameters(1));
}

TEST_CASE("end-to-end gradients match central differences for every variant") {
  for (Variant v : {Variant::full, Variant::no_cross_attention, Variant::no_context}) {
    CAPTURE(variant_name(v));
    Rng rng(21, "t");
    const ModelConfig c = tiny_config(v);
    const MoEmoNet model(c);
    ParameterStore params = randomized(model.init_parameters(0), 22, 0.4);
    // Context weights are stored at unit variance and scaled at run time.
    Rng wrng(24, "t");
    for (const char* n : {"context.conv1.weight", "context.conv2.weight"}) {
      if (params.contains(n)) params.at(n).value = random_tensor(wrng, params.at(n).value.shape());
    }
    Dataset data{random_example(rng, 3, c, 1), random_example(rng, 3, c, 4)};
    std::string name;
    const double err = model_gradcheck(model, params, data, &name);
    CAPTURE(name);
    CHECK(err < 1e-5);
  }
}

TEST_CASE("context must match the clip length") {
  Rng rng(23, "t");
  const ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  const ParameterStore params = model.init_parameters(0);
  const Example ex = random_example(rng, 4, c, 0);
  const auto other = random_context(rng, 3, c.context_rows, c.context_cols);
  const ContextTokens t = embed_context(*other, params, c.context());
  CHECK_THROWS_AS(model.forward(params, ex.motion, &t), ValidationError);
  CHECK_THROWS_AS(model.forward(params, ex.motion, nullptr), ValidationError);
}
