#include <doctest.h>

#include <cmath>

#include "model_fixtures.hpp"
#include "moemo/context.hpp"
#include "moemo/errors.hpp"

using namespace moemo;
using namespace moemo::test;

namespace {

ParameterStore context_params(const ContextEmbedConfig& cfg, std::uint64_t seed) {
  ParameterStore store;
  Rng rng(seed, "init");
  init_context_parameters(store, cfg, rng);
  return store;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

TEST_CASE("embedding equals a dense per-frame recomputation") {
  const ContextEmbedConfig cfg{3, 5, 7, 4};
  Rng rng(1, "t");
  ParameterStore params = randomized(context_params(cfg, 0), 2);
  const auto map = random_context(rng, 6, 3, 5);
  const Tensor out = *embed_context(*map, params, cfg).tokens;
  REQUIRE(out.shape() == Shape{6, 4});

  const std::size_t in = 15;
  const double s1 = std::sqrt(2.0 / (in + 7)), s2 = std::sqrt(2.0 / (7 + 4));
  const Tensor& w1 = params.at("context.conv1.weight").value;
  const Tensor& b1 = params.at("context.conv1.bias").value;
  const Tensor& w2 = params.at("context.conv2.weight").value;
  const Tensor& b2 = params.at("context.conv2.bias").value;
  double worst = 0;
  for (std::size_t t = 0; t < 6; ++t) {
    std::vector<double> h(7);
    for (std::size_t j = 0; j < 7; ++j) {
      double acc = b1[j];
      for (std::size_t i = 0; i < in; ++i) acc += static_cast<double>(map->data[t * in + i]) * s1 * w1[i * 7 + j];
      h[j] = gelu(acc);
    }
    for (std::size_t k = 0; k < 4; ++k) {
      double acc = b2[k];
      for (std::size_t j = 0; j < 7; ++j) acc += h[j] * s2 * w2[j * 4 + k];
      worst = std::max(worst, std::abs(acc - out.at(t, k)));
    }
  }
  CHECK(worst < 1e-9);
  CHECK(context_weight_scale(in, 7) == s1);
}

TEST_CASE("effective initialization is Glorot uniform") {
  const ContextEmbedConfig cfg{10, 40, 64, 32};
  const ParameterStore p = context_params(cfg, 3);
  const Tensor& w = p.at("context.conv1.weight").value;
  const double bound = std::sqrt(6.0 / (400 + 64)) / context_weight_scale(400, 64);
  double var = 0;
  for (double v : w.data()) {
    CHECK(std::abs(v) <= bound + 1e-12);
    var += v * v;
  }
  var /= static_cast<double>(w.size());
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("zero input with zero biases gives zero tokens") {
  const ContextEmbedConfig cfg{2, 3, 4, 5};
  const ParameterStore p = context_params(cfg, 0);
  ContextFeatureMap map{"z", 3, 2, 3, std::vector<float>(18, 0.0f)};
  const Tensor out = *embed_context(map, p, cfg).tokens;
  for (double v : out.data()) CHECK(v == 0.0);
}

TEST_CASE("sixteen default-sized frames embed to (16, 128)") {
  ContextEmbedConfig cfg;
  cfg.hidden = 4;  // keeps the test light; the frame and channel geometry is the default
  const ParameterStore p = context_params(cfg, 0);
  Rng rng(4, "t");
  const auto map = random_context(rng, 16, 50, 768);
  CHECK_NOTHROW(validate_context(*map, 50, 768));
  CHECK(embed_context(*map, p, cfg).tokens->shape() == Shape{16, 128});
}

TEST_CASE("embedding is equivariant to frame order") {
  const ContextEmbedConfig cfg{2, 3, 4, 5};
  const ParameterStore p = randomized(context_params(cfg, 0), 5);
  Rng rng(6, "t");
  const auto map = random_context(rng, 5, 2, 3);
  const std::vector<std::size_t> perm{3, 1, 4, 0, 2};
  const Tensor a = *embed_context(*map, p, cfg).tokens;
  const Tensor b = *embed_context(select_frames(*map, perm), p, cfg).tokens;
  for (std::size_t t = 0; t < 5; ++t)
    for (std::size_t k = 0; k < 5; ++k) CHECK(b.at(t, k) == a.at(perm[t], k));
}

TEST_CASE("dimension and finiteness checks") {
  Rng rng(7, "t");
  auto map = random_context(rng, 2, 2, 3);
  CHECK_THROWS_AS(validate_context(*map, 50, 768), ValidationError);
  ContextFeatureMap bad = *map;
  bad.data[1] = std::nanf("");
  CHECK_THROWS_AS(validate_context(bad, 2, 3), ValidationError);
  ContextFeatureMap empty{"e", 0, 2, 3, {}};
  CHECK_THROWS_AS(validate_context(empty, 2, 3), ValidationError);
}

TEST_CASE("align_context keeps every frame") {
  const ContextEmbedConfig cfg{2, 3, 4, 5};
  const ParameterStore p = context_params(cfg, 0);
  Rng rng(8, "t");
  for (std::size_t f : {2u, 16u}) {
    const ContextTokens t = embed_context(*random_context(rng, f, 2, 3), p, cfg);
    const ContextTokens a = align_context(t, f);
    CHECK(a.frames() == f);
    CHECK(a.tokens == t.tokens);
  }
  const ContextTokens t15 = embed_context(*random_context(rng, 15, 2, 3), p, cfg);
  CHECK_THROWS_AS(align_context(t15, 16), ValidationError);
}

TEST_CASE("broadcast_to_persons aliases one buffer") {
  const ContextEmbedConfig cfg{2, 3, 4, 5};
  const ParameterStore p = context_params(cfg, 0);
  Rng rng(9, "t");
  const ContextTokens t = embed_context(*random_context(rng, 4, 2, 3), p, cfg);
  const auto one = broadcast_to_persons(t, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0].tokens == t.tokens);
  const auto three = broadcast_to_persons(t, 3);
  REQUIRE(three.size() == 3);
  for (const auto& v : three) CHECK(v.tokens.get() == t.tokens.get());
  CHECK_THROWS_AS(broadcast_to_persons(t, 0), ValidationError);
}

TEST_CASE("persons of a clip share one embedding in the batch loss") {
  const ModelConfig c = tiny_config();
  const MoEmoNet model(c);
  ParameterStore params = randomized(model.init_parameters(0), 11);
  Rng rng(10, "t");
  Example a = random_example(rng, 4, c, 1);
  Example b = a;
  b.motion = movement_vectors(random_track(rng, 4, 1));
  b.label = 2;
  const std::vector<const Example*> batch{&a, &b};
  const double loss = loss_and_gradients(model, params, batch);

  ad::Tape tape;
  Scope s(tape, params, true);
  const ad::Var ctx = model.context_tokens(s, *a.context);
  const std::size_t after_embedding = tape.size();
  const ad::Var la = model.logits(s, a.motion, ctx);
  const ad::Var lb = model.logits(s, b.motion, ctx);
  std::vector<ad::Var> rows{la, lb};
  const std::vector<int> labels{1, 2};
  const double manual = ad::cross_entropy_with_logits(ad::concat(rows, 0), labels).value().item();
  CHECK(std::abs(loss - manual) < 1e-12);
  CHECK(after_embedding > 0);
}
