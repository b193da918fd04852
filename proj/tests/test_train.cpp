#include <doctest.h>

#include <cmath>
#include <limits>

#include "model_fixtures.hpp"
#include "moemo/errors.hpp"
#include "moemo/train.hpp"

using namespace moemo;
using namespace moemo::test;

namespace {

Dataset small_dataset(const ModelConfig& c, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, "data");
  Dataset data;
  for (std::size_t i = 0; i < n; ++i) data.push_back(random_example(rng, 4, c, static_cast<int>(i % 6)));
  return data;
}

std::vector<const Example*> pointers(const Dataset& data) {
  std::vector<const Example*> out;
  for (const auto& ex : data) out.push_back(&ex);
  return out;
}

}  // namespace

TEST_CASE("untrained loss is ln 6") {
  for (Variant v : {Variant::full, Variant::no_cross_attention, Variant::no_context}) {
    const MoEmoNet model(tiny_config(v));
    ParameterStore params = model.init_parameters(3);
    const Dataset data = small_dataset(model.config(), 12, 1);
    const double loss = loss_and_gradients(model, params, pointers(data));
    CHECK(std::abs(loss - std::log(6.0)) < 0.05);
  }
}

TEST_CASE("one SGD step subtracts lr times the gradient") {
  const MoEmoNet model(tiny_config());
  ParameterStore params = randomized(model.init_parameters(0), 1);
  const Dataset data = small_dataset(model.config(), 3, 2);
  loss_and_gradients(model, params, pointers(data));
  const ParameterStore before = params;
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 0.1;
  Optimizer(cfg).step(params);
  for (const auto& p : before) {
    const Tensor& after = params.at(p.name).value;
    for (std::size_t i = 0; i < p.value.size(); ++i) CHECK(after[i] == p.value[i] - 0.1 * (*p.gradient)[i]);
  }
}

TEST_CASE("first adaptive-moment step is lr * g / (|g| + eps)") {
  ParameterStore params;
  params.add("w", Tensor::vector({1.0, -2.0, 0.5}));
  params.at("w").gradient = Tensor::vector({0.3, -4.0, 0.0});
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  Optimizer(cfg).step(params);
  const Tensor& w = params.at("w").value;
  CHECK(w[0] == doctest::Approx(1.0 - 0.01 * 0.3 / (0.3 + 1e-8)).epsilon(1e-12));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.01 * 4.0 / (4.0 + 1e-8)).epsilon(1e-12));
  CHECK(w[2] == 0.5);
}

TEST_CASE("configuration invariants") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  for (double lr : {0.0, -1e-3, std::numeric_limits<double>::infinity()}) {
    cfg.learning_rate = lr;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  cfg = TrainConfig{};
  for (double f : {0.0, 1.0, 1.5}) {
    cfg.split_fraction = f;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("batch size larger than the data set trains one batch per epoch") {
  const MoEmoNet model(tiny_config());
  const Dataset data = small_dataset(model.config(), 3, 3);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 64;
  const TrainResult r = train(model, data, cfg);
  CHECK(r.loss_curve.size() == 2);
  CHECK_FALSE(r.params == model.init_parameters(cfg.seed));
}

TEST_CASE("a single example can be memorized") {
  const MoEmoNet model(tiny_config());
  const Dataset data = small_dataset(model.config(), 1, 4);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 1;
  cfg.learning_rate = 1e-2;
  const TrainResult r = train(model, data, cfg);
  CHECK(r.loss_curve.back() < 0.01);
  CHECK(predict(model, r.params, data).front() == data.front().label);
}

TEST_CASE("training is deterministic for a fixed seed") {
  const MoEmoNet model(tiny_config());
  const Dataset data = small_dataset(model.config(), 10, 5);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 3;
  cfg.learning_rate = 1e-2;
  const TrainResult a = train(model, data, cfg);
  const TrainResult b = train(model, data, cfg);
  CHECK(a.params == b.params);
  CHECK(a.loss_curve == b.loss_curve);
  cfg.seed = 1;
  CHECK_FALSE(train(model, data, cfg).params == a.params);
}

TEST_CASE("a non-finite loss stops training") {
  const MoEmoNet model(tiny_config());
  const Dataset data = small_dataset(model.config(), 4, 6);
  ParameterStore params = model.init_parameters(0);
  params.at("head.bias").value = Tensor({6}, std::vector<double>(6, std::numeric_limits<double>::quiet_NaN()));
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train_from(model, params, data, cfg), DivergenceError);
}

TEST_CASE("evaluation and input checks") {
  const MoEmoNet model(tiny_config());
  const Dataset data = small_dataset(model.config(), 6, 7);
  const ParameterStore params = model.init_parameters(0);
  const EvalReport r = evaluate(model, params, data);
  CHECK(r.n_examples == 6);
  // The untrained model ties every class and predicts the lowest index.
  for (int p : predict(model, params, data)) CHECK(p == 0);
  CHECK(labels_of(data) == std::vector<int>{0, 1, 2, 3, 4, 5});
  const std::vector<std::size_t> idx{4, 1};
  CHECK(labels_of(subset(data, idx)) == std::vector<int>{4, 1});

  TrainConfig cfg;
  CHECK_THROWS_AS(train(model, Dataset{}, cfg), ValidationError);
  Dataset missing = data;
  missing[0].context.reset();
  CHECK_THROWS_AS(predict(model, params, missing), ValidationError);
}
