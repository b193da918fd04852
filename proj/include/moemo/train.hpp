#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "moemo/context.hpp"
#include "moemo/metrics.hpp"
#include "moemo/model.hpp"
#include "moemo/motion.hpp"
#include "moemo/parameters.hpp"

namespace moemo {

/// One person of one clip. Persons of a clip share the context pointer.
struct Example {
  std::string clip_id;
  MovementVectorSeq motion;
  std::shared_ptr<const ContextFeatureMap> context;
  int label = 0;
};

using Dataset = std::vector<Example>;

enum class OptimizerKind { sgd, adaptive_moments };

std::string_view optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  double learning_rate = 3e-4;
  OptimizerKind optimizer = OptimizerKind::adaptive_moments;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  double split_fraction = 0.9;
  F1Average f1_average = F1Average::macro;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// SGD or bias-corrected adaptive-moment updates over a ParameterStore.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  /// Applies one update from each parameter's stored gradient.
  void step(ParameterStore& params);

 private:
  TrainConfig cfg_;
  std::size_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

/// Mean cross-entropy of `batch` on a single tape; leaves gradients in `params`.
/// Each distinct context map is embedded once per call.
double loss_and_gradients(const MoEmoNet& model, ParameterStore& params, std::span<const Example* const> batch);

struct TrainResult {
  ParameterStore params;
  std::vector<double> loss_curve;  // mean training loss per epoch
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Minimizes mean cross-entropy from parameters initialized with cfg.seed.
/// Throws DivergenceError when the loss becomes non-finite.
TrainResult train(const MoEmoNet& model, const Dataset& data, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Same loop, continuing from the given parameters.
TrainResult train_from(const MoEmoNet& model, ParameterStore params, const Dataset& data, const TrainConfig& cfg,
                       const EpochCallback& on_epoch = {});

/// Argmax class per example (ties to the lowest index).
std::vector<int> predict(const MoEmoNet& model, const ParameterStore& params, const Dataset& data);

EvalReport evaluate(const MoEmoNet& model, const ParameterStore& params, const Dataset& data,
                    F1Average average = F1Average::macro);

std::vector<int> labels_of(const Dataset& data);
Dataset subset(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace moemo
