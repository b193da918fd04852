#include "moemo/train.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <optional>

#include "moemo/errors.hpp"
#include "moemo/rng.hpp"

namespace moemo {

std::string_view optimizer_name(OptimizerKind k) {
  return k == OptimizerKind::sgd ? "sgd" : "adaptive_moments";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::sgd;
  if (name == "adaptive_moments" || name == "adam") return OptimizerKind::adaptive_moments;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be a finite positive number");
  }
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) throw ConfigError("split_fraction must lie in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0)) {
    throw ConfigError("invalid adaptive-moment constants");
  }
}

void Optimizer::step(ParameterStore& params) {
  ++t_;
  if (cfg_.optimizer == OptimizerKind::adaptive_moments && m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.value.size(), 0.0);
      v_.emplace_back(p.value.size(), 0.0);
    }
  }
  const double lr = cfg_.learning_rate;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  std::size_t pi = 0;
  for (auto& p : params) {
    if (!p.gradient) throw Error("parameter '" + p.name + "' has no gradient");
    const Tensor& g = *p.gradient;
    std::vector<double> next(p.value.data().begin(), p.value.data().end());
    if (cfg_.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < next.size(); ++i) next[i] -= lr * g[i];
    } else {
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < next.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        next[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
    p.value = Tensor(p.value.shape(), std::move(next));
    ++pi;
  }
}

double loss_and_gradients(const MoEmoNet& model, ParameterStore& params, std::span<const Example* const> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  ad::Tape tape;
  Scope scope(tape, params, true);
  std::map<const ContextFeatureMap*, ad::Var> embedded;
  std::vector<ad::Var> rows;
  std::vector<int> labels;
  rows.reserve(batch.size());
  for (const Example* ex : batch) {
    std::optional<ad::Var> ctx;
    if (model.config().uses_context()) {
      if (!ex->context) throw ValidationError("example '" + ex->clip_id + "' has no context");
      auto it = embedded.find(ex->context.get());
      if (it == embedded.end()) {
        it = embedded.emplace(ex->context.get(), model.context_tokens(scope, *ex->context)).first;
      }
      ctx = it->second;
    }
    rows.push_back(model.logits(scope, ex->motion, ctx));
    labels.push_back(ex->label);
  }
  ad::Var all = rows.size() == 1 ? rows.front() : ad::concat(rows, 0);
  ad::Var loss = ad::cross_entropy_with_logits(all, labels);
  tape.backward(loss);
  scope.collect_gradients(params);
  return loss.value().item();
}

TrainResult train(const MoEmoNet& model, const Dataset& data, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return train_from(model, model.init_parameters(cfg.seed), data, cfg, on_epoch);
}

TrainResult train_from(const MoEmoNet& model, ParameterStore params, const Dataset& data, const TrainConfig& cfg,
                       const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  TrainResult result{std::move(params), {}};
  Optimizer optimizer(cfg);
  Rng shuffle(cfg.seed, "shuffle");
  std::vector<std::size_t> order(data.size());
  std::vector<const Example*> batch;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(&data[order[i]]);
      const double loss = loss_and_gradients(model, result.params, batch);
      if (!std::isfinite(loss)) {
        throw DivergenceError("training loss became non-finite in epoch " + std::to_string(epoch + 1));
      }
      weighted += loss * static_cast<double>(batch.size());
      optimizer.step(result.params);
    }
    const double mean_loss = weighted / static_cast<double>(data.size());
    result.loss_curve.push_back(mean_loss);
    if (on_epoch) on_epoch(epoch + 1, mean_loss);
  }
  result.params.clear_gradients();
  return result;
}

std::vector<int> predict(const MoEmoNet& model, const ParameterStore& params, const Dataset& data) {
  std::map<const ContextFeatureMap*, ContextTokens> cache;
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data) {
    const ContextTokens* ctx = nullptr;
    if (model.config().uses_context()) {
      if (!ex.context) throw ValidationError("example '" + ex.clip_id + "' has no context");
      auto it = cache.find(ex.context.get());
      if (it == cache.end()) {
        // Only the current clip's tokens are kept; persons of a clip are adjacent.
        cache.clear();
        it = cache.emplace(ex.context.get(), embed_context(*ex.context, params, model.config().context())).first;
      }
      ctx = &it->second;
    }
    out.push_back(model.forward(params, ex.motion, ctx).argmax());
  }
  return out;
}

EvalReport evaluate(const MoEmoNet& model, const ParameterStore& params, const Dataset& data, F1Average average) {
  if (data.empty()) throw ValidationError("test set is empty");
  const auto preds = predict(model, params, data);
  const auto labels = labels_of(data);
  return score_predictions(labels, preds, model.config().n_classes, average);
}

std::vector<int> labels_of(const Dataset& data) {
  std::vector<int> out;
  out.reserve(data.size());
  for (const auto& ex : data) out.push_back(ex.label);
  return out;
}

Dataset subset(const Dataset& data, std::span<const std::size_t> indices) {
  Dataset out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.at(i));
  return out;
}

}  // namespace moemo
