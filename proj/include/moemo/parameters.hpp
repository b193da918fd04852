#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "moemo/autodiff.hpp"
#include "moemo/rng.hpp"
#include "moemo/tensor.hpp"

namespace moemo {

/// Named trainable tensor, e.g. "block0.attn.query.weight".
struct Parameter {
  std::string name;
  Tensor value;
  std::optional<Tensor> gradient;
};

/// Ordered, uniquely named parameter collection of a model.
class ParameterStore {
 public:
  Parameter& add(std::string name, Tensor value);
  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;

  std::size_t size() const { return params_.size(); }
  /// Total number of scalar weights.
  std::size_t scalar_count() const;
  std::vector<std::string> names() const;

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void clear_gradients();

  /// Bitwise equality of names, shapes and values.
  friend bool operator==(const ParameterStore& a, const ParameterStore& b);

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
};

/// uniform(-s, s) with s = sqrt(6 / (fan_in + fan_out)).
Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out);

/// Binds parameters to a tape. Each parameter becomes exactly one leaf per tape,
/// so a weight used in several places (the shared residual block) accumulates
/// all of its gradient contributions in one node.
class Scope {
 public:
  Scope(ad::Tape& tape, const ParameterStore& params, bool trainable)
      : tape_(tape), params_(params), trainable_(trainable) {}

  ad::Var param(const std::string& name);
  ad::Var constant(const Tensor& t) { return tape_.constant(t); }
  ad::Tape& tape() { return tape_; }
  const ParameterStore& params() const { return params_; }
  bool trainable() const { return trainable_; }

  /// Copies tape gradients into `store` (zeros for parameters never reached).
  void collect_gradients(ParameterStore& store) const;

 private:
  ad::Tape& tape_;
  const ParameterStore& params_;
  bool trainable_;
  std::map<std::string, ad::Var> bound_;
};

}  // namespace moemo
