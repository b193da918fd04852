#include "moemo/parameters.hpp"

#include <cmath>
#include <cstring>

#include "moemo/errors.hpp"

namespace moemo {

Parameter& ParameterStore::add(std::string name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name '" + name + "'");
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(value), std::nullopt});
  return params_.back();
}

Parameter& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return params_[it->second];
}

const Parameter& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter '" + name + "'");
  return params_[it->second];
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<std::string> ParameterStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

void ParameterStore::clear_gradients() {
  for (auto& p : params_) p.gradient.reset();
}

bool operator==(const ParameterStore& a, const ParameterStore& b) {
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& x = a.params_[i];
    const auto& y = b.params_[i];
    if (x.name != y.name || x.value.shape() != y.value.shape()) return false;
    if (std::memcmp(x.value.raw(), y.value.raw(), x.value.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

Tensor glorot_uniform(Rng& rng, Shape shape, std::size_t fan_in, std::size_t fan_out) {
  const double s = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = rng.uniform(-s, s);
  return Tensor(std::move(shape), std::move(data));
}

ad::Var Scope::param(const std::string& name) {
  auto it = bound_.find(name);
  if (it != bound_.end()) return it->second;
  const Tensor& value = params_.at(name).value;
  ad::Var v = trainable_ ? tape_.leaf(value.with_requires_grad(true)) : tape_.constant(value);
  bound_.emplace(name, v);
  return v;
}

void Scope::collect_gradients(ParameterStore& store) const {
  for (auto& p : store) {
    auto it = bound_.find(p.name);
    if (it == bound_.end()) {
      p.gradient = Tensor::zeros(p.value.shape());
    } else {
      p.gradient = tape_.grad(it->second);
    }
  }
}

}  // namespace moemo
