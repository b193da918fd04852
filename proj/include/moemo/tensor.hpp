#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace moemo {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Tensors are immutable values: the element buffer is shared between copies
/// and never written after construction, so a Tensor can be handed across
/// threads freely. Every dimension is positive; a scalar has shape {1}.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_->size(); }
  bool empty() const { return data_->empty(); }

  std::span<const double> data() const { return {data_->data(), data_->size()}; }
  const double* raw() const { return data_->data(); }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t row, std::size_t col) const;
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  Tensor with_requires_grad(bool flag) const;

  /// Same elements viewed with another shape of equal element count.
  Tensor reshaped(Shape shape) const;

  /// True when both tensors alias the same element buffer.
  bool shares_data_with(const Tensor& other) const { return data_ == other.data_; }
  bool all_finite() const;

  /// Exact equality of shape and every element.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  bool requires_grad_ = false;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace moemo
