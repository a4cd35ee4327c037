/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace varassim {

using Shape = std::vector<int>;

std::size_t numel(const Shape & shape);
std::string to_string(const Shape & shape);

/// Dense row-major array of doubles. Value semantics; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor({1}, v); }

  const Shape & shape() const noexcept { return shape_; }
  int rank() const noexcept { return static_cast<int>(shape_.size()); }
  int dim(int i) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double * data() noexcept { return data_.data(); }
  const double * data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  const std::vector<double> & vector() const noexcept { return data_; }

  double & operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Rank-3 element access [c, y, x].
  double & operator()(int c, int y, int x) noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }
  double operator()(int c, int y, int x) const noexcept {
    return data_[(static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x];
  }

  /// Same data, new shape with equal element count.
  Tensor reshaped(Shape shape) const;
  void fill(double v);
  double item() const;

  bool all_finite() const noexcept;
  double sum() const noexcept;
  double sum_sq() const noexcept;
  double max_abs() const noexcept;

  Tensor & operator+=(const Tensor & other);
  Tensor & operator-=(const Tensor & other);
  Tensor & operator*=(double s) noexcept;

  friend bool operator==(const Tensor &, const Tensor &) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor & b);
Tensor operator-(Tensor a, const Tensor & b);
Tensor operator*(Tensor a, double s);

/// Throws DimensionError when shapes differ, naming the context.
void require_same_shape(const Tensor & a, const Tensor & b, const char * context);

}  // namespace varassim
