/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "varassim/autodiff.hpp"

namespace varassim {

/// Named trainable tensors. Names are dotted paths ("phi.hr.conv1.w"); the
/// first segment is the parameter group.
class ParamSet {
 public:
  ParamSet() = default;
  /// Copies hold their own leaves: updating one set never changes another.
  ParamSet(const ParamSet & other);
  ParamSet & operator=(const ParamSet & other);
  ParamSet(ParamSet &&) noexcept = default;
  ParamSet & operator=(ParamSet &&) noexcept = default;

  ad::Var & add(const std::string & name, Tensor init);
  bool contains(const std::string & name) const { return vars_.count(name) != 0; }
  const ad::Var & at(const std::string & name) const;
  const Tensor & value(const std::string & name) const { return at(name).value(); }
  void set(const std::string & name, Tensor value);

  std::vector<std::string> names(const std::string & prefix = "") const;
  std::vector<ad::Var> vars(const std::string & prefix = "") const;
  std::size_t count(const std::string & prefix = "") const;
  std::size_t size() const noexcept { return vars_.size(); }

  /// Deep copy of the values (fresh leaves).
  ParamSet clone() const;
  /// Copies values of every name present in both sets.
  void copy_values_from(const ParamSet & other);
  void merge(const ParamSet & other);

  friend bool operator==(const ParamSet & a, const ParamSet & b);

 private:
  std::map<std::string, ad::Var> vars_;
};

std::string param_group(const std::string & name);

using Rng = std::mt19937_64;

/// Scaled-normal initializer for a conv kernel [O,C,K,K] with fan-in C*K*K.
Tensor init_conv(Rng & rng, int out, int in, int k, double gain = 1.0);
Tensor normal_tensor(Rng & rng, const Shape & shape, double stddev);

}  // namespace varassim
