/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/params.hpp"

#include <cmath>

#include "varassim/errors.hpp"

namespace varassim {

ad::Var & ParamSet::add(const std::string & name, Tensor init) {
  if (contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
  return vars_.emplace(name, ad::Var::leaf(std::move(init))).first->second;
}

const ad::Var & ParamSet::at(const std::string & name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw DimensionError("missing parameter '" + name + "'");
  return it->second;
}

void ParamSet::set(const std::string & name, Tensor value) {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw DimensionError("missing parameter '" + name + "'");
  if (value.shape() != it->second.shape()) {
    throw DimensionError("parameter '" + name + "' has shape " + to_string(it->second.shape()) +
                         ", got " + to_string(value.shape()));
  }
  it->second.assign(std::move(value));
}

std::vector<std::string> ParamSet::names(const std::string & prefix) const {
  std::vector<std::string> out;
  for (const auto & [name, var] : vars_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

std::vector<ad::Var> ParamSet::vars(const std::string & prefix) const {
  std::vector<ad::Var> out;
  for (const auto & [name, var] : vars_) {
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(var);
  }
  return out;
}

std::size_t ParamSet::count(const std::string & prefix) const {
  std::size_t n = 0;
  for (const auto & [name, var] : vars_) {
    if (name.compare(0, prefix.size(), prefix) == 0) n += var.value().size();
  }
  return n;
}

ParamSet::ParamSet(const ParamSet & other) {
  for (const auto & [name, var] : other.vars_) vars_.emplace(name, ad::Var::leaf(var.value()));
}

ParamSet & ParamSet::operator=(const ParamSet & other) {
  if (this != &other) *this = ParamSet(other);
  return *this;
}

ParamSet ParamSet::clone() const { return *this; }

void ParamSet::copy_values_from(const ParamSet & other) {
  for (auto & [name, var] : vars_) {
    if (other.contains(name)) var.assign(other.value(name));
  }
}

void ParamSet::merge(const ParamSet & other) {
  for (const auto & [name, var] : other.vars_) add(name, var.value());
}

bool operator==(const ParamSet & a, const ParamSet & b) {
  if (a.vars_.size() != b.vars_.size()) return false;
  for (auto ia = a.vars_.begin(), ib = b.vars_.begin(); ia != a.vars_.end(); ++ia, ++ib) {
    if (ia->first != ib->first || !(ia->second.value() == ib->second.value())) return false;
  }
  return true;
}

std::string param_group(const std::string & name) { return name.substr(0, name.find('.')); }

Tensor normal_tensor(Rng & rng, const Shape & shape, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Tensor t(shape);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = normal(rng);
  return t;
}

Tensor init_conv(Rng & rng, int out, int in, int k, double gain) {
  return normal_tensor(rng, {out, in, k, k}, gain / std::sqrt(static_cast<double>(in * k * k)));
}

}  // namespace varassim
