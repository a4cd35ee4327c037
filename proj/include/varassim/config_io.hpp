/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <set>
#include <string>

#include "varassim/array_io.hpp"
#include "varassim/oi.hpp"
#include "varassim/osse_data.hpp"
#include "varassim/training.hpp"

/// JSON forms of the module configurations. Readers start from the current
/// value of the target, so absent keys keep their defaults; unknown keys are
/// rejected with a ConfigError naming the full key path.
namespace varassim::config {

/// Strict object reader that remembers which keys were consumed.
class Reader {
 public:
  Reader(const Json & j, std::string path);

  bool has(const std::string & key) const { return j_.contains(key); }
  const Json & raw(const std::string & key);
  Reader section(const std::string & key);
  std::string key_path(const std::string & key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void read(const std::string & key, T & out) {
    if (!has(key)) return;
    seen_.insert(key);
    try {
      out = j_.at(key).get<T>();
    } catch (const Json::exception & e) {
      throw_type_error(key, e.what());
    }
  }
  /// Throws on any key that was never read.
  void finish() const;

 private:
  [[noreturn]] void throw_type_error(const std::string & key, const std::string & what) const;

  const Json & j_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const SpaceTimeGrid & c);
Json to_json(const SqgConfig & c);
Json to_json(const TruthConfig & c);
Json to_json(const SamplingConfig & c);
Json to_json(const DatasetSplit & c);
Json to_json(const OiConfig & c);
Json to_json(const PriorConfig & c);
Json to_json(const MultimodalOpConfig & c);
Json to_json(const MmConfig & c);
Json to_json(const VariationalCostConfig & c);
Json to_json(const SolverConfig & c);
Json to_json(const UnetDirectConfig & c);
Json to_json(const ModelConfig & c);
Json to_json(const TrainConfig & c);
Json to_json(const Normalizer & n);
Json to_json(const EpochRecord & r);

void read(Reader & r, SpaceTimeGrid & c);
void read(Reader & r, SqgConfig & c);
void read(Reader & r, TruthConfig & c);
void read(Reader & r, SamplingConfig & c);
void read(Reader & r, DatasetSplit & c);
void read(Reader & r, OiConfig & c);
void read(Reader & r, PriorConfig & c);
void read(Reader & r, MultimodalOpConfig & c);
void read(Reader & r, MmConfig & c);
void read(Reader & r, VariationalCostConfig & c);
void read(Reader & r, SolverConfig & c);
void read(Reader & r, UnetDirectConfig & c);
void read(Reader & r, ModelConfig & c);
void read(Reader & r, TrainConfig & c);
void read(Reader & r, Normalizer & n);
void read(Reader & r, EpochRecord & e);

/// Parses `j` into a copy of `defaults` and calls finish().
template <class T>
T parse(const Json & j, T defaults, const std::string & path = "") {
  Reader r(j, path);
  read(r, defaults);
  r.finish();
  return defaults;
}

}  // namespace varassim::config
