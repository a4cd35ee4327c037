/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "varassim/core_types.hpp"
#include "varassim/tensor.hpp"

namespace varassim {

using Json = nlohmann::ordered_json;

/// Named float64 arrays plus a JSON header. On disk: a magic line, the header
/// length in bytes, the header, then the arrays back to back (little endian).
struct Archive {
  static constexpr int kVersion = 1;

  std::string kind;
  Json meta = Json::object();
  std::map<std::string, Tensor> arrays;

  bool has(const std::string & name) const { return arrays.count(name) != 0; }
  const Tensor & get(const std::string & name) const;
};

void write_archive(const std::filesystem::path & path, const Archive & archive);
/// Checks the format version and, when non-empty, the archive kind.
Archive read_archive(const std::filesystem::path & path, const std::string & expected_kind = "");

/// Field file: dims (time, y, x), coordinate vectors, units and an optional mask.
/// `start_day` sets the first time coordinate.
void save_field(const std::filesystem::path & path, const SpaceTimeField & field, const Mask * mask = nullptr,
                double start_day = 0.0);

struct LoadedField {
  SpaceTimeField field;
  std::optional<Mask> mask;
  double start_day = 0.0;
};
LoadedField load_field(const std::filesystem::path & path);

}  // namespace varassim
