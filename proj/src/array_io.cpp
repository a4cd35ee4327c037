/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/array_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>

#include "varassim/errors.hpp"

namespace varassim {

namespace {

constexpr const char * kMagic = "varassim-archive";

static_assert(std::endian::native == std::endian::little, "archive payloads are written little endian");

}  // namespace

const Tensor & Archive::get(const std::string & name) const {
  const auto it = arrays.find(name);
  if (it == arrays.end()) throw FormatError("archive has no array '" + name + "'");
  return it->second;
}

void write_archive(const std::filesystem::path & path, const Archive & archive) {
  Json header;
  header["version"] = Archive::kVersion;
  header["kind"] = archive.kind;
  header["meta"] = archive.meta;
  Json list = Json::array();
  std::size_t offset = 0;
  for (const auto & [name, t] : archive.arrays) {
    list.push_back({{"name", name}, {"shape", t.shape()}, {"offset", offset}});
    offset += t.size();
  }
  header["arrays"] = list;
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write " + path.string());
  out << kMagic << '\n' << text.size() << '\n' << text;
  for (const auto & [name, t] : archive.arrays) {
    out.write(reinterpret_cast<const char *>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw FormatError("write failed for " + path.string());
}

Archive read_archive(const std::filesystem::path & path, const std::string & expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string magic, length_line;
  std::getline(in, magic);
  std::getline(in, length_line);
  if (magic != kMagic) throw FormatError(path.string() + " is not a varassim archive");
  std::size_t length = 0;
  try {
    length = std::stoull(length_line);
  } catch (const std::exception &) {
    throw FormatError(path.string() + ": bad header length");
  }
  std::string text(length, '\0');
  in.read(text.data(), static_cast<std::streamsize>(length));
  if (!in) throw FormatError(path.string() + ": truncated header");
  Json header;
  try {
    header = Json::parse(text);
  } catch (const Json::exception & e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const int version = header.value("version", -1);
  if (version != Archive::kVersion) {
    throw VersionError(path.string() + ": archive version " + std::to_string(version) + ", expected " +
                       std::to_string(Archive::kVersion));
  }
  Archive a;
  a.kind = header.value("kind", "");
  if (!expected_kind.empty() && a.kind != expected_kind) {
    throw FormatError(path.string() + ": expected a '" + expected_kind + "' archive, found '" + a.kind + "'");
  }
  a.meta = header.value("meta", Json::object());
  for (const Json & entry : header.at("arrays")) {
    Tensor t(entry.at("shape").get<Shape>());
    in.read(reinterpret_cast<char *>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw FormatError(path.string() + ": truncated payload");
    a.arrays.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return a;
}

void save_field(const std::filesystem::path & path, const SpaceTimeField & field, const Mask * mask,
                double start_day) {
  const SpaceTimeGrid & g = field.grid();
  Archive a;
  a.kind = "field";
  a.meta = {{"name", field.name()},       {"units", field.units()}, {"dims", {"time", "y", "x"}},
            {"dx", g.dx},                 {"dt", g.dt},             {"start_day", start_day},
            {"coordinate_units", {"days", "degrees", "degrees"}}};
  a.arrays["values"] = field.values();
  Tensor time({g.time_steps}), axis({g.width});
  for (int t = 0; t < g.time_steps; ++t) time[t] = start_day + t * g.dt;
  for (int i = 0; i < g.width; ++i) axis[i] = i * g.dx;
  a.arrays["time"] = time;
  a.arrays["y"] = axis;
  a.arrays["x"] = axis;
  if (mask) {
    if (mask->grid() != g) throw DimensionError("save_field: mask grid differs from field grid");
    a.arrays["mask"] = mask->values();
  }
  write_archive(path, a);
}

LoadedField load_field(const std::filesystem::path & path) {
  const Archive a = read_archive(path, "field");
  const Tensor & v = a.get("values");
  if (v.rank() != 3 || v.dim(1) != v.dim(2)) throw FormatError(path.string() + ": field values must be T x W x W");
  const SpaceTimeGrid g{v.dim(1), v.dim(0), a.meta.at("dx").get<double>(), a.meta.at("dt").get<double>()};
  LoadedField out{SpaceTimeField(g, v, a.meta.at("name").get<std::string>(), a.meta.at("units").get<std::string>()),
                  std::nullopt, a.meta.value("start_day", 0.0)};
  if (a.has("mask")) out.mask = Mask(g, a.get("mask"));
  return out;
}

}  // namespace varassim
