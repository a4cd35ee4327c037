/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "varassim/baselines.hpp"
#include "varassim/config_io.hpp"
#include "varassim/errors.hpp"
#include "varassim/obs_operators.hpp"

namespace fs = std::filesystem;

namespace varassim {

StageError::StageError(std::string stage, const std::string & cause)
    : std::runtime_error("stage '" + stage + "' failed: " + cause), stage_(std::move(stage)) {}

ModelConfig desk_model_config() {
  ModelConfig m;
  m.cost.prior.base_channels = 8;
  m.solver.n_iterations = 5;
  m.solver.lstm_hidden = 16;
  m.unet.net.base_channels = 8;
  return m;
}

TrainConfig desk_train_config() {
  TrainConfig t;
  t.epochs = 50;
  t.learning_rate = 3e-3;
  t.batch_size = 4;
  t.crop_size = 32;
  t.patience = 15;
  return t;
}

OiConfig desk_oi_config() {
  OiConfig o;
  o.max_obs_per_window = 1500;
  return o;
}

namespace {

bool safe_name(const std::string & s) {
  if (s.empty() || s == "." || s == "..") return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

const std::set<std::string> kBaselines{"oi", "sqg"};

}  // namespace

void ExperimentConfig::validate() const {
  if (!safe_name(run_name)) throw ConfigError("run_name '" + run_name + "' must be a plain file name");
  if (window_length < 1) throw ConfigError("window_length must be >= 1");
  if (train_stride < 1 || validation_stride < 1) throw ConfigError("window strides must be >= 1");
  const TruthConfig t = truth_config();
  t.validate(window_length);
  sampling.validate();
  split.validate(t.grid.time_steps, window_length);
  oi.validate();
  for (double v : oi_search.spatial_lengthscales) {
    if (!(v > 0.0)) throw ConfigError("oi_search.spatial_lengthscales must be positive");
  }
  for (double v : oi_search.temporal_lengthscales) {
    if (!(v > 0.0)) throw ConfigError("oi_search.temporal_lengthscales must be positive");
  }
  model.validate();
  train_config().validate();
  if (train.crop_size > t.grid.width) throw ConfigError("train.crop_size exceeds the grid width");
  eval.validate();

  std::set<std::string> names;
  for (const Variant & v : variants) {
    if (!safe_name(v.name)) throw ConfigError("variant name '" + v.name + "' must be a plain file name");
    if (kBaselines.count(v.name) || v.name == "truth") {
      throw ConfigError("variant name '" + v.name + "' is reserved");
    }
    if (!names.insert(v.name).second) throw ConfigError("duplicate variant name '" + v.name + "'");
    try {
      v.model.validate();
    } catch (const ConfigError & e) {
      throw ConfigError("variant '" + v.name + "': " + e.what());
    }
  }
  std::set<std::string> seen;
  for (const std::string & b : baselines) {
    if (!kBaselines.count(b)) throw ConfigError("unknown baseline '" + b + "' (expected oi or sqg)");
    if (!seen.insert(b).second) throw ConfigError("duplicate baseline '" + b + "'");
  }
  if (!seen.count("oi")) throw ConfigError("baselines must include 'oi': gains are reported relative to it");
  if (!(sqg_cutoff > 0.0)) throw ConfigError("sqg_cutoff must be positive");
  if (!sst_resolution.variant.empty()) {
    const Variant & v = variant(sst_resolution.variant);
    if (!v.model.needs_sst()) {
      throw ConfigError("sst_resolution.variant '" + v.name + "' does not use SST");
    }
    if (sst_resolution.factors.empty()) throw ConfigError("sst_resolution.factors is empty");
    for (int f : sst_resolution.factors) {
      if (f < 1 || t.grid.width % f != 0) {
        throw ConfigError("sst_resolution factor " + std::to_string(f) + " does not divide the grid width " +
                          std::to_string(t.grid.width));
      }
    }
  }
  if (plot_day < 0 || plot_day >= split.test.length()) {
    throw ConfigError("plot_day must index a day of the test period");
  }
}

TruthConfig ExperimentConfig::truth_config() const {
  TruthConfig t = truth;
  t.seed = seed;
  return t;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t = train;
  t.seed = seed;
  return t;
}

const Variant & ExperimentConfig::variant(const std::string & name) const {
  for (const Variant & v : variants) {
    if (v.name == name) return v;
  }
  throw ConfigError("no variant named '" + name + "'");
}

// ---------------------------------------------------------------------------
// Presets

namespace {

Json mm_patch(const char * kind, int n_features) {
  Json mm = {{"kind", kind}, {"n_features", n_features}};
  if (std::strcmp(kind, "nonlinear") == 0) mm["n_layers"] = 2;
  return {{"cost", {{"mm", mm}}}};
}

Json variant_json(const std::string & name, Json patch) { return {{"name", name}, {"model", std::move(patch)}}; }

const Json kUnetSsh = {{"kind", "unet_direct"}, {"unet", {{"use_sst", false}}}};
const Json kUnetSshSst = {{"kind", "unet_direct"}, {"unet", {{"use_sst", true}}}};

}  // namespace

std::vector<std::string> preset_names() {
  return {"ordering", "ablation-mm", "mm-dims", "benchmark", "sst-resolution", "full-scale"};
}

Json preset_json(const std::string & name) {
  Json j = Json::object();
  j["run_name"] = name;
  if (name == "ordering") {
    j["variants"] = {variant_json("unet_ssh", kUnetSsh), variant_json("fourdvarnet_ssh", Json::object()),
                     variant_json("fourdvarnet_mm", mm_patch("nonlinear", 8))};
    j["sst_resolution"] = {{"variant", "fourdvarnet_mm"}, {"factors", {1, 2, 4}}};
  } else if (name == "ablation-mm") {
    Json sst = {{"cost", {{"formulation", "ssh_sst"}}}};
    Json sst_mm = mm_patch("nonlinear", 8);
    sst_mm["cost"]["formulation"] = "ssh_sst";
    j["variants"] = {variant_json("ssh_only", Json::object()),
                     variant_json("ssh_only_mm_linear", mm_patch("linear", 8)),
                     variant_json("ssh_only_mm_nonlinear", mm_patch("nonlinear", 8)),
                     variant_json("ssh_sst", sst), variant_json("ssh_sst_mm", sst_mm)};
  } else if (name == "mm-dims") {
    Json vs = Json::array();
    for (const char * kind : {"linear", "nonlinear"}) {
      for (int n : {1, 2, 3, 5, 10, 20, 50}) {
        vs.push_back(variant_json(std::string(kind) + "_n" + std::to_string(n), mm_patch(kind, n)));
      }
    }
    j["variants"] = vs;
  } else if (name == "benchmark" || name == "full-scale") {
    j["baselines"] = {"oi", "sqg"};
    j["oi_search"] = {{"spatial_lengthscales", {0.5, 1.0, 1.5}}, {"temporal_lengthscales", {3.5, 7.0, 14.0}}};
    const int nf = name == "benchmark" ? 8 : 20;
    Json nl = mm_patch("nonlinear", nf);
    if (name == "full-scale") nl["cost"]["mm"]["n_layers"] = 4;
    j["variants"] = {variant_json("unet_ssh", kUnetSsh), variant_json("unet_ssh_sst", kUnetSshSst),
                     variant_json("fourdvarnet_ssh", Json::object()),
                     variant_json("fourdvarnet_ssh_sst_linear", mm_patch("linear", nf)),
                     variant_json("fourdvarnet_ssh_sst_nonlinear", nl)};
    if (name == "full-scale") {
      const ModelConfig full;
      const TrainConfig t;
      j["model"] = {{"cost", {{"prior", {{"base_channels", full.cost.prior.base_channels}}}}},
                    {"solver",
                     {{"n_iterations", full.solver.n_iterations}, {"lstm_hidden", full.solver.lstm_hidden}}},
                    {"unet", {{"net", {{"base_channels", full.unet.net.base_channels}}}}}};
      j["train"] = {{"epochs", 400}, {"learning_rate", t.learning_rate}, {"crop_size", 0}, {"patience", 0}};
    }
  } else if (name == "sst-resolution") {
    j["variants"] = {variant_json("fourdvarnet_mm", mm_patch("nonlinear", 8))};
    j["sst_resolution"] = {{"variant", "fourdvarnet_mm"}, {"factors", {1, 2, 4, 8, 16}}};
  } else {
    std::string known;
    for (const std::string & n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
  }
  return j;
}

// ---------------------------------------------------------------------------
// Config documents

void merge_config(Json & target, const Json & patch) {
  if (!patch.is_object()) {
    target = patch;
    return;
  }
  if (!target.is_object()) target = Json::object();
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    const std::string & key = it.key();
    const Json & value = it.value();
    if (value.is_null()) {
      target.erase(key);
      continue;
    }
    if (key == "mm" && value.is_object() && value.contains("kind") && target.contains(key) &&
        target[key].is_object() && target[key].value("kind", Json()) != value["kind"]) {
      target[key] = value;
      continue;
    }
    merge_config(target[key], value);
  }
}

namespace {

Json read_json_file(const fs::path & path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception & e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
}

bool is_manifest(const Json & j) { return j.is_object() && j.value("format", "") == "varassim-manifest"; }

Json load_with_includes(const fs::path & path, std::vector<fs::path> & stack) {
  const fs::path canon = fs::weakly_canonical(path);
  if (std::find(stack.begin(), stack.end(), canon) != stack.end()) {
    throw ConfigError("config include cycle through '" + path.string() + "'");
  }
  Json j = read_json_file(path);
  if (!j.is_object()) throw ConfigError("config file '" + path.string() + "' must hold a JSON object");
  if (is_manifest(j)) {
    if (!j.contains("config")) throw ConfigError("manifest '" + path.string() + "' holds no config");
    return j.at("config");
  }
  stack.push_back(canon);
  Json merged = Json::object();
  if (j.contains("include")) {
    std::vector<std::string> includes;
    const Json & inc = j.at("include");
    if (inc.is_string()) {
      includes.push_back(inc.get<std::string>());
    } else if (inc.is_array() && std::all_of(inc.begin(), inc.end(), [](const Json & e) { return e.is_string(); })) {
      includes = inc.get<std::vector<std::string>>();
    } else {
      throw ConfigError("config key 'include' must be a path or a list of paths");
    }
    for (const std::string & p : includes) {
      fs::path sub = p;
      if (sub.is_relative()) sub = path.parent_path() / sub;
      merge_config(merged, load_with_includes(sub, stack));
    }
    j.erase("include");
  }
  merge_config(merged, j);
  stack.pop_back();
  return merged;
}

// Replaces a "preset" key by the preset document with the remaining keys merged on top.
Json resolve_preset(Json doc) {
  if (!doc.contains("preset")) return doc;
  if (!doc.at("preset").is_string()) throw ConfigError("config key 'preset' must be a string");
  Json base = preset_json(doc.at("preset").get<std::string>());
  doc.erase("preset");
  merge_config(base, doc);
  return base;
}

Json eval_json(const EvalConfig & e) {
  return {{"psd_threshold", e.psd_threshold}, {"per_window_mu", e.per_window_mu}};
}

void read_eval(config::Reader & r, EvalConfig & e) {
  r.read("psd_threshold", e.psd_threshold);
  r.read("per_window_mu", e.per_window_mu);
}

template <class T>
void read_section(config::Reader & r, const std::string & key, T & out) {
  if (!r.has(key)) return;
  config::Reader sub = r.section(key);
  config::read(sub, out);
  sub.finish();
}

void reject_seed(config::Reader & r, const std::string & section) {
  if (r.has(section) && r.raw(section).is_object() && r.raw(section).contains("seed")) {
    throw ConfigError("config key '" + section + ".seed': seeds derive from the top-level 'seed'");
  }
}

}  // namespace

Json load_config_document(const fs::path & path) {
  std::vector<fs::path> stack;
  return resolve_preset(load_with_includes(path, stack));
}

ExperimentConfig load_experiment_config(const fs::path & path) {
  return parse_experiment_config(load_config_document(path));
}

ExperimentConfig parse_experiment_config(const Json & input) {
  if (!input.is_object()) throw ConfigError("experiment config must be a JSON object");
  const Json doc = resolve_preset(input);
  ExperimentConfig c;
  config::Reader r(doc, "");
  r.read("run_name", c.run_name);
  if (r.has("output_root")) {
    std::string root;
    r.read("output_root", root);
    c.output_root = root;
  }
  r.read("seed", c.seed);
  reject_seed(r, "truth");
  reject_seed(r, "train");
  read_section(r, "truth", c.truth);
  read_section(r, "sampling", c.sampling);
  read_section(r, "split", c.split);
  r.read("window_length", c.window_length);
  r.read("train_stride", c.train_stride);
  r.read("validation_stride", c.validation_stride);
  read_section(r, "oi", c.oi);
  if (r.has("oi_search")) {
    config::Reader s = r.section("oi_search");
    s.read("spatial_lengthscales", c.oi_search.spatial_lengthscales);
    s.read("temporal_lengthscales", c.oi_search.temporal_lengthscales);
    s.finish();
  }
  read_section(r, "model", c.model);
  read_section(r, "train", c.train);
  r.read("baselines", c.baselines);
  r.read("sqg_cutoff", c.sqg_cutoff);
  if (r.has("sst_resolution")) {
    config::Reader s = r.section("sst_resolution");
    s.read("variant", c.sst_resolution.variant);
    s.read("factors", c.sst_resolution.factors);
    s.finish();
  }
  if (r.has("eval")) {
    config::Reader s = r.section("eval");
    read_eval(s, c.eval);
    s.finish();
  }
  r.read("plot_day", c.plot_day);
  if (r.has("variants")) {
    const Json & vs = r.raw("variants");
    if (!vs.is_array()) throw ConfigError("config key 'variants' must be a list");
    const Json base = config::to_json(c.model);
    for (std::size_t i = 0; i < vs.size(); ++i) {
      const std::string path = "variants[" + std::to_string(i) + "]";
      if (!vs[i].is_object()) throw ConfigError("config key '" + path + "' must be an object");
      config::Reader vr(vs[i], path);
      Variant v;
      vr.read("name", v.name);
      if (v.name.empty()) throw ConfigError("config key '" + path + ".name' is required");
      Json model = base;
      if (vr.has("model")) merge_config(model, vr.raw("model"));
      vr.finish();
      v.model = config::parse(model, ModelConfig{}, path + ".model");
      c.variants.push_back(std::move(v));
    }
  }
  r.finish();
  c.eval.window_length = c.window_length;
  c.validate();
  return c;
}

Json to_json(const ExperimentConfig & c) {
  Json truth = config::to_json(c.truth);
  truth.erase("seed");
  Json train = config::to_json(c.train);
  train.erase("seed");
  Json variants = Json::array();
  for (const Variant & v : c.variants) variants.push_back({{"name", v.name}, {"model", config::to_json(v.model)}});
  return {{"run_name", c.run_name},
          {"output_root", c.output_root.string()},
          {"seed", c.seed},
          {"truth", truth},
          {"sampling", config::to_json(c.sampling)},
          {"split", config::to_json(c.split)},
          {"window_length", c.window_length},
          {"train_stride", c.train_stride},
          {"validation_stride", c.validation_stride},
          {"oi", config::to_json(c.oi)},
          {"oi_search",
           {{"spatial_lengthscales", c.oi_search.spatial_lengthscales},
            {"temporal_lengthscales", c.oi_search.temporal_lengthscales}}},
          {"model", config::to_json(c.model)},
          {"variants", variants},
          {"train", train},
          {"baselines", c.baselines},
          {"sqg_cutoff", c.sqg_cutoff},
          {"sst_resolution", {{"variant", c.sst_resolution.variant}, {"factors", c.sst_resolution.factors}}},
          {"eval", eval_json(c.eval)},
          {"plot_day", c.plot_day}};
}

// ---------------------------------------------------------------------------
// Data

namespace {

void hash_bytes(std::uint64_t & h, const void * data, std::size_t n) {
  const auto * p = static_cast<const unsigned char *>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

void hash_tensor(std::uint64_t & h, const Tensor & t) {
  for (int d : t.shape()) hash_bytes(h, &d, sizeof d);
  hash_bytes(h, t.data(), t.size() * sizeof(double));
}

double range_mse(const SpaceTimeField & a, const SpaceTimeField & b) {
  return (a.values() - b.values()).sum_sq() / static_cast<double>(a.values().size());
}

}  // namespace

std::string data_hash(const Truth & truth, const ObservedSeries & obs) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const Tensor * t : {&truth.ssh.values(), &truth.sst.values(), &obs.ssh_obs.values(), &obs.mask.values(),
                           &obs.ssh_coarse.values(), &obs.sst.values()}) {
    hash_tensor(h, *t);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

OiConfig tune_oi(const Truth & truth, const Mask & mask, const SpaceTimeField & ssh_obs, const ExperimentConfig & cfg,
                 std::ostream * log) {
  OiConfig best = cfg.oi;
  const auto & sx = cfg.oi_search.spatial_lengthscales;
  const auto & st = cfg.oi_search.temporal_lengthscales;
  if (sx.empty() && st.empty()) return best;
  const std::vector<double> xs = sx.empty() ? std::vector<double>{cfg.oi.spatial_lengthscale} : sx;
  const std::vector<double> ts = st.empty() ? std::vector<double>{cfg.oi.temporal_lengthscale} : st;

  // Each daily map only sees observations within half_window_days, so the
  // validation days can be mapped from a padded slice of the series.
  const DayRange v = cfg.split.validation;
  const int n = ssh_obs.grid().time_steps;
  const int lo = std::max(0, v.begin - cfg.oi.half_window_days);
  const int hi = std::min(n, v.end + cfg.oi.half_window_days + 1);
  const SpaceTimeField y = slice_days(ssh_obs, lo, hi - lo);
  const Mask m = slice_days(mask, lo, hi - lo);
  const SpaceTimeField target = slice_days(truth.ssh, v.begin, v.length());

  double best_mse = std::numeric_limits<double>::infinity();
  for (double lx : xs) {
    for (double lt : ts) {
      OiConfig c = cfg.oi;
      c.spatial_lengthscale = lx;
      c.temporal_lengthscale = lt;
      const SpaceTimeField product = slice_days(oi_product(y, m, c), v.begin - lo, v.length());
      const double mse = range_mse(product, target);
      if (log) *log << "oi search: Lx " << lx << " Lt " << lt << " validation mse " << mse << "\n";
      if (mse < best_mse) {
        best_mse = mse;
        best = c;
      }
    }
  }
  return best;
}

ExperimentData generate_data(const ExperimentConfig & cfg, std::ostream * log) {
  cfg.validate();
  const TruthConfig tc = cfg.truth_config();
  Truth truth = generate_truth(tc);
  Mask mask = sampling_mask(tc.grid, cfg.sampling, cfg.sampling_seed());
  SpaceTimeField y = sample_ssh(truth, mask, cfg.sampling.obs_noise_std, cfg.noise_seed());
  const OiConfig oi = tune_oi(truth, mask, y, cfg, log);
  SpaceTimeField coarse = oi_product(y, mask, oi).renamed("ssh_coarse");
  ObservedSeries obs{std::move(y), mask, std::move(coarse), truth.sst};
  std::string hash = data_hash(truth, obs);
  return {std::move(truth), std::move(obs), oi, std::move(hash)};
}

fs::path field_file(const fs::path & dir, const std::string & name) { return dir / (name + ".vfa"); }

namespace {

Json manifest_base(const ExperimentData & data, const ExperimentConfig & cfg) {
  const char * env = std::getenv("VARASSIM_DETERMINISTIC");
  return {{"format", "varassim-manifest"},
          {"version", 1},
          {"run_name", cfg.run_name},
          {"seeds",
           {{"experiment", cfg.seed},
            {"truth", cfg.truth_config().seed},
            {"sampling", cfg.sampling_seed()},
            {"noise", cfg.noise_seed()},
            {"train", cfg.train_config().seed}}},
          {"split", config::to_json(cfg.split)},
          {"window_length", cfg.window_length},
          {"oi_selected", config::to_json(data.oi)},
          {"data_hash", data.hash},
          {"deterministic_env", env != nullptr && std::string(env) != "0"},
          {"config", to_json(cfg)}};
}

void write_text(const fs::path & path, const std::string & text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
}

}  // namespace

void save_data(const fs::path & dir, const ExperimentData & data, const ExperimentConfig & cfg) {
  fs::create_directories(dir / "truth");
  fs::create_directories(dir / "obs");
  save_field(field_file(dir / "truth", "ssh"), data.truth.ssh);
  save_field(field_file(dir / "truth", "sst"), data.truth.sst);
  save_field(field_file(dir / "obs", "ssh_alongtrack"), data.obs.ssh_obs, &data.obs.mask);
  save_field(field_file(dir / "obs", "ssh_coarse"), data.obs.ssh_coarse);
  save_field(field_file(dir / "obs", "sst"), data.obs.sst);
  write_text(dir / "manifest.json", manifest_base(data, cfg).dump(2) + "\n");
}

LoadedData load_data(const fs::path & dir) {
  const fs::path mpath = dir / "manifest.json";
  if (!fs::exists(mpath)) throw ConfigError("no manifest.json in data directory '" + dir.string() + "'");
  Json manifest;
  {
    std::ifstream in(mpath);
    try {
      manifest = Json::parse(in);
    } catch (const Json::exception & e) {
      throw FormatError("manifest '" + mpath.string() + "': " + e.what());
    }
  }
  if (!is_manifest(manifest)) throw FormatError("'" + mpath.string() + "' is not a varassim manifest");
  ExperimentConfig config = parse_experiment_config(manifest.at("config"));
  auto field = [&](const fs::path & sub, const std::string & name) {
    return load_field(field_file(dir / sub, name));
  };
  LoadedField along = field("obs", "ssh_alongtrack");
  if (!along.mask) throw FormatError("obs/ssh_alongtrack has no mask");
  ExperimentData d{Truth{field("truth", "ssh").field, field("truth", "sst").field},
                   ObservedSeries{along.field, *along.mask, field("obs", "ssh_coarse").field, field("obs", "sst").field},
                   config::parse(manifest.at("oi_selected"), OiConfig{}, "oi_selected"), ""};
  d.hash = data_hash(d.truth, d.obs);
  if (d.hash != manifest.at("data_hash").get<std::string>()) {
    throw FormatError("data files in '" + dir.string() + "' do not match the manifest hash");
  }
  return {std::move(d), std::move(config)};
}

Dataset experiment_dataset(const ExperimentData & data, const ExperimentConfig & cfg) {
  Dataset d;
  d.train = make_windows(data.truth, data.obs, cfg.split.train, cfg.window_length, cfg.train_stride);
  d.validation = make_windows(data.truth, data.obs, cfg.split.validation, cfg.window_length, cfg.validation_stride);
  return d;
}

TrainedModel train_variant(const ExperimentData & data, const ExperimentConfig & cfg, const Variant & variant,
                           std::ostream * log) {
  const Dataset d = experiment_dataset(data, cfg);
  TrainedModel init = init_model(variant.model, cfg.window_length, data.truth.ssh.grid().dx, cfg.seed);
  TrainedModel m = train(d, std::move(init), cfg.train_config(), {}, log);
  m.data_hash = data.hash;
  return m;
}

SpaceTimeField reconstruct_range(const ExperimentData & data, const TrainedModel & model, const DayRange & range,
                                 int sst_factor) {
  ObservedSeries series = data.obs;
  if (sst_factor != 1) series.sst = coarsen_sst(series.sst, sst_factor);
  const int T = model.time_steps;
  return assemble_series(range.begin, range.end, T, [&](int start) {
           const std::vector<Sample> w = make_windows(data.truth, series, {start, start + T}, T, 1);
           return reconstruct(w.front().obs, model);
         })
      .renamed("ssh_rec");
}

SpaceTimeField oi_range(const ExperimentData & data, const DayRange & range) {
  return slice_days(data.obs.ssh_coarse, range.begin, range.length()).renamed("ssh_oi");
}

SpaceTimeField sqg_range(const ExperimentData & data, const ExperimentConfig & cfg, const DayRange & range) {
  const DayRange tr = cfg.split.train;
  const SpaceTimeField oi = oi_range(data, tr);
  const SpaceTimeField sst = slice_days(data.obs.sst, tr.begin, tr.length());
  const SpaceTimeField truth = truth_range(data, tr);
  const double scale = fit_sqg_scale({SqgFitSample{&oi, &sst, &truth}}, cfg.sqg_cutoff);
  return sqg_complement(oi_range(data, range), slice_days(data.obs.sst, range.begin, range.length()),
                        cfg.sqg_cutoff, scale)
      .renamed("ssh_sqg");
}

SpaceTimeField truth_range(const ExperimentData & data, const DayRange & range) {
  return slice_days(data.truth.ssh, range.begin, range.length());
}

Tensor feature_maps(const ExperimentData & data, const TrainedModel & model, int start_day) {
  const auto * mm = std::get_if<MultimodalOpConfig>(&model.config.cost.mm);
  if (model.config.kind != ModelKind::fourdvarnet || mm == nullptr) {
    throw ConfigError("model has no trainable multimodal features");
  }
  const int T = model.time_steps;
  const int n = data.truth.ssh.grid().time_steps;
  if (start_day < 0 || start_day + T > n) {
    throw ConfigError("window starting at day " + std::to_string(start_day) + " is outside the series");
  }
  const std::vector<Sample> w = make_windows(data.truth, data.obs, {start_day, start_day + T}, T, 1);
  const WindowObs obs = model.norm.normalize(w.front().obs);
  const SpaceTimeField sst(w.front().obs.grid(), *obs.y_sst, "sst", "1");
  return g1_features(sst, model.params, *mm);
}

// ---------------------------------------------------------------------------
// Pipeline

void check_writable(const fs::path & path, bool force) {
  if (force || !fs::exists(path)) return;
  if (fs::is_directory(path) && fs::is_empty(path)) return;
  throw ConfigError("'" + path.string() + "' already exists; pass --force to overwrite");
}

namespace {

template <class F>
auto stage(const std::string & name, std::ostream * log, F && f) {
  if (log) *log << "[" << name << "]\n" << std::flush;
  try {
    return f();
  } catch (const StageError &) {
    throw;
  } catch (const std::exception & e) {
    throw StageError(name, e.what());
  }
}

void write_reports(const fs::path & dir, const std::string & stem, const std::vector<MetricReport> & reports) {
  write_text(dir / (stem + ".csv"), report_csv(reports));
  write_text(dir / (stem + ".json"), report_json(reports).dump(2) + "\n");
}

}  // namespace

std::vector<fs::path> write_feature_pngs(const Tensor & features, const fs::path & dir, const std::string & prefix) {
  const int n = features.dim(0), T = features.dim(1), W = features.dim(2);
  const std::size_t plane = static_cast<std::size_t>(W) * W;
  const std::size_t offset = static_cast<std::size_t>(T / 2) * plane;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int k = 0; k < n; ++k) {
    const double * p = features.data() + k * T * plane + offset;
    for (std::size_t i = 0; i < plane; ++i) {
      lo = std::min(lo, p[i]);
      hi = std::max(hi, p[i]);
    }
  }
  std::vector<fs::path> files;
  for (int k = 0; k < n; ++k) {
    Tensor frame({W, W});
    std::copy(features.data() + k * T * plane + offset, features.data() + k * T * plane + offset + plane,
              frame.data());
    files.push_back(dir / (prefix + "_" + std::to_string(k) + ".png"));
    write_png(files.back(), frame, lo, hi);
  }
  return files;
}

ExperimentResult run_experiment(const ExperimentConfig & cfg, const fs::path & dir, const RunOptions & opts) {
  cfg.validate();
  check_writable(dir, opts.force);
  std::ostream * log = opts.log;
  ExperimentResult result;
  auto rel = [&](const fs::path & p) { return fs::relative(p, dir).generic_string(); };
  const DayRange test = cfg.split.test;

  const ExperimentData data = stage("gen-data", log, [&] {
    ExperimentData d = generate_data(cfg, log);
    save_data(dir, d, cfg);
    return d;
  });
  for (const char * f : {"truth/ssh.vfa", "truth/sst.vfa", "obs/ssh_alongtrack.vfa", "obs/ssh_coarse.vfa",
                         "obs/sst.vfa"}) {
    result.artifacts.push_back(f);
  }

  std::vector<NamedField> methods;
  auto save_recon = [&](const std::string & name, const SpaceTimeField & field) {
    const fs::path p = field_file(dir / "recon" / name, "ssh");
    fs::create_directories(p.parent_path());
    save_field(p, field, nullptr, test.begin);
    result.artifacts.push_back(rel(p));
  };

  for (const std::string & b : cfg.baselines) {
    SpaceTimeField f = stage("baseline:" + b, log, [&] {
      return b == "oi" ? oi_range(data, test) : sqg_range(data, cfg, test);
    });
    save_recon(b, f);
    methods.push_back({b, std::move(f)});
  }

  auto find_method = [&](const std::string & name) -> const SpaceTimeField & {
    for (const NamedField & nf : methods) {
      if (nf.name == name) return nf.field;
    }
    throw ConfigError("no reconstruction named '" + name + "'");
  };

  std::map<std::string, TrainedModel> models;
  for (const Variant & v : cfg.variants) {
    TrainedModel m = stage("train:" + v.name, log, [&] {
      const fs::path ckpt = dir / "models" / (v.name + ".ckpt");
      fs::create_directories(ckpt.parent_path());
      std::ofstream jsonl(dir / "models" / (v.name + ".log.jsonl"));
      TrainedModel tm = train_variant(data, cfg, v, &jsonl);
      save_model(tm, ckpt);
      return tm;
    });
    result.artifacts.push_back("models/" + v.name + ".ckpt");
    result.artifacts.push_back("models/" + v.name + ".log.jsonl");
    SpaceTimeField f = stage("reconstruct:" + v.name, log, [&] { return reconstruct_range(data, m, test); });
    save_recon(v.name, f);
    methods.push_back({v.name, std::move(f)});
    models.emplace(v.name, std::move(m));
  }

  const SpaceTimeField truth = truth_range(data, test);
  result.reports = stage("eval", log, [&] {
    std::vector<MetricReport> r = report(methods, truth, "oi", cfg.eval);
    write_reports(dir / "report", "report", r);
    return r;
  });
  result.artifacts.push_back("report/report.csv");
  result.artifacts.push_back("report/report.json");

  if (!cfg.sst_resolution.variant.empty()) {
    result.sst_reports = stage("sst-resolution", log, [&] {
      const TrainedModel & m = models.at(cfg.sst_resolution.variant);
      std::vector<NamedField> rows{methods.front()};
      for (int f : cfg.sst_resolution.factors) {
        const std::string name = cfg.sst_resolution.variant + "_sst_x" + std::to_string(f);
        SpaceTimeField field = f == 1 ? find_method(cfg.sst_resolution.variant) : reconstruct_range(data, m, test, f);
        if (f != 1) save_recon(name, field);
        rows.push_back({name, std::move(field)});
      }
      std::vector<MetricReport> r = report(rows, truth, "oi", cfg.eval);
      r.erase(r.begin());
      write_reports(dir / "report", "sst_resolution", r);
      return r;
    });
    result.artifacts.push_back("report/sst_resolution.csv");
    result.artifacts.push_back("report/sst_resolution.json");
  }

  stage("plot", log, [&] {
    std::vector<NamedField> shown{{"truth", truth}};
    shown.insert(shown.end(), methods.begin(), methods.end());
    const fs::path maps = dir / "report" / "maps";
    PlotSet ps = plot_fields(shown, cfg.plot_day, maps);
    for (const Variant & v : cfg.variants) {
      if (v.model.kind != ModelKind::fourdvarnet || !std::holds_alternative<MultimodalOpConfig>(v.model.cost.mm)) {
        continue;
      }
      const int T = cfg.window_length;
      const int start = std::clamp(test.begin + cfg.plot_day - T / 2, test.begin, test.end - T);
      for (fs::path & p : write_feature_pngs(feature_maps(data, models.at(v.name), start), maps, "features_" + v.name)) {
        ps.files.push_back(std::move(p));
      }
    }
    for (const fs::path & p : ps.files) result.artifacts.push_back(rel(p));
    return 0;
  });

  Json manifest = manifest_base(data, cfg);
  manifest["artifacts"] = result.artifacts;
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

}  // namespace varassim
