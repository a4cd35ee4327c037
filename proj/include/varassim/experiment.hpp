/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "varassim/array_io.hpp"
#include "varassim/evaluation.hpp"
#include "varassim/oi.hpp"
#include "varassim/osse_data.hpp"
#include "varassim/training.hpp"

namespace varassim {

/// A failed pipeline stage; what() names the stage and the cause.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string & cause);
  const std::string & stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// Reduced network sizes and training schedule for minutes-scale CPU runs.
ModelConfig desk_model_config();
TrainConfig desk_train_config();
OiConfig desk_oi_config();

struct Variant {
  std::string name;
  ModelConfig model;
};

struct SstResolutionConfig {
  std::string variant;     ///< empty disables the sweep
  std::vector<int> factors{1, 2, 4, 8, 16};
};

/// Candidate OI lengthscales scored on the validation days; empty keeps `oi` as is.
struct OiSearchConfig {
  std::vector<double> spatial_lengthscales;
  std::vector<double> temporal_lengthscales;
};

/// Everything needed to regenerate data, train every variant and score it.
/// `seed` drives the truth, the sampling pattern, model initialisation and training.
struct ExperimentConfig {
  std::string run_name = "desk";
  std::filesystem::path output_root = "runs";
  std::uint64_t seed = 1;
  TruthConfig truth;
  SamplingConfig sampling;
  DatasetSplit split;
  int window_length = 7;
  int train_stride = 1;
  int validation_stride = 2;
  OiConfig oi = desk_oi_config();
  OiSearchConfig oi_search;
  ModelConfig model = desk_model_config();  ///< base that variant patches apply to
  std::vector<Variant> variants;
  TrainConfig train = desk_train_config();
  std::vector<std::string> baselines{"oi"};  ///< any of "oi", "sqg"
  double sqg_cutoff = 1.2;                   ///< degrees
  SstResolutionConfig sst_resolution;
  EvalConfig eval;
  int plot_day = 10;  ///< day index inside the test period

  void validate() const;
  /// Truth config with the experiment seed applied.
  TruthConfig truth_config() const;
  TrainConfig train_config() const;
  std::uint64_t sampling_seed() const noexcept { return seed + 100; }
  std::uint64_t noise_seed() const noexcept { return seed + 200; }
  const Variant & variant(const std::string & name) const;
};

std::vector<std::string> preset_names();
/// Preset as a config document (variants given as patches of "model").
Json preset_json(const std::string & name);

/// Reads a config document. "include" (a path or list, relative to the file)
/// pulls in other documents first; "preset" starts from a preset; the file's
/// own keys are merged last. A manifest written by run_experiment is accepted
/// and yields its recorded config. Unknown keys raise ConfigError.
ExperimentConfig load_experiment_config(const std::filesystem::path & path);
/// Merged document, before parsing.
Json load_config_document(const std::filesystem::path & path);
ExperimentConfig parse_experiment_config(const Json & doc);
/// Fully resolved form; parse_experiment_config(to_json(c)) == c.
Json to_json(const ExperimentConfig & c);

/// RFC 7386 merge, except that a "mm" object whose "kind" changes is replaced whole.
void merge_config(Json & target, const Json & patch);

struct ExperimentData {
  Truth truth;
  ObservedSeries obs;
  OiConfig oi;  ///< configuration that produced obs.ssh_coarse
  std::string hash;
};

/// Hex FNV-1a digest of the truth and observation arrays.
std::string data_hash(const Truth & truth, const ObservedSeries & obs);

/// Picks OI lengthscales by validation MSE over the search grid.
OiConfig tune_oi(const Truth & truth, const Mask & mask, const SpaceTimeField & ssh_obs, const ExperimentConfig & cfg,
                 std::ostream * log = nullptr);
ExperimentData generate_data(const ExperimentConfig & cfg, std::ostream * log = nullptr);

/// truth/ and obs/ field files plus manifest.json.
void save_data(const std::filesystem::path & dir, const ExperimentData & data, const ExperimentConfig & cfg);
struct LoadedData {
  ExperimentData data;
  ExperimentConfig config;
};
LoadedData load_data(const std::filesystem::path & dir);

/// Training and validation windows; the test split stays empty.
Dataset experiment_dataset(const ExperimentData & data, const ExperimentConfig & cfg);

TrainedModel train_variant(const ExperimentData & data, const ExperimentConfig & cfg, const Variant & variant,
                           std::ostream * log = nullptr);

/// Daily reconstruction over `range`, optionally with SST coarsened by `sst_factor`.
SpaceTimeField reconstruct_range(const ExperimentData & data, const TrainedModel & model, const DayRange & range,
                                 int sst_factor = 1);
SpaceTimeField oi_range(const ExperimentData & data, const DayRange & range);
/// Low band of the OI product plus the SST-derived high band, scale fitted on the training days.
SpaceTimeField sqg_range(const ExperimentData & data, const ExperimentConfig & cfg, const DayRange & range);
SpaceTimeField truth_range(const ExperimentData & data, const DayRange & range);

/// G1 feature stack [N,T,W,W] of the window starting at `start_day`.
Tensor feature_maps(const ExperimentData & data, const TrainedModel & model, int start_day);

/// PNG of the middle frame of each feature channel, `dir`/`prefix`_<k>.png, one shared colour range.
std::vector<std::filesystem::path> write_feature_pngs(const Tensor & features, const std::filesystem::path & dir,
                                                      const std::string & prefix);

struct ExperimentResult {
  std::vector<MetricReport> reports;
  std::vector<MetricReport> sst_reports;  ///< one row per SST factor
  std::vector<std::string> artifacts;     ///< relative to the run directory
};

struct RunOptions {
  bool force = false;
  std::ostream * log = nullptr;
};

/// gen-data, train, reconstruct, baselines, eval into `dir`. Stage failures
/// raise StageError and leave earlier artifacts in place.
ExperimentResult run_experiment(const ExperimentConfig & cfg, const std::filesystem::path & dir,
                                const RunOptions & opts = {});

/// Throws ConfigError when `path` exists (a non-empty directory or a file) and `force` is off.
void check_writable(const std::filesystem::path & path, bool force);

/// `dir`/`name`.vfa
std::filesystem::path field_file(const std::filesystem::path & dir, const std::string & name);

}  // namespace varassim
