/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "varassim/autodiff.hpp"
#include "varassim/baselines.hpp"
#include "varassim/core_types.hpp"
#include "varassim/osse_data.hpp"
#include "varassim/params.hpp"
#include "varassim/solver.hpp"
#include "varassim/variational_cost.hpp"

namespace varassim {

enum class ModelKind { fourdvarnet, unet_direct };
std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string & s);

struct ModelConfig {
  ModelKind kind = ModelKind::fourdvarnet;
  VariationalCostConfig cost;
  SolverConfig solver;
  UnetDirectConfig unet;

  void validate() const;
  bool needs_sst() const;
};

enum class SelectionMetric { val_mse, val_mu };
std::string to_string(SelectionMetric m);
SelectionMetric selection_metric_from_string(const std::string & s);

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 4;
  double nu_x = 1.0;
  double nu_grad = 10.0;
  double nu_phi = 0.1;
  SelectionMetric selection = SelectionMetric::val_mse;
  std::uint64_t seed = 1;
  /// Epochs without validation improvement before stopping; 0 disables.
  int patience = 15;
  /// Side of the random square crop taken from each training window; 0 keeps full windows.
  int crop_size = 0;
  /// Caps the number of batches per epoch; 0 uses every training window once.
  int max_batches_per_epoch = 0;
  /// Global gradient-norm clip; 0 disables.
  double grad_clip = 0.0;
  /// Parameter-name prefixes to optimize; empty means all.
  std::vector<std::string> trainable;

  void validate() const;
};

/// Affine map between physical and model units, fitted on the training split.
struct Normalizer {
  double ssh_mean = 0.0;
  double ssh_std = 1.0;
  double sst_mean = 0.0;
  double sst_std = 1.0;

  static Normalizer fit(const std::vector<Sample> & samples);
  WindowObs normalize(const ObservationSet & obs) const;
  Tensor ssh_to_model(const Tensor & ssh) const;
  Tensor ssh_from_model(const Tensor & ssh) const;
  friend bool operator==(const Normalizer &, const Normalizer &) = default;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  ///< per-window mean of the weighted total
  double loss_x = 0.0;
  double loss_grad_x = 0.0;
  double loss_phi = 0.0;
  double val_mse = 0.0;
  double val_mu = 0.0;
  friend bool operator==(const EpochRecord &, const EpochRecord &) = default;
};

struct TrainedModel {
  ModelConfig config;
  TrainConfig train;
  int time_steps = 7;
  double dx = 0.05;
  ParamSet params;
  Normalizer norm;
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  std::string data_hash;
};

/// Fresh parameters for `config` on windows of `time_steps` days.
TrainedModel init_model(const ModelConfig & config, int time_steps, double dx, std::uint64_t seed);

/// One window in model units, ready for the losses.
struct TrainingWindow {
  WindowObs obs;
  Tensor truth_ssh;    ///< [T,W,W]
  Tensor truth_state;  ///< packed truth state for the prior term (empty for the direct network)
};

TrainingWindow prepare_window(const Sample & sample, const TrainedModel & model);
/// Square sub-window of side `size` at (y0, x0).
TrainingWindow crop_window(const TrainingWindow & w, int y0, int x0, int size);

/// Packed truth state: coarse = coarse product, both anomalies = truth - coarse, SST = observed SST.
Tensor truth_state(const WindowObs & obs, const Tensor & truth_ssh, StateKind kind);

namespace terms {

ad::Var loss_x(const ad::Var & truth_ssh, const ad::Var & recon_ssh);
ad::Var loss_grad_x(const ad::Var & truth_ssh, const ad::Var & recon_ssh);
ad::Var loss_phi(const ad::Var & truth_state, const ad::Var & recon_state, const ParamSet & params,
                 const PriorConfig & prior);

/// Model output for one window: SSH [T,W,W] and, for the variational model, the final state.
struct Forward {
  ad::Var ssh;
  ad::Var state;
};
Forward forward(const WindowObs & obs, const ParamSet & params, const ModelConfig & config, bool training);

struct LossTerms {
  ad::Var total;
  ad::Var x;
  ad::Var grad_x;
  ad::Var phi;
};
LossTerms total_loss(const std::vector<TrainingWindow> & batch, const ParamSet & params, const ModelConfig & config,
                     const TrainConfig & train);

}  // namespace terms

double loss_x(const SpaceTimeField & truth, const SpaceTimeField & recon);
double loss_grad_x(const SpaceTimeField & truth, const SpaceTimeField & recon);
double loss_phi(const State & truth, const State & recon, const ParamSet & params, const PriorConfig & prior);

/// Reconstructed SSH of one window in physical units.
SpaceTimeField reconstruct(const ObservationSet & obs, const TrainedModel & model);
/// Final packed state (model units) of the variational model.
Tensor reconstruct_state(const ObservationSet & obs, const TrainedModel & model);

struct ValidationScore {
  double mse = 0.0;
  double mu = 0.0;
};
/// Scores the model on validation windows; receives the epoch and current model.
using Validator = std::function<ValidationScore(int epoch, const TrainedModel & model)>;

ValidationScore validation_score(const std::vector<Sample> & samples, const TrainedModel & model);

/// Index of the best record (lowest val_mse or highest val_mu); ties keep the earliest.
int select_best(const std::vector<EpochRecord> & history, SelectionMetric metric);

/// Adam on total_loss with per-epoch validation; returns the best-scoring parameters.
/// The normalizer of `init` is refitted on the training split. `log` receives one
/// JSON line per epoch.
TrainedModel train(const Dataset & data, TrainedModel init, const TrainConfig & cfg,
                   const Validator & validator = {}, std::ostream * log = nullptr);

void save_model(const TrainedModel & model, const std::filesystem::path & path);
TrainedModel load_model(const std::filesystem::path & path);

}  // namespace varassim
