/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/config_io.hpp"

#include "varassim/errors.hpp"

namespace varassim::config {

Reader::Reader(const Json & j, std::string path) : j_(j), path_(std::move(path)) {
  if (!j_.is_object()) throw ConfigError("config section '" + (path_.empty() ? "<root>" : path_) + "' must be an object");
}

const Json & Reader::raw(const std::string & key) {
  seen_.insert(key);
  return j_.at(key);
}

Reader Reader::section(const std::string & key) {
  seen_.insert(key);
  return Reader(j_.at(key), key_path(key));
}

void Reader::finish() const {
  for (const auto & item : j_.items()) {
    if (!seen_.count(item.key())) throw ConfigError("unknown config key '" + key_path(item.key()) + "'");
  }
}

void Reader::throw_type_error(const std::string & key, const std::string & what) const {
  throw ConfigError("config key '" + key_path(key) + "': " + what);
}

namespace {

// Reads an enum stored as a string through its parser.
template <class E, class Parse>
void read_enum(Reader & r, const std::string & key, E & out, Parse parse) {
  if (!r.has(key)) return;
  std::string s;
  r.read(key, s);
  try {
    out = parse(s);
  } catch (const ConfigError & e) {
    throw ConfigError("config key '" + r.key_path(key) + "': " + e.what());
  }
}

template <class T>
void read_section(Reader & r, const std::string & key, T & out) {
  if (!r.has(key)) return;
  Reader sub = r.section(key);
  read(sub, out);
  sub.finish();
}

Json to_json(const DayRange & d) { return Json::array({d.begin, d.end}); }

void read_range(Reader & r, const std::string & key, DayRange & d) {
  if (!r.has(key)) return;
  std::vector<int> v;
  r.read(key, v);
  if (v.size() != 2) throw ConfigError("config key '" + r.key_path(key) + "' must be [begin, end]");
  d = {v[0], v[1]};
}

std::string activation_string(Activation a) { return a == Activation::tanh ? "tanh" : "relu"; }
Activation activation_from_string(const std::string & s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  throw ConfigError("unknown activation '" + s + "'");
}

}  // namespace

Json to_json(const SpaceTimeGrid & c) {
  return {{"width", c.width}, {"time_steps", c.time_steps}, {"dx", c.dx}, {"dt", c.dt}};
}
void read(Reader & r, SpaceTimeGrid & c) {
  r.read("width", c.width);
  r.read("time_steps", c.time_steps);
  r.read("dx", c.dx);
  r.read("dt", c.dt);
}

Json to_json(const SqgConfig & c) {
  return {{"bandpass_low", c.bandpass_low}, {"bandpass_high", c.bandpass_high}, {"transfer_scale", c.transfer_scale}};
}
void read(Reader & r, SqgConfig & c) {
  r.read("bandpass_low", c.bandpass_low);
  r.read("bandpass_high", c.bandpass_high);
  r.read("transfer_scale", c.transfer_scale);
}

Json to_json(const TruthConfig & c) {
  return {{"seed", c.seed},
          {"grid", to_json(c.grid)},
          {"spectral_slope", c.spectral_slope},
          {"advection_speed", c.advection_speed},
          {"phase_rotation_rate", c.phase_rotation_rate},
          {"ssh_rms", c.ssh_rms},
          {"sst_coupling", to_string(c.sst_coupling)},
          {"sst_noise_amplitude", c.sst_noise_amplitude},
          {"sqg", to_json(c.sqg)}};
}
void read(Reader & r, TruthConfig & c) {
  r.read("seed", c.seed);
  read_section(r, "grid", c.grid);
  r.read("spectral_slope", c.spectral_slope);
  r.read("advection_speed", c.advection_speed);
  r.read("phase_rotation_rate", c.phase_rotation_rate);
  r.read("ssh_rms", c.ssh_rms);
  read_enum(r, "sst_coupling", c.sst_coupling, sst_coupling_from_string);
  r.read("sst_noise_amplitude", c.sst_noise_amplitude);
  read_section(r, "sqg", c.sqg);
}

Json to_json(const SamplingConfig & c) {
  return {{"n_nadir_tracks_per_day", c.n_nadir_tracks_per_day},
          {"track_angle_min", c.track_angle_min},
          {"track_angle_max", c.track_angle_max},
          {"track_width", c.track_width},
          {"swath_enabled", c.swath_enabled},
          {"swath_width", c.swath_width},
          {"swath_gap", c.swath_gap},
          {"swath_repeat_days", c.swath_repeat_days},
          {"obs_noise_std", c.obs_noise_std}};
}
void read(Reader & r, SamplingConfig & c) {
  r.read("n_nadir_tracks_per_day", c.n_nadir_tracks_per_day);
  r.read("track_angle_min", c.track_angle_min);
  r.read("track_angle_max", c.track_angle_max);
  r.read("track_width", c.track_width);
  r.read("swath_enabled", c.swath_enabled);
  r.read("swath_width", c.swath_width);
  r.read("swath_gap", c.swath_gap);
  r.read("swath_repeat_days", c.swath_repeat_days);
  r.read("obs_noise_std", c.obs_noise_std);
}

Json to_json(const DatasetSplit & c) {
  return {{"train", to_json(c.train)}, {"validation", to_json(c.validation)}, {"test", to_json(c.test)}};
}
void read(Reader & r, DatasetSplit & c) {
  read_range(r, "train", c.train);
  read_range(r, "validation", c.validation);
  read_range(r, "test", c.test);
}

Json to_json(const OiConfig & c) {
  return {{"spatial_lengthscale", c.spatial_lengthscale},
          {"temporal_lengthscale", c.temporal_lengthscale},
          {"obs_noise_variance", c.obs_noise_variance},
          {"prior_variance", c.prior_variance},
          {"max_obs_per_window", c.max_obs_per_window},
          {"half_window_days", c.half_window_days}};
}
void read(Reader & r, OiConfig & c) {
  r.read("spatial_lengthscale", c.spatial_lengthscale);
  r.read("temporal_lengthscale", c.temporal_lengthscale);
  r.read("obs_noise_variance", c.obs_noise_variance);
  r.read("prior_variance", c.prior_variance);
  r.read("max_obs_per_window", c.max_obs_per_window);
  r.read("half_window_days", c.half_window_days);
}

Json to_json(const PriorConfig & c) {
  return {{"kind", to_string(c.kind)},
          {"base_channels", c.base_channels},
          {"bilinear_blocks", c.bilinear_blocks},
          {"diffusion_coefficient", c.diffusion_coefficient}};
}
void read(Reader & r, PriorConfig & c) {
  read_enum(r, "kind", c.kind, prior_kind_from_string);
  r.read("base_channels", c.base_channels);
  r.read("bilinear_blocks", c.bilinear_blocks);
  r.read("diffusion_coefficient", c.diffusion_coefficient);
}

Json to_json(const MultimodalOpConfig & c) {
  return {{"kind", to_string(c.kind)},
          {"n_features", c.n_features},
          {"g1_time_kernel", c.g1_time_kernel},
          {"g1_space_kernel", c.g1_space_kernel},
          {"g2_kernel", c.g2_kernel},
          {"n_layers", c.n_layers},
          {"activation", activation_string(c.activation)},
          {"g2_full_state", c.g2_full_state}};
}
void read(Reader & r, MultimodalOpConfig & c) {
  read_enum(r, "kind", c.kind, mm_kind_from_string);
  // One layer is the only valid depth for the linear operator, so it is also its default.
  if (c.kind == MmKind::linear) c.n_layers = 1;
  r.read("n_features", c.n_features);
  r.read("g1_time_kernel", c.g1_time_kernel);
  r.read("g1_space_kernel", c.g1_space_kernel);
  r.read("g2_kernel", c.g2_kernel);
  r.read("n_layers", c.n_layers);
  read_enum(r, "activation", c.activation, activation_from_string);
  r.read("g2_full_state", c.g2_full_state);
}

Json to_json(const MmConfig & c) {
  if (const auto * m = std::get_if<MultimodalOpConfig>(&c)) return to_json(*m);
  if (const auto * s = std::get_if<SqgConfig>(&c)) {
    Json j = {{"kind", "sqg"}};
    j.update(to_json(*s));
    return j;
  }
  return {{"kind", "none"}};
}
// The "kind" key selects the alternative: none, linear, nonlinear or sqg.
void read(Reader & r, MmConfig & c) {
  std::string kind = "none";
  if (const auto * m = std::get_if<MultimodalOpConfig>(&c)) kind = to_string(m->kind);
  if (std::holds_alternative<SqgConfig>(c)) kind = "sqg";
  r.read("kind", kind);
  if (kind == "none") {
    c = std::monostate{};
  } else if (kind == "sqg") {
    SqgConfig s = std::holds_alternative<SqgConfig>(c) ? std::get<SqgConfig>(c) : SqgConfig{};
    read(r, s);
    c = s;
  } else if (kind == "linear" || kind == "nonlinear") {
    MultimodalOpConfig m = std::holds_alternative<MultimodalOpConfig>(c) ? std::get<MultimodalOpConfig>(c)
                                                                         : MultimodalOpConfig{};
    m.kind = mm_kind_from_string(kind);
    read(r, m);
    c = m;
  } else {
    throw ConfigError("config key '" + r.key_path("kind") + "': unknown multimodal term '" + kind + "'");
  }
}

Json to_json(const VariationalCostConfig & c) {
  return {{"formulation", to_string(c.formulation)},
          {"lambda1", c.lambda1},
          {"lambda2", c.lambda2},
          {"lambda3", c.lambda3},
          {"gamma", c.gamma},
          {"mm", to_json(c.mm)},
          {"weights_trainable", c.weights_trainable},
          {"gamma_trainable", c.gamma_trainable},
          {"prior", to_json(c.prior)}};
}
void read(Reader & r, VariationalCostConfig & c) {
  read_enum(r, "formulation", c.formulation, state_kind_from_string);
  r.read("lambda1", c.lambda1);
  r.read("lambda2", c.lambda2);
  r.read("lambda3", c.lambda3);
  r.read("gamma", c.gamma);
  read_section(r, "mm", c.mm);
  r.read("weights_trainable", c.weights_trainable);
  r.read("gamma_trainable", c.gamma_trainable);
  read_section(r, "prior", c.prior);
}

Json to_json(const SolverConfig & c) {
  return {{"kind", to_string(c.kind)},
          {"n_iterations", c.n_iterations},
          {"lstm_hidden", c.lstm_hidden},
          {"lstm_kernel", c.lstm_kernel},
          {"gd_step", c.gd_step},
          {"normalize_gradient", c.normalize_gradient},
          {"inference_iterations", c.inference_iterations}};
}
void read(Reader & r, SolverConfig & c) {
  read_enum(r, "kind", c.kind, solver_kind_from_string);
  r.read("n_iterations", c.n_iterations);
  r.read("lstm_hidden", c.lstm_hidden);
  r.read("lstm_kernel", c.lstm_kernel);
  r.read("gd_step", c.gd_step);
  r.read("normalize_gradient", c.normalize_gradient);
  r.read("inference_iterations", c.inference_iterations);
}

Json to_json(const UnetDirectConfig & c) { return {{"use_sst", c.use_sst}, {"net", to_json(c.net)}}; }
void read(Reader & r, UnetDirectConfig & c) {
  r.read("use_sst", c.use_sst);
  read_section(r, "net", c.net);
}

Json to_json(const ModelConfig & c) {
  return {{"kind", to_string(c.kind)}, {"cost", to_json(c.cost)}, {"solver", to_json(c.solver)},
          {"unet", to_json(c.unet)}};
}
void read(Reader & r, ModelConfig & c) {
  read_enum(r, "kind", c.kind, model_kind_from_string);
  read_section(r, "cost", c.cost);
  read_section(r, "solver", c.solver);
  read_section(r, "unet", c.unet);
}

Json to_json(const TrainConfig & c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"batch_size", c.batch_size},
          {"nu_x", c.nu_x},
          {"nu_grad", c.nu_grad},
          {"nu_phi", c.nu_phi},
          {"selection", to_string(c.selection)},
          {"seed", c.seed},
          {"patience", c.patience},
          {"crop_size", c.crop_size},
          {"max_batches_per_epoch", c.max_batches_per_epoch},
          {"grad_clip", c.grad_clip},
          {"trainable", c.trainable}};
}
void read(Reader & r, TrainConfig & c) {
  r.read("epochs", c.epochs);
  r.read("learning_rate", c.learning_rate);
  r.read("batch_size", c.batch_size);
  r.read("nu_x", c.nu_x);
  r.read("nu_grad", c.nu_grad);
  r.read("nu_phi", c.nu_phi);
  read_enum(r, "selection", c.selection, selection_metric_from_string);
  r.read("seed", c.seed);
  r.read("patience", c.patience);
  r.read("crop_size", c.crop_size);
  r.read("max_batches_per_epoch", c.max_batches_per_epoch);
  r.read("grad_clip", c.grad_clip);
  r.read("trainable", c.trainable);
}

Json to_json(const Normalizer & n) {
  return {{"ssh_mean", n.ssh_mean}, {"ssh_std", n.ssh_std}, {"sst_mean", n.sst_mean}, {"sst_std", n.sst_std}};
}
void read(Reader & r, Normalizer & n) {
  r.read("ssh_mean", n.ssh_mean);
  r.read("ssh_std", n.ssh_std);
  r.read("sst_mean", n.sst_mean);
  r.read("sst_std", n.sst_std);
}

Json to_json(const EpochRecord & e) {
  return {{"epoch", e.epoch},     {"loss", e.loss},       {"loss_x", e.loss_x}, {"loss_grad_x", e.loss_grad_x},
          {"loss_phi", e.loss_phi}, {"val_mse", e.val_mse}, {"val_mu", e.val_mu}};
}
void read(Reader & r, EpochRecord & e) {
  r.read("epoch", e.epoch);
  r.read("loss", e.loss);
  r.read("loss_x", e.loss_x);
  r.read("loss_grad_x", e.loss_grad_x);
  r.read("loss_phi", e.loss_phi);
  r.read("val_mse", e.val_mse);
  r.read("val_mu", e.val_mu);
}

}  // namespace varassim::config
