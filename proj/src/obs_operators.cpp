/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/obs_operators.hpp"

#include <cmath>
#include <numbers>

#include "varassim/errors.hpp"
#include "varassim/spectral.hpp"

namespace varassim {

using ad::Var;

void MultimodalOpConfig::validate() const {
  if (n_features < 1) throw ConfigError("mm.n_features must be >= 1");
  if (g1_time_kernel < 1 || g1_time_kernel % 2 == 0 || g1_space_kernel < 1 || g1_space_kernel % 2 == 0 ||
      g2_kernel < 1 || g2_kernel % 2 == 0) {
    throw ConfigError("mm kernel extents must be odd and positive");
  }
  if (kind == MmKind::linear && n_layers != 1) throw ConfigError("linear mm operators have exactly one layer");
  if (n_layers < 1) throw ConfigError("mm.n_layers must be >= 1");
}

void SqgConfig::validate(double nyquist) const {
  if (!(bandpass_low >= 0.0) || !(bandpass_low < bandpass_high) || bandpass_high > nyquist * (1 + 1e-12)) {
    throw ConfigError("sqg band must satisfy 0 <= low < high <= Nyquist (" + std::to_string(nyquist) + ")");
  }
}

std::string to_string(MmKind kind) { return kind == MmKind::linear ? "linear" : "nonlinear"; }

MmKind mm_kind_from_string(const std::string & s) {
  if (s == "linear") return MmKind::linear;
  if (s == "nonlinear") return MmKind::nonlinear;
  throw ConfigError("unknown mm kind '" + s + "'");
}

namespace {

Var activate(const Var & x, Activation a) { return a == Activation::tanh ? ad::tanh(x) : ad::relu(x); }

std::string layer_name(const char * op, int layer) { return std::string(op) + ".l" + std::to_string(layer) + ".w"; }

// [T, W, W] -> [T, kt, W, W]; slot j holds frame t + j - kt/2, zero outside the window.
Tensor temporal_unfold(const Tensor & y, int kt) {
  const int t_steps = y.dim(0);
  const std::size_t plane = static_cast<std::size_t>(y.dim(1)) * y.dim(2);
  Tensor out({t_steps, kt, y.dim(1), y.dim(2)});
  for (int t = 0; t < t_steps; ++t) {
    for (int j = 0; j < kt; ++j) {
      const int src = t + j - kt / 2;
      if (src < 0 || src >= t_steps) continue;
      std::copy(y.data() + src * plane, y.data() + (src + 1) * plane,
                out.data() + (static_cast<std::size_t>(t) * kt + j) * plane);
    }
  }
  return out;
}

Var deeper_layers(Var h, const char * op, const ParamSet & params, const MultimodalOpConfig & cfg) {
  for (int l = 1; l < cfg.n_layers; ++l) {
    h = ad::conv2d(activate(h, cfg.activation), params.at(layer_name(op, l)));
  }
  return h;
}

Tensor transpose_tn(const Tensor & f) {
  const int t_steps = f.dim(0);
  const int n = f.dim(1);
  const std::size_t plane = static_cast<std::size_t>(f.dim(2)) * f.dim(3);
  Tensor out({n, t_steps, f.dim(2), f.dim(3)});
  for (int t = 0; t < t_steps; ++t) {
    for (int k = 0; k < n; ++k) {
      std::copy(f.data() + (static_cast<std::size_t>(t) * n + k) * plane,
                f.data() + (static_cast<std::size_t>(t) * n + k + 1) * plane,
                out.data() + (static_cast<std::size_t>(k) * t_steps + t) * plane);
    }
  }
  return out;
}

double nyquist(double dx) { return 0.5 / dx; }

std::function<double(double)> band_multiplier(double low, double high, double dx) {
  const bool open_top = high >= nyquist(dx);
  return [low, high, open_top](double f) { return f >= low && (open_top || f < high) ? 1.0 : 0.0; };
}

}  // namespace

namespace terms {

Var masked_residual_sq(const Var & x, const StateLayout & layout, const Tensor & y, const Tensor & mask) {
  const int t = layout.time_steps;
  const Var r = Var::constant(y) - ad::slice(x, layout.coarse(), t) - ad::slice(x, layout.anomaly_obs(), t);
  return ad::sum_sq(r * Var::constant(mask));
}

Var coarse_residual_sq(const Var & x, const StateLayout & layout, const Tensor & y_coarse) {
  return ad::sum_sq(Var::constant(y_coarse) - ad::slice(x, layout.coarse(), layout.time_steps));
}

Var sst_residual_sq(const Var & x, const StateLayout & layout, const Tensor & y_sst) {
  if (layout.kind != StateKind::ssh_sst) throw ConfigError("SST residual needs the SSH-SST state");
  return ad::sum_sq(Var::constant(y_sst) - ad::slice(x, layout.sst(), layout.time_steps));
}

Var g1_features(const Tensor & y_sst, const ParamSet & params, const MultimodalOpConfig & cfg) {
  if (y_sst.rank() != 3) throw DimensionError("g1_features expects a T x W x W SST series");
  const Var & w0 = params.at(layer_name("g1", 0));
  if (w0.shape()[1] != cfg.g1_time_kernel) throw DimensionError("g1 kernel does not match configuration");
  const Var h = ad::conv2d(Var::constant(temporal_unfold(y_sst, cfg.g1_time_kernel)), w0);
  return deeper_layers(h, "g1", params, cfg);
}

Var g2_features(const Var & x, const StateLayout & layout, const ParamSet & params,
                const MultimodalOpConfig & cfg) {
  const Var input = cfg.g2_full_state ? x : ad::slice(x, 0, 3 * layout.time_steps);
  const Var & w0 = params.at(layer_name("g2", 0));
  if (w0.shape()[1] != input.shape()[0]) {
    throw DimensionError("g2 expects " + std::to_string(w0.shape()[1]) + " state channels, got " +
                         std::to_string(input.shape()[0]));
  }
  const int n = w0.shape()[0] / layout.time_steps;
  const Var h = ad::reshape(ad::conv2d(input, w0), {layout.time_steps, n, x.shape()[1], x.shape()[2]});
  return deeper_layers(h, "g2", params, cfg);
}

ad::LinearOp bandpass_operator(double low, double high, double dx) {
  auto m = band_multiplier(low, high, dx);
  auto f = [m, dx](const Tensor & v) { return spectral::apply_radial_multiplier(v, dx, m); };
  return {"bandpass", f, f};
}

ad::LinearOp sqg_operator(const SqgConfig & cfg, double dx) {
  auto band = band_multiplier(cfg.bandpass_low, cfg.bandpass_high, dx);
  auto m = [band](double f) { return band(f) * 2.0 * std::numbers::pi * f; };
  auto op = [m, dx](const Tensor & v) { return spectral::apply_radial_multiplier(v, dx, m); };
  return {"sqg", op, op};
}

Var sqg_mm_term(const Var & x, const StateLayout & layout, const Tensor & filtered_sst,
                const ad::LinearOp & sqg, double transfer_scale) {
  const int t = layout.time_steps;
  const Var ssh = ad::slice(x, layout.coarse(), t) + ad::slice(x, layout.anomaly_rec(), t);
  return ad::sum_sq(Var::constant(filtered_sst) - ad::scale(ad::apply(sqg, ssh), transfer_scale));
}

}  // namespace terms

double masked_residual_sq(const SpaceTimeField & y_ssh, const Mask & mask, const State & state) {
  ad::NoGradGuard guard;
  const SpaceTimeGrid & g = grid_of(state);
  if (y_ssh.grid() != g || mask.grid() != g) throw DimensionError("masked_residual_sq: grid mismatch");
  return terms::masked_residual_sq(Var::constant(pack_state(state)), {kind_of(state), g.time_steps},
                                   y_ssh.values(), mask.values())
      .value()
      .item();
}

double coarse_residual_sq(const SpaceTimeField & y_coarse, const State & state) {
  ad::NoGradGuard guard;
  const SpaceTimeGrid & g = grid_of(state);
  if (y_coarse.grid() != g) throw DimensionError("coarse_residual_sq: grid mismatch");
  return terms::coarse_residual_sq(Var::constant(pack_state(state)), {kind_of(state), g.time_steps},
                                   y_coarse.values())
      .value()
      .item();
}

double sst_residual_sq(const SpaceTimeField & y_sst, const MultimodalState & state) {
  if (y_sst.grid() != state.grid()) throw DimensionError("sst_residual_sq: grid mismatch");
  return (y_sst.values() - state.sst.values()).sum_sq();
}

Tensor g1_features(const SpaceTimeField & y_sst, const ParamSet & params, const MultimodalOpConfig & cfg) {
  ad::NoGradGuard guard;
  return transpose_tn(terms::g1_features(y_sst.values(), params, cfg).value());
}

Tensor g2_features(const Tensor & state_tensor, const ParamSet & params, const MultimodalOpConfig & cfg,
                   int time_steps) {
  ad::NoGradGuard guard;
  if (state_tensor.rank() != 3 || state_tensor.dim(0) % time_steps != 0) {
    throw DimensionError("g2_features: state tensor " + to_string(state_tensor.shape()) +
                         " is not a packed state of " + std::to_string(time_steps) + " steps");
  }
  const int components = state_tensor.dim(0) / time_steps;
  if (components != 3 && components != 4) throw DimensionError("g2_features: not a packed state");
  const StateLayout layout{components == 3 ? StateKind::ssh_only : StateKind::ssh_sst, time_steps};
  return transpose_tn(terms::g2_features(Var::constant(state_tensor), layout, params, cfg).value());
}

double mm_term(const SpaceTimeField & y_sst, const State & state, const ParamSet & params,
               const MultimodalOpConfig & cfg) {
  ad::NoGradGuard guard;
  const SpaceTimeGrid & g = grid_of(state);
  if (y_sst.grid() != g) throw DimensionError("mm_term: grid mismatch");
  const Var g1 = terms::g1_features(y_sst.values(), params, cfg);
  const Var g2 = terms::g2_features(Var::constant(pack_state(state)), {kind_of(state), g.time_steps}, params, cfg);
  return ad::sum_sq(g1 - g2).value().item();
}

SpaceTimeField fractional_laplacian(const SpaceTimeField & field) {
  const auto m = [](double f) { return 2.0 * std::numbers::pi * f; };
  return SpaceTimeField(field.grid(), spectral::apply_radial_multiplier(field.values(), field.grid().dx, m),
                        field.name() + "_fraclap", field.units() + " rad/degree");
}

SpaceTimeField bandpass(const SpaceTimeField & field, double low, double high) {
  if (low < 0.0 || high < low) throw ConfigError("bandpass: need 0 <= low <= high");
  return SpaceTimeField(field.grid(),
                        spectral::apply_radial_multiplier(field.values(), field.grid().dx,
                                                          band_multiplier(low, high, field.grid().dx)),
                        field.name() + "_band", field.units());
}

SpaceTimeField sqg_transfer(const SpaceTimeField & ssh, const SqgConfig & cfg) {
  const ad::LinearOp op = terms::sqg_operator(cfg, ssh.grid().dx);
  return SpaceTimeField(ssh.grid(), op.forward(ssh.values()) * cfg.transfer_scale, "sst_sqg", "K");
}

double sqg_mm_term(const SpaceTimeField & y_sst, const State & state, const SqgConfig & cfg) {
  ad::NoGradGuard guard;
  const SpaceTimeGrid & g = grid_of(state);
  if (y_sst.grid() != g) throw DimensionError("sqg_mm_term: grid mismatch");
  const Tensor filtered = terms::bandpass_operator(cfg.bandpass_low, cfg.bandpass_high, g.dx).forward(y_sst.values());
  return terms::sqg_mm_term(Var::constant(pack_state(state)), {kind_of(state), g.time_steps}, filtered,
                            terms::sqg_operator(cfg, g.dx), cfg.transfer_scale)
      .value()
      .item();
}

void init_mm_params(ParamSet & params, const MultimodalOpConfig & cfg, int time_steps, int state_channels,
                    Rng & rng) {
  cfg.validate();
  const int n = cfg.n_features;
  const int g2_in = cfg.g2_full_state ? state_channels : 3 * time_steps;
  const double gain = cfg.kind == MmKind::linear ? 0.5 : 1.0;
  Tensor w1 = init_conv(rng, n, cfg.g1_time_kernel, cfg.g1_space_kernel, gain);
  params.add(layer_name("g1", 0), std::move(w1));
  params.add(layer_name("g2", 0), init_conv(rng, time_steps * n, g2_in, cfg.g2_kernel, gain));
  for (int l = 1; l < cfg.n_layers; ++l) {
    params.add(layer_name("g1", l), init_conv(rng, n, n, cfg.g1_space_kernel));
    params.add(layer_name("g2", l), init_conv(rng, n, n, cfg.g2_kernel));
  }
}

}  // namespace varassim
