/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include "varassim/autodiff.hpp"
#include "varassim/core_types.hpp"
#include "varassim/params.hpp"

namespace varassim {

enum class MmKind { linear, nonlinear };
enum class Activation { tanh, relu };

/// Trainable feature operators of the multimodal observation term.
struct MultimodalOpConfig {
  MmKind kind = MmKind::nonlinear;
  int n_features = 20;
  int g1_time_kernel = 7;
  int g1_space_kernel = 3;
  int g2_kernel = 3;
  int n_layers = 4;
  Activation activation = Activation::tanh;
  /// G2 reads the whole packed state; otherwise only the three SSH components.
  bool g2_full_state = true;

  void validate() const;
};

/// Band-pass filtered SQG relation between SST and the surface-height Laplacian.
struct SqgConfig {
  double bandpass_low = 1.0 / 3.0;   ///< cycles per degree
  double bandpass_high = 2.0;        ///< cycles per degree; >= Nyquist means no upper cutoff
  /// Multiplies the SSH side; absorbs unit conversions between the two fields.
  double transfer_scale = 1.0;

  void validate(double nyquist) const;
};

std::string to_string(MmKind kind);
MmKind mm_kind_from_string(const std::string & s);

// Residual terms on explicit states.
double masked_residual_sq(const SpaceTimeField & y_ssh, const Mask & mask, const State & state);
double coarse_residual_sq(const SpaceTimeField & y_coarse, const State & state);
double sst_residual_sq(const SpaceTimeField & y_sst, const MultimodalState & state);

/// Feature stacks, N x T x W x W.
Tensor g1_features(const SpaceTimeField & y_sst, const ParamSet & params, const MultimodalOpConfig & cfg);
Tensor g2_features(const Tensor & state_tensor, const ParamSet & params, const MultimodalOpConfig & cfg,
                   int time_steps);
double mm_term(const SpaceTimeField & y_sst, const State & state, const ParamSet & params,
               const MultimodalOpConfig & cfg);

/// (-Laplacian)^{1/2}: multiplier |k| = 2 pi |f| with f in cycles per degree,
/// i.e. radians per degree.
SpaceTimeField fractional_laplacian(const SpaceTimeField & field);
/// Keeps modes with low <= |f| < high (cycles per degree); high >= Nyquist keeps all above low.
SpaceTimeField bandpass(const SpaceTimeField & field, double low, double high);
/// Bandpass of the fractional Laplacian, the SQG transfer from SSH to SST.
SpaceTimeField sqg_transfer(const SpaceTimeField & ssh, const SqgConfig & cfg);
double sqg_mm_term(const SpaceTimeField & y_sst, const State & state, const SqgConfig & cfg);

/// Adds "g1.*" and "g2.*" parameters.
void init_mm_params(ParamSet & params, const MultimodalOpConfig & cfg, int time_steps,
                    int state_channels, Rng & rng);

namespace terms {

// Differentiable forms over the packed state x [C, W, W].
ad::Var masked_residual_sq(const ad::Var & x, const StateLayout & layout, const Tensor & y,
                           const Tensor & mask);
ad::Var coarse_residual_sq(const ad::Var & x, const StateLayout & layout, const Tensor & y_coarse);
ad::Var sst_residual_sq(const ad::Var & x, const StateLayout & layout, const Tensor & y_sst);

/// [T, N, W, W]; depends on parameters only (the SST series is data).
ad::Var g1_features(const Tensor & y_sst, const ParamSet & params, const MultimodalOpConfig & cfg);
ad::Var g2_features(const ad::Var & x, const StateLayout & layout, const ParamSet & params,
                    const MultimodalOpConfig & cfg);

/// Radial Fourier multiplier as a self-adjoint linear operator on [..., W, W] frames.
ad::LinearOp sqg_operator(const SqgConfig & cfg, double dx);
ad::LinearOp bandpass_operator(double low, double high, double dx);
/// ||F y_sst - s F |k| (coarse + anomaly_rec)||^2 with `filtered_sst` = F y_sst.
ad::Var sqg_mm_term(const ad::Var & x, const StateLayout & layout, const Tensor & filtered_sst,
                    const ad::LinearOp & sqg, double transfer_scale);

}  // namespace terms

}  // namespace varassim
