/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <string>

#include "varassim/autodiff.hpp"
#include "varassim/params.hpp"

namespace varassim {

enum class PriorKind { unet2scale, identity, diffusion };

struct PriorConfig {
  PriorKind kind = PriorKind::unet2scale;
  int base_channels = 32;
  bool bilinear_blocks = true;
  double diffusion_coefficient = 0.1;

  void validate() const;
};

std::string to_string(PriorKind kind);
PriorKind prior_kind_from_string(const std::string & s);

/// Skip connection of a two-scale network: identity (in == out channels) or a
/// trainable 1x1 projection.
enum class Skip { identity, projection };

/// Adds the parameters of a two-scale network under `prefix`.
void init_unet2scale(ParamSet & params, const std::string & prefix, int in_channels, int out_channels,
                     const PriorConfig & cfg, Skip skip, Rng & rng);

/// Adds "phi.*" parameters for `channels` packed-state channels (none for analytic kinds).
void init_phi_params(ParamSet & params, const PriorConfig & cfg, int channels, Rng & rng);

Tensor phi_apply(const Tensor & state_tensor, const ParamSet & params, const PriorConfig & cfg);
double prior_residual_sq(const Tensor & state_tensor, const ParamSet & params, const PriorConfig & cfg);

namespace terms {

/// Full-resolution branch plus a 2x-pooled branch, each made of convolution
/// blocks with bilinear terms; summed, decoded by a 1x1 convolution and added to
/// the skip path. x is [C,H,W].
ad::Var unet2scale(const ad::Var & x, const ParamSet & params, const std::string & prefix,
                   const PriorConfig & cfg, Skip skip);

ad::Var phi_apply(const ad::Var & x, const ParamSet & params, const PriorConfig & cfg);
ad::Var prior_residual_sq(const ad::Var & x, const ParamSet & params, const PriorConfig & cfg);

}  // namespace terms

}  // namespace varassim
