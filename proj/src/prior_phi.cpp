/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/prior_phi.hpp"

#include "varassim/errors.hpp"
#include "varassim/stencils.hpp"

namespace varassim {

using ad::Var;

void PriorConfig::validate() const {
  if (kind == PriorKind::unet2scale && base_channels < 4) throw ConfigError("prior.base_channels must be >= 4");
  if (kind == PriorKind::diffusion && !(diffusion_coefficient >= 0.0)) {
    throw ConfigError("prior.diffusion_coefficient must be >= 0");
  }
}

std::string to_string(PriorKind kind) {
  switch (kind) {
    case PriorKind::unet2scale: return "unet2scale";
    case PriorKind::identity: return "identity";
    case PriorKind::diffusion: return "diffusion";
  }
  return "?";
}

PriorKind prior_kind_from_string(const std::string & s) {
  if (s == "unet2scale") return PriorKind::unet2scale;
  if (s == "identity") return PriorKind::identity;
  if (s == "diffusion") return PriorKind::diffusion;
  throw ConfigError("unknown prior kind '" + s + "'");
}

namespace {

int block_width(const PriorConfig & cfg) { return cfg.bilinear_blocks ? 2 * cfg.base_channels : cfg.base_channels; }

void init_block(ParamSet & params, const std::string & p, int in, const PriorConfig & cfg, Rng & rng) {
  const int c = cfg.base_channels;
  params.add(p + ".c1.w", init_conv(rng, 2 * c, in, 3));
  params.add(p + ".c1.b", Tensor({2 * c}));
  params.add(p + ".c2.w", init_conv(rng, c, 2 * c, 3));
  params.add(p + ".c2.b", Tensor({c}));
  if (cfg.bilinear_blocks) {
    params.add(p + ".lin.w", init_conv(rng, c, c, 1));
    params.add(p + ".bl1.w", init_conv(rng, c, c, 1));
    params.add(p + ".bl2.w", init_conv(rng, c, c, 1));
  }
}

// conv3x3 -> tanh -> conv3x3, then [linear(u), linear(u) * linear(u)] for bilinear blocks.
Var block(const Var & x, const ParamSet & params, const std::string & p, const PriorConfig & cfg) {
  const Var h = ad::tanh(ad::add_bias(ad::conv2d(x, params.at(p + ".c1.w")), params.at(p + ".c1.b")));
  const Var u = ad::add_bias(ad::conv2d(h, params.at(p + ".c2.w")), params.at(p + ".c2.b"));
  if (!cfg.bilinear_blocks) return ad::tanh(u);
  const Var lin = ad::conv2d(u, params.at(p + ".lin.w"));
  const Var prod = ad::conv2d(u, params.at(p + ".bl1.w")) * ad::conv2d(u, params.at(p + ".bl2.w"));
  return ad::concat({lin, prod});
}

}  // namespace

void init_unet2scale(ParamSet & params, const std::string & prefix, int in_channels, int out_channels,
                     const PriorConfig & cfg, Skip skip, Rng & rng) {
  cfg.validate();
  init_block(params, prefix + ".hr", in_channels, cfg, rng);
  init_block(params, prefix + ".lr", in_channels, cfg, rng);
  params.add(prefix + ".dec.w", init_conv(rng, out_channels, block_width(cfg), 1, 0.1));
  params.add(prefix + ".dec.b", Tensor({out_channels}));
  if (skip == Skip::projection) params.add(prefix + ".skip.w", Tensor({out_channels, in_channels, 1, 1}));
  else if (in_channels != out_channels) throw DimensionError("identity skip needs equal in/out channels");
}

void init_phi_params(ParamSet & params, const PriorConfig & cfg, int channels, Rng & rng) {
  cfg.validate();
  if (cfg.kind == PriorKind::unet2scale) init_unet2scale(params, "phi", channels, channels, cfg, Skip::identity, rng);
}

namespace terms {

Var unet2scale(const Var & x, const ParamSet & params, const std::string & prefix, const PriorConfig & cfg,
               Skip skip) {
  const Var & w_in = params.at(prefix + ".hr.c1.w");
  if (x.shape().size() != 3 || w_in.shape()[1] != x.shape()[0]) {
    throw DimensionError(prefix + ": expects " + std::to_string(w_in.shape()[1]) + " channels, got " +
                         to_string(x.shape()));
  }
  const Var hr = block(x, params, prefix + ".hr", cfg);
  const Var lr = ad::apply(stencils::upsample_op(2),
                           block(ad::apply(stencils::avg_pool_op(2), x), params, prefix + ".lr", cfg));
  const Var dec = ad::add_bias(ad::conv2d(hr + lr, params.at(prefix + ".dec.w")), params.at(prefix + ".dec.b"));
  if (skip == Skip::identity) return x + dec;
  return ad::conv2d(x, params.at(prefix + ".skip.w")) + dec;
}

Var phi_apply(const Var & x, const ParamSet & params, const PriorConfig & cfg) {
  switch (cfg.kind) {
    case PriorKind::identity: return x;
    case PriorKind::diffusion: {
      const ad::LinearOp lap{"laplacian", stencils::laplacian_neumann, stencils::laplacian_neumann};
      return x + ad::scale(ad::apply(lap, x), cfg.diffusion_coefficient);
    }
    case PriorKind::unet2scale: return unet2scale(x, params, "phi", cfg, Skip::identity);
  }
  throw ConfigError("unknown prior kind");
}

Var prior_residual_sq(const Var & x, const ParamSet & params, const PriorConfig & cfg) {
  if (cfg.kind == PriorKind::identity) return ad::sum_sq(x - x);
  return ad::sum_sq(x - phi_apply(x, params, cfg));
}

}  // namespace terms

Tensor phi_apply(const Tensor & state_tensor, const ParamSet & params, const PriorConfig & cfg) {
  ad::NoGradGuard guard;
  return terms::phi_apply(Var::constant(state_tensor), params, cfg).value();
}

double prior_residual_sq(const Tensor & state_tensor, const ParamSet & params, const PriorConfig & cfg) {
  ad::NoGradGuard guard;
  return terms::prior_residual_sq(Var::constant(state_tensor), params, cfg).value().item();
}

}  // namespace varassim
