/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/variational_cost.hpp"

#include <algorithm>
#include <cmath>

#include "varassim/errors.hpp"

namespace varassim {

using ad::Var;

void VariationalCostConfig::validate() const {
  for (double w : {lambda1, lambda2, lambda3, gamma}) {
    if (!(w >= 0.0)) throw ConfigError("cost weights must be nonnegative");
  }
  if (const auto * m = std::get_if<MultimodalOpConfig>(&mm)) m->validate();
  prior.validate();
}

void init_cost_params(ParamSet & params, const VariationalCostConfig & cfg, int time_steps, Rng & rng) {
  cfg.validate();
  const StateLayout layout{cfg.formulation, time_steps};
  auto log_weight = [](double w) { return Tensor::scalar(std::log(std::max(w, 1e-300))); };
  if (cfg.weights_trainable) {
    params.add("cost.log_lambda1", log_weight(cfg.lambda1));
    params.add("cost.log_lambda2", log_weight(cfg.lambda2));
    if (cfg.formulation == StateKind::ssh_sst) params.add("cost.log_lambda3", log_weight(cfg.lambda3));
  }
  if (cfg.gamma_trainable) params.add("cost.log_gamma", log_weight(cfg.gamma));
  init_phi_params(params, cfg.prior, layout.channels(), rng);
  if (const auto * m = std::get_if<MultimodalOpConfig>(&cfg.mm)) {
    init_mm_params(params, *m, time_steps, layout.channels(), rng);
  }
}

WindowObs WindowObs::from(const ObservationSet & obs) {
  WindowObs w;
  w.y_ssh = obs.ssh_alongtrack.values();
  w.mask = obs.ssh_mask.values();
  w.y_coarse = obs.ssh_coarse.values();
  if (obs.sst) w.y_sst = obs.sst->values();
  w.dx = obs.grid().dx;
  return w;
}

PreparedCost::PreparedCost(const WindowObs & obs, const ParamSet & params, const VariationalCostConfig & cfg)
    : obs_(obs), params_(params), cfg_(cfg), layout_{cfg.formulation, obs.time_steps()} {
  if (cfg.needs_sst() && !obs.y_sst) {
    throw ConfigError(cfg.formulation == StateKind::ssh_sst ? "SSH-SST formulation needs SST observations"
                                                            : "multimodal term needs SST observations");
  }
  auto weight = [&](const char * name, double fixed) {
    const std::string key = std::string("cost.log_") + name;
    return params.contains(key) ? ad::exp(params.at(key)) : Var::constant(Tensor::scalar(fixed));
  };
  lambda1_ = weight("lambda1", cfg.lambda1);
  lambda2_ = weight("lambda2", cfg.lambda2);
  lambda3_ = weight("lambda3", cfg.lambda3);
  gamma_ = weight("gamma", cfg.gamma);
  if (const auto * m = std::get_if<MultimodalOpConfig>(&cfg.mm)) {
    g1_ = terms::g1_features(*obs.y_sst, params, *m);
  } else if (const auto * s = std::get_if<SqgConfig>(&cfg.mm)) {
    filtered_sst_ = terms::bandpass_operator(s->bandpass_low, s->bandpass_high, obs.dx).forward(*obs.y_sst);
    sqg_ = terms::sqg_operator(*s, obs.dx);
  }
}

Var PreparedCost::operator()(const Var & x) const {
  if (x.shape() != Shape{layout_.channels(), obs_.width(), obs_.width()}) {
    throw DimensionError("cost: state tensor " + to_string(x.shape()) + " does not match " +
                         to_string(cfg_.formulation) + " with " + std::to_string(layout_.time_steps) + " steps");
  }
  Var u = ad::mul_scalar(terms::coarse_residual_sq(x, layout_, obs_.y_coarse), lambda1_) +
          ad::mul_scalar(terms::masked_residual_sq(x, layout_, obs_.y_ssh, obs_.mask), lambda2_);
  if (cfg_.formulation == StateKind::ssh_sst) {
    u = u + ad::mul_scalar(terms::sst_residual_sq(x, layout_, *obs_.y_sst), lambda3_);
  }
  if (cfg_.prior.kind != PriorKind::identity) {
    u = u + ad::mul_scalar(terms::prior_residual_sq(x, params_, cfg_.prior), gamma_);
  }
  if (const auto * m = std::get_if<MultimodalOpConfig>(&cfg_.mm)) {
    u = u + ad::sum_sq(g1_ - terms::g2_features(x, layout_, params_, *m));
  } else if (const auto * s = std::get_if<SqgConfig>(&cfg_.mm)) {
    u = u + terms::sqg_mm_term(x, layout_, filtered_sst_, *sqg_, s->transfer_scale);
  }
  return u;
}

Var PreparedCost::gradient(const Var & x, bool create_graph) const {
  return ad::grad((*this)(x), {x}, create_graph)[0];
}

namespace {

void check_state(const State & state, const ObservationSet & obs, const VariationalCostConfig & cfg) {
  if (kind_of(state) != cfg.formulation) {
    throw ConfigError("state is " + to_string(kind_of(state)) + " but the cost expects " + to_string(cfg.formulation));
  }
  if (grid_of(state) != obs.grid()) throw DimensionError("state and observations are on different grids");
}

}  // namespace

double cost(const State & state, const ObservationSet & obs, const ParamSet & params,
            const VariationalCostConfig & cfg) {
  check_state(state, obs, cfg);
  ad::NoGradGuard guard;
  const WindowObs w = WindowObs::from(obs);
  return PreparedCost(w, params, cfg)(Var::constant(pack_state(state))).value().item();
}

State cost_gradient(const State & state, const ObservationSet & obs, const ParamSet & params,
                    const VariationalCostConfig & cfg) {
  check_state(state, obs, cfg);
  const WindowObs w = WindowObs::from(obs);
  const PreparedCost u(w, params, cfg);
  const Var x = Var::leaf(pack_state(state));
  return unpack_state(u.gradient(x, false).value(), grid_of(state), cfg.formulation);
}

}  // namespace varassim
