/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "varassim/errors.hpp"

namespace varassim {

using ad::Var;

void SolverConfig::validate() const {
  if (n_iterations < 0) throw ConfigError("solver.n_iterations must be >= 0");
  if (lstm_hidden < 1) throw ConfigError("solver.lstm_hidden must be >= 1");
  if (lstm_kernel < 1 || lstm_kernel % 2 == 0) throw ConfigError("solver.lstm_kernel must be odd");
  if (kind == SolverKind::plain_gd && !(gd_step > 0.0)) throw ConfigError("solver.gd_step must be > 0");
}

std::string to_string(SolverKind kind) { return kind == SolverKind::lstm ? "lstm" : "plain_gd"; }

SolverKind solver_kind_from_string(const std::string & s) {
  if (s == "lstm") return SolverKind::lstm;
  if (s == "plain_gd") return SolverKind::plain_gd;
  throw ConfigError("unknown solver kind '" + s + "'");
}

void init_solver_params(ParamSet & params, const SolverConfig & cfg, int state_channels, Rng & rng) {
  cfg.validate();
  if (cfg.kind != SolverKind::lstm) return;
  const int hd = cfg.lstm_hidden;
  params.add("lstm.gates.w", init_conv(rng, 4 * hd, state_channels + hd, cfg.lstm_kernel));
  params.add("lstm.gates.b", Tensor({4 * hd}));
  params.add("lstm.out.w", init_conv(rng, state_channels, hd, 1, 0.1));
}

namespace terms {

LstmStep lstm_update(const Var & x, const Var & grad, const Var & h, const Var & c, const ParamSet & params,
                     const SolverConfig & cfg) {
  const int hd = cfg.lstm_hidden;
  if (grad.shape() != x.shape() || h.shape() != c.shape() || h.shape().size() != 3 || h.shape()[0] != hd ||
      h.shape()[1] != x.shape()[1] || h.shape()[2] != x.shape()[2]) {
    throw DimensionError("lstm_update: inconsistent shapes x " + to_string(x.shape()) + ", grad " +
                         to_string(grad.shape()) + ", h " + to_string(h.shape()));
  }
  const Var gates = ad::add_bias(ad::conv2d(ad::concat({grad, h}), params.at("lstm.gates.w")),
                                 params.at("lstm.gates.b"));
  const Var i = ad::sigmoid(ad::slice(gates, 0, hd));
  const Var f = ad::sigmoid(ad::slice(gates, hd, hd));
  const Var g = ad::tanh(ad::slice(gates, 2 * hd, hd));
  const Var o = ad::sigmoid(ad::slice(gates, 3 * hd, hd));
  const Var c_next = f * c + i * g;
  const Var h_next = o * ad::tanh(c_next);
  return {x - ad::conv2d(h_next, params.at("lstm.out.w")), h_next, c_next};
}

Var solve(const Var & x0, const PreparedCost & cost, const ParamSet & params, const SolverConfig & cfg,
          bool training) {
  const int iterations = cfg.iterations(training);
  // dU/dx is taken through the graph, so x must be tracked from the first iteration.
  Var x = training && !x0.requires_grad() ? Var::leaf(x0.value()) : x0;
  Var h, c;
  if (cfg.kind == SolverKind::lstm) {
    h = Var::constant(Tensor({cfg.lstm_hidden, x0.shape()[1], x0.shape()[2]}));
    c = h;
  }
  for (int k = 0; k < iterations; ++k) {
    // Outside training each iteration starts from a fresh leaf so no graph accumulates.
    const Var xk = training ? x : Var::leaf(x.value());
    Var g = cost.gradient(xk, training);
    if (!training) g = g.detach();
    if (cfg.normalize_gradient) {
      const double rms = std::sqrt(g.value().sum_sq() / static_cast<double>(g.value().size()));
      g = ad::scale(g, 1.0 / std::max(rms, 1e-12));
    }
    if (cfg.kind == SolverKind::plain_gd) {
      x = xk - ad::scale(g, cfg.gd_step);
      continue;
    }
    std::optional<ad::NoGradGuard> guard;
    if (!training) guard.emplace();
    LstmStep step = lstm_update(xk, g, h, c, params, cfg);
    x = step.x;
    h = step.h;
    c = step.c;
  }
  return training ? x : x.detach();
}

}  // namespace terms

LstmTensors lstm_update(const Tensor & x, const Tensor & grad, const Tensor & h, const Tensor & c,
                        const ParamSet & params, const SolverConfig & cfg) {
  ad::NoGradGuard guard;
  const LstmStep s = terms::lstm_update(Var::constant(x), Var::constant(grad), Var::constant(h), Var::constant(c),
                                        params, cfg);
  return {s.x.value(), s.h.value(), s.c.value()};
}

State solve(const State & x0, const ObservationSet & obs, const VariationalCostConfig & cost_cfg,
            const SolverConfig & solver_cfg, const ParamSet & params) {
  if (kind_of(x0) != cost_cfg.formulation) throw ConfigError("initial state does not match the formulation");
  const WindowObs w = WindowObs::from(obs);
  const PreparedCost u(w, params, cost_cfg);
  const Var x = terms::solve(Var::constant(pack_state(x0)), u, params, solver_cfg, false);
  return unpack_state(x.value(), grid_of(x0), cost_cfg.formulation);
}

State default_init(const ObservationSet & obs, StateKind formulation) {
  const SpaceTimeGrid & g = obs.grid();
  SshState ssh(obs.ssh_coarse.renamed("ssh_coarse"), SpaceTimeField::zeros(g, "ssh_anomaly_obs", "m"),
               SpaceTimeField::zeros(g, "ssh_anomaly_rec", "m"));
  if (formulation == StateKind::ssh_only) return ssh;
  if (!obs.sst) throw ConfigError("SSH-SST initial state needs SST observations");
  return MultimodalState(std::move(ssh), obs.sst->renamed("sst"));
}

}  // namespace varassim
