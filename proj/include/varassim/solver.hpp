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
#include "varassim/variational_cost.hpp"

namespace varassim {

enum class SolverKind { lstm, plain_gd };

struct SolverConfig {
  SolverKind kind = SolverKind::lstm;
  int n_iterations = 15;
  int lstm_hidden = 150;
  int lstm_kernel = 3;
  double gd_step = 0.1;
  /// Rescale the cost gradient to unit RMS per window before it enters the LSTM.
  bool normalize_gradient = false;
  /// Iteration count used at inference; negative means n_iterations.
  int inference_iterations = -1;

  void validate() const;
  int iterations(bool training) const {
    return training || inference_iterations < 0 ? n_iterations : inference_iterations;
  }
};

std::string to_string(SolverKind kind);
SolverKind solver_kind_from_string(const std::string & s);

/// Adds "lstm.*": gate convolution over [grad, h] and the 1x1 output map L.
void init_solver_params(ParamSet & params, const SolverConfig & cfg, int state_channels, Rng & rng);

struct LstmStep {
  ad::Var x;
  ad::Var h;
  ad::Var c;
};

namespace terms {

/// One convolutional LSTM step: gates = conv([grad, h]) in order (input, forget,
/// cell, output); c' = f c + i g; h' = o tanh(c'); x' = x - L(h').
LstmStep lstm_update(const ad::Var & x, const ad::Var & grad, const ad::Var & h, const ad::Var & c,
                     const ParamSet & params, const SolverConfig & cfg);

/// Runs the unrolled solver from x0. With `training` the result is differentiable
/// with respect to every parameter used by the cost and the solver.
ad::Var solve(const ad::Var & x0, const PreparedCost & cost, const ParamSet & params, const SolverConfig & cfg,
              bool training);

}  // namespace terms

struct LstmTensors {
  Tensor x;
  Tensor h;
  Tensor c;
};
LstmTensors lstm_update(const Tensor & x, const Tensor & grad, const Tensor & h, const Tensor & c,
                        const ParamSet & params, const SolverConfig & cfg);

State solve(const State & x0, const ObservationSet & obs, const VariationalCostConfig & cost_cfg,
            const SolverConfig & solver_cfg, const ParamSet & params);

/// coarse <- coarse SSH product, anomalies <- 0, SST component <- SST observations.
State default_init(const ObservationSet & obs, StateKind formulation);

}  // namespace varassim
