/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <variant>

#include "varassim/autodiff.hpp"
#include "varassim/core_types.hpp"
#include "varassim/obs_operators.hpp"
#include "varassim/params.hpp"
#include "varassim/prior_phi.hpp"

namespace varassim {

using MmConfig = std::variant<std::monostate, MultimodalOpConfig, SqgConfig>;

struct VariationalCostConfig {
  StateKind formulation = StateKind::ssh_only;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;  ///< ssh_sst only
  double gamma = 1.0;
  MmConfig mm;
  bool weights_trainable = true;
  bool gamma_trainable = false;
  PriorConfig prior;

  void validate() const;
  bool has_mm() const noexcept { return !std::holds_alternative<std::monostate>(mm); }
  bool needs_sst() const noexcept { return formulation == StateKind::ssh_sst || has_mm(); }
};

/// Adds "cost.log_*" weights (stored as logarithms), the prior's "phi.*" and,
/// for a trainable multimodal term, "g1.*"/"g2.*".
void init_cost_params(ParamSet & params, const VariationalCostConfig & cfg, int time_steps, Rng & rng);

/// Observation tensors of one window in model units.
struct WindowObs {
  Tensor y_ssh;     ///< [T,W,W], zero off the mask
  Tensor mask;      ///< [T,W,W] of 0/1
  Tensor y_coarse;  ///< [T,W,W]
  std::optional<Tensor> y_sst;
  double dx = 0.05;

  static WindowObs from(const ObservationSet & obs);
  int time_steps() const { return y_ssh.dim(0); }
  int width() const { return y_ssh.dim(1); }
};

/// The cost U(x) of one window with everything that does not depend on x
/// evaluated once (weights, SST features).
class PreparedCost {
 public:
  PreparedCost(const WindowObs & obs, const ParamSet & params, const VariationalCostConfig & cfg);

  StateLayout layout() const noexcept { return layout_; }
  ad::Var operator()(const ad::Var & x) const;
  /// dU/dx; differentiable in the parameters and in x when `create_graph`.
  ad::Var gradient(const ad::Var & x, bool create_graph) const;

 private:
  const WindowObs & obs_;
  const ParamSet & params_;
  const VariationalCostConfig & cfg_;
  StateLayout layout_;
  ad::Var lambda1_, lambda2_, lambda3_, gamma_;
  ad::Var g1_;
  Tensor filtered_sst_;
  std::optional<ad::LinearOp> sqg_;
};

double cost(const State & state, const ObservationSet & obs, const ParamSet & params,
            const VariationalCostConfig & cfg);
State cost_gradient(const State & state, const ObservationSet & obs, const ParamSet & params,
                    const VariationalCostConfig & cfg);

}  // namespace varassim
