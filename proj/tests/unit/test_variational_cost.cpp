/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "varassim/errors.hpp"
#include "varassim/variational_cost.hpp"

using namespace varassim;
using namespace varassim::testing;
namespace ad = varassim::ad;

namespace {

const SpaceTimeGrid kGrid{8, 2, 0.05, 1.0};

VariationalCostConfig full_cfg(StateKind kind, MmConfig mm) {
  VariationalCostConfig c;
  c.formulation = kind;
  c.lambda1 = 0.7;
  c.lambda2 = 1.3;
  c.lambda3 = 0.4;
  c.gamma = 0.9;
  c.mm = mm;
  c.prior.kind = PriorKind::diffusion;
  c.prior.diffusion_coefficient = 0.15;
  return c;
}

MultimodalOpConfig mm_cfg(MmKind kind) {
  MultimodalOpConfig m;
  m.kind = kind;
  m.n_layers = kind == MmKind::linear ? 1 : 4;
  m.n_features = 2;
  m.g1_time_kernel = 3;
  return m;
}

ParamSet make_params(const VariationalCostConfig & c, std::uint64_t seed) {
  ParamSet p;
  Rng rng(seed);
  init_cost_params(p, c, kGrid.time_steps, rng);
  return p;
}

}  // namespace

TEST_CASE("cost equals the term-sum oracle") {
  int instance = 0;
  for (StateKind kind : {StateKind::ssh_only, StateKind::ssh_sst}) {
    for (MmConfig mm : {MmConfig{}, MmConfig{mm_cfg(MmKind::linear)}, MmConfig{mm_cfg(MmKind::nonlinear)},
                        MmConfig{SqgConfig{1.0, 6.0, 0.8}}}) {
      const VariationalCostConfig c = full_cfg(kind, mm);
      const ParamSet p = make_params(c, 10 + instance);
      const ObservationSet obs = random_obs(kGrid, 20 + instance);
      const State s = random_state(kGrid, kind, 30 + instance);
      const double expect = oracle::variational_cost(s, obs, p, c);
      CHECK(cost(s, obs, p, c) == doctest::Approx(expect).epsilon(1e-12));
      ++instance;
    }
  }
}

TEST_CASE("zero weights and exact fits give zero cost") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_sst, MmConfig{});
  c.lambda1 = c.lambda2 = c.lambda3 = c.gamma = 0.0;
  c.weights_trainable = false;
  const ObservationSet obs = random_obs(kGrid, 1);
  CHECK(cost(random_state(kGrid, StateKind::ssh_sst, 2), obs, {}, c) == 0.0);

  VariationalCostConfig id = full_cfg(StateKind::ssh_sst, MmConfig{});
  id.prior.kind = PriorKind::identity;
  const SshState ssh(obs.ssh_coarse, SpaceTimeField(kGrid, obs.ssh_alongtrack.values() - obs.ssh_coarse.values(), "a", "m", obs.ssh_mask),
                     random_field(kGrid, 3));
  const State fit = MultimodalState(ssh, *obs.sst);
  CHECK(cost(fit, obs, make_params(id, 1), id) < 1e-28);
}

TEST_CASE("cost gradient matches central finite differences with every term active") {
  for (MmConfig mm : {MmConfig{mm_cfg(MmKind::nonlinear)}, MmConfig{SqgConfig{1.0, 6.0, 0.8}}}) {
    VariationalCostConfig c = full_cfg(StateKind::ssh_sst, mm);
    c.prior = PriorConfig{};
    c.prior.base_channels = 4;
    ParamSet p = make_params(c, 3);
    Rng rng(4);
    for (const auto & name : p.names("phi.dec")) p.set(name, normal_tensor(rng, p.value(name).shape(), 0.3));
    const ObservationSet obs = random_obs(kGrid, 5);
    const State s = random_state(kGrid, StateKind::ssh_sst, 6);
    const Tensor g = pack_state(cost_gradient(s, obs, p, c));
    const Tensor x = pack_state(s);
    auto f = [&](const Tensor & t) { return cost(unpack_state(t, kGrid, c.formulation), obs, p, c); };
    const Tensor fd = fd_gradient(f, x, 1e-4);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      worst = std::max(worst, std::abs(g[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-3 * fd.max_abs()));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("quadratic configuration: gradient is affine in the state") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_only, MmConfig{});
  c.prior.kind = PriorKind::identity;
  const ParamSet p = make_params(c, 1);
  const ObservationSet obs = random_obs(kGrid, 2);
  const Tensor x1 = pack_state(random_state(kGrid, StateKind::ssh_only, 3));
  const Tensor x2 = pack_state(random_state(kGrid, StateKind::ssh_only, 4));
  auto g = [&](const Tensor & x) {
    return pack_state(cost_gradient(unpack_state(x, kGrid, StateKind::ssh_only), obs, p, c));
  };
  const Tensor g0 = g(Tensor(x1.shape()));
  const double a = 0.3, b = -2.1;
  const Tensor lhs = g(x1 * a + x2 * b) - g0;
  const Tensor rhs = (g(x1) - g0) * a + (g(x2) - g0) * b;
  CHECK(rel_error(lhs, rhs) < 1e-12);
}

TEST_CASE("stationarity at the minimiser of a dense noise-free problem") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_only, MmConfig{});
  c.prior.kind = PriorKind::identity;
  const ParamSet p = make_params(c, 1);
  const SpaceTimeField truth = random_field(kGrid, 9);
  const ObservationSet obs(truth, Mask::filled(kGrid, true), truth, std::nullopt);
  const SshState s(truth, SpaceTimeField::zeros(kGrid, "a", "m"), random_field(kGrid, 2));
  CHECK(pack_state(cost_gradient(s, obs, p, c)).max_abs() < 1e-8);
}

TEST_CASE("reconstruction anomaly only feels the prior and multimodal terms") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_sst, MmConfig{});
  c.prior.kind = PriorKind::identity;
  const ParamSet p = make_params(c, 1);
  const ObservationSet obs = random_obs(kGrid, 2);
  const Tensor g = pack_state(cost_gradient(random_state(kGrid, StateKind::ssh_sst, 3), obs, p, c));
  const StateLayout l{StateKind::ssh_sst, kGrid.time_steps};
  for (int ch = l.anomaly_rec(); ch < l.anomaly_rec() + kGrid.time_steps; ++ch)
    for (int i = 0; i < 64; ++i) CHECK(g[ch * 64 + i] == 0.0);
}

TEST_CASE("cost is nonnegative and decreases under a small gradient step") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_only, MmConfig{mm_cfg(MmKind::nonlinear)});
  c.prior = PriorConfig{};
  c.prior.base_channels = 4;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ParamSet p = make_params(c, seed);
    const ObservationSet obs = random_obs(kGrid, 10 + seed);
    const State s = random_state(kGrid, StateKind::ssh_only, 20 + seed);
    const double u0 = cost(s, obs, p, c);
    CHECK(u0 >= 0.0);
    const Tensor g = pack_state(cost_gradient(s, obs, p, c));
    const double step = 1e-4 / std::max(1.0, g.max_abs());
    const State s1 = unpack_state(pack_state(s) - g * step, kGrid, StateKind::ssh_only);
    CHECK(cost(s1, obs, p, c) < u0);
  }
}

TEST_CASE("quadratic homogeneity with linear operators and a zero-parameter network") {
  VariationalCostConfig c = full_cfg(StateKind::ssh_sst, MmConfig{mm_cfg(MmKind::linear)});
  c.prior = PriorConfig{};
  c.prior.base_channels = 4;
  ParamSet p = make_params(c, 2);
  for (const auto & name : p.names("phi")) p.set(name, Tensor(p.value(name).shape()));
  const ObservationSet obs = random_obs(kGrid, 3);
  const State s = random_state(kGrid, StateKind::ssh_sst, 4);
  const double k = 2.5;
  const ObservationSet obs_k(SpaceTimeField(kGrid, obs.ssh_alongtrack.values() * k, "y", "m"), obs.ssh_mask,
                             SpaceTimeField(kGrid, obs.ssh_coarse.values() * k, "c", "m"),
                             SpaceTimeField(kGrid, obs.sst->values() * k, "s", "K"));
  const State s_k = unpack_state(pack_state(s) * k, kGrid, StateKind::ssh_sst);
  CHECK(cost(s_k, obs_k, p, c) == doctest::Approx(k * k * cost(s, obs, p, c)).epsilon(1e-12));
}

TEST_CASE("missing SST is a configuration error") {
  const VariationalCostConfig c = full_cfg(StateKind::ssh_only, MmConfig{mm_cfg(MmKind::linear)});
  const ParamSet p = make_params(c, 1);
  const ObservationSet obs = random_obs(kGrid, 2, 0.3, false);
  CHECK_THROWS_AS(cost(random_state(kGrid, StateKind::ssh_only, 3), obs, p, c), ConfigError);
  const VariationalCostConfig plain = full_cfg(StateKind::ssh_only, MmConfig{});
  CHECK_THROWS_AS(cost(random_state(kGrid, StateKind::ssh_sst, 3), obs, make_params(plain, 1), plain), ConfigError);
}
