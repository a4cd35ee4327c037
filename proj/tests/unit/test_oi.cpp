/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "varassim/errors.hpp"
#include "varassim/oi.hpp"

using namespace varassim;
using namespace varassim::testing;

TEST_CASE("no observations gives the zero prior mean") {
  const SpaceTimeGrid g{8, 3, 0.05, 1.0};
  const SpaceTimeField y = random_field(g, 1, "ssh");
  const SpaceTimeField m = oi_interpolate(y, Mask::filled(g, false), OiConfig{});
  CHECK(m.values().max_abs() == 0.0);
}

TEST_CASE("a single noise-free observation is reproduced at its location") {
  const SpaceTimeGrid g{8, 3, 0.05, 1.0};
  Tensor yv(g.shape()), mv(g.shape());
  yv(1, 2, 5) = 0.7;
  mv(1, 2, 5) = 1.0;
  const Mask mask(g, mv);
  const SpaceTimeField y(g, yv, "ssh", "m", mask);
  OiConfig c;
  c.obs_noise_variance = 0.0;
  const SpaceTimeField m = oi_interpolate(y, mask, c);
  CHECK(m.values()(1, 2, 5) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(std::abs(m.values()(0, 2, 5)) < 0.7);
}

TEST_CASE("OI matches dense kriging") {
  const SpaceTimeGrid g{12, 4, 0.1, 1.0};
  for (int seed : {1, 2, 3}) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution keep(0.25);
    Tensor mv(g.shape());
    for (std::size_t i = 0; i < mv.size(); ++i) mv[i] = keep(rng) ? 1.0 : 0.0;
    const Mask mask(g, mv);
    const SpaceTimeField y(g, random_field(g, seed, "ssh").values(), "ssh", "m", mask);
    OiConfig c;
    c.spatial_lengthscale = 0.3 + 0.2 * seed;
    c.temporal_lengthscale = 2.0 + seed;
    c.obs_noise_variance = 0.05 * seed;
    c.prior_variance = 0.5 * seed;
    const auto pts = collect_observations(y, mask);
    REQUIRE(pts.size() <= 200u);
    REQUIRE(pts.size() > 20u);
    const Tensor ref = oracle::kriging(pts, g.time_steps, g.width, g.dx, g.dt, c);
    const SpaceTimeField got = oi_interpolate(y, mask, c);
    CHECK((got.values() - ref).max_abs() < 1e-8 * (1.0 + ref.max_abs()));
  }
}

TEST_CASE("noise-free OI reproduces observations") {
  const SpaceTimeGrid g{10, 2, 0.1, 1.0};
  std::mt19937_64 rng(9);
  std::bernoulli_distribution keep(0.1);
  Tensor mv(g.shape());
  for (std::size_t i = 0; i < mv.size(); ++i) mv[i] = keep(rng) ? 1.0 : 0.0;
  const Mask mask(g, mv);
  const SpaceTimeField y(g, random_field(g, 4, "ssh").values(), "ssh", "m", mask);
  OiConfig c;
  c.obs_noise_variance = 0.0;
  c.spatial_lengthscale = 0.15;
  const SpaceTimeField m = oi_interpolate(y, mask, c);
  for (std::size_t i = 0; i < mv.size(); ++i)
    if (mv[i] != 0.0) CHECK(m.values()[i] == doctest::Approx(y.values()[i]).epsilon(1e-7));
}

TEST_CASE("subsampling is uniform and deterministic") {
  std::vector<ObsPoint> p;
  for (int i = 0; i < 1000; ++i) p.push_back({0.0, i, 0, double(i)});
  const auto s = subsample_uniform(p, 100);
  REQUIRE(s.size() == 100u);
  for (int i = 0; i < 100; ++i) CHECK(s[i].value == 10.0 * i);
  CHECK(subsample_uniform(p, 5000).size() == 1000u);
}

TEST_CASE("OI product keeps gridded constants and validates config") {
  const SpaceTimeGrid g{8, 6, 0.1, 1.0};
  Tensor mv(g.shape());
  for (int t = 0; t < 6; ++t) mv(t, t, 3) = 1.0;
  const Mask mask(g, mv);
  const SpaceTimeField y(g, Tensor(g.shape(), 2.5), "ssh", "m", mask);
  OiConfig c;
  c.half_window_days = 2;
  const SpaceTimeField m = oi_product(y, mask, c);
  CHECK((m.values() - Tensor(g.shape(), 2.5)).max_abs() < 1e-12);
  c.max_obs_per_window = 0;
  CHECK_THROWS_AS(oi_product(y, mask, c), ConfigError);
}
