/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"
#include "varassim/errors.hpp"
#include "varassim/obs_operators.hpp"

using namespace varassim;
using namespace varassim::testing;
namespace ad = varassim::ad;

namespace {

const SpaceTimeGrid kGrid{8, 7, 0.05, 1.0};

MultimodalOpConfig linear_cfg(int n) {
  MultimodalOpConfig c;
  c.kind = MmKind::linear;
  c.n_layers = 1;
  c.n_features = n;
  return c;
}

ParamSet mm_params(const MultimodalOpConfig & cfg, int channels, std::uint64_t seed) {
  ParamSet p;
  Rng rng(seed);
  init_mm_params(p, cfg, kGrid.time_steps, channels, rng);
  return p;
}

// sin(2 pi m x / L) along x, L = W dx, replicated over y and t.
SpaceTimeField x_mode(const SpaceTimeGrid & g, int m, double amplitude = 1.0) {
  Tensor v(g.shape());
  for (int t = 0; t < g.time_steps; ++t)
    for (int y = 0; y < g.width; ++y)
      for (int x = 0; x < g.width; ++x) v(t, y, x) = amplitude * std::sin(2 * std::numbers::pi * m * x / g.width);
  return SpaceTimeField(g, v, "mode", "m");
}

}  // namespace

TEST_CASE("masked residual: empty mask, exact fit, loop oracle") {
  const ObservationSet obs = random_obs(kGrid, 1);
  const State s = random_state(kGrid, StateKind::ssh_only, 2);
  CHECK(masked_residual_sq(obs.ssh_alongtrack, Mask::filled(kGrid, false), s) == 0.0);

  const SshState & ssh = ssh_of(s);
  const Tensor fit_values = (ssh.coarse.values() + ssh.anomaly_obs.values());
  CHECK(masked_residual_sq(SpaceTimeField(kGrid, fit_values, "y", "m"), Mask::filled(kGrid, true), s) < 1e-25);

  // Small 2x4x4 instance through the differentiable form.
  const Tensor y = random_tensor({2, 4, 4}, 3);
  Tensor mask = random_tensor({2, 4, 4}, 4, 0.0, 1.0);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = mask[i] < 0.5;
  const Tensor x = random_tensor({6, 4, 4}, 5);
  double oracle = 0.0;
  for (int t = 0; t < 2; ++t)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (mask(t, i, j) != 0.0) {
          const double r = y(t, i, j) - x(t, i, j) - x(2 + t, i, j);
          oracle += r * r;
        }
  const double got = terms::masked_residual_sq(ad::Var::constant(x), {StateKind::ssh_only, 2}, y, mask).value().item();
  CHECK(got == doctest::Approx(oracle).epsilon(1e-14));

  double field_oracle = 0.0;
  for (std::size_t i = 0; i < obs.ssh_mask.values().size(); ++i) {
    if (obs.ssh_mask.values()[i] == 0.0) continue;
    const double r = obs.ssh_alongtrack.values()[i] - ssh.coarse.values()[i] - ssh.anomaly_obs.values()[i];
    field_oracle += r * r;
  }
  CHECK(masked_residual_sq(obs.ssh_alongtrack, obs.ssh_mask, s) == doctest::Approx(field_oracle).epsilon(1e-14));
}

TEST_CASE("coarse and SST residuals") {
  const State s = random_state(kGrid, StateKind::ssh_sst, 7);
  const auto & mm = std::get<MultimodalState>(s);
  CHECK(coarse_residual_sq(mm.ssh.coarse, s) == 0.0);
  const SpaceTimeField shifted(kGrid, mm.ssh.coarse.values() + Tensor(kGrid.shape(), 1.0), "y", "m");
  CHECK(coarse_residual_sq(shifted, s) == doctest::Approx(7.0 * 64.0).epsilon(1e-14));

  CHECK(sst_residual_sq(mm.sst, mm) == 0.0);
  const SpaceTimeField y = random_field(kGrid, 8);
  MultimodalState zero_sst(mm.ssh, SpaceTimeField::zeros(kGrid, "sst", "K"));
  CHECK(sst_residual_sq(y, zero_sst) == doctest::Approx(y.values().sum_sq()).epsilon(1e-14));
  double oracle = 0.0;
  for (std::size_t i = 0; i < y.values().size(); ++i) oracle += std::pow(y.values()[i] - mm.sst.values()[i], 2);
  CHECK(sst_residual_sq(y, mm) == doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("G1: zero params, delta kernel, direct space-time convolution oracle") {
  const MultimodalOpConfig cfg = linear_cfg(2);
  ParamSet p = mm_params(cfg, 21, 1);
  const SpaceTimeField y = random_field(kGrid, 2);

  ParamSet zero = p.clone();
  zero.set("g1.l0.w", Tensor({2, 7, 3, 3}));
  CHECK(g1_features(y, zero, cfg).max_abs() == 0.0);

  const MultimodalOpConfig one = linear_cfg(1);
  ParamSet delta = mm_params(one, 21, 1);
  Tensor d({1, 7, 3, 3});
  d[(0 * 7 + 3) * 9 + 4] = 1.0;
  delta.set("g1.l0.w", d);
  CHECK(g1_features(y, delta, one) == y.values().reshaped({1, 7, 8, 8}));

  const Tensor w = p.value("g1.l0.w");
  const Tensor f = g1_features(y, p, cfg);
  for (int n = 0; n < 2; ++n)
    for (int t = 0; t < 7; ++t)
      for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) {
          double s = 0.0;
          for (int dt = -3; dt <= 3; ++dt)
            for (int a = -1; a <= 1; ++a)
              for (int b = -1; b <= 1; ++b) {
                const int tt = t + dt, ii = i + a, jj = j + b;
                if (tt < 0 || tt >= 7 || ii < 0 || ii >= 8 || jj < 0 || jj >= 8) continue;
                s += w[((n * 7 + dt + 3) * 3 + a + 1) * 3 + b + 1] * y.values()(tt, ii, jj);
              }
          CHECK(f[((n * 7 + t) * 8 + i) * 8 + j] == doctest::Approx(s).epsilon(1e-13));
        }
}

TEST_CASE("G2: zero params, channel selection, convolution oracle") {
  const MultimodalOpConfig cfg = linear_cfg(2);
  ParamSet p = mm_params(cfg, 21, 3);
  const Tensor x = pack_state(random_state(kGrid, StateKind::ssh_only, 4));

  ParamSet zero = p.clone();
  zero.set("g2.l0.w", Tensor({14, 21, 3, 3}));
  CHECK(g2_features(x, zero, cfg, 7).max_abs() == 0.0);

  // Feature (n, t) picks channel 14 + t (anomaly_rec at t).
  Tensor sel({14, 21, 3, 3});
  for (int t = 0; t < 7; ++t) sel[((t * 2 + 0) * 21 + 14 + t) * 9 + 4] = 1.0;
  ParamSet pick = p.clone();
  pick.set("g2.l0.w", sel);
  const Tensor f = g2_features(x, pick, cfg, 7);
  for (int t = 0; t < 7; ++t)
    for (int i = 0; i < 64; ++i) CHECK(f[(0 * 7 + t) * 64 + i] == x[(14 + t) * 64 + i]);

  const Tensor oracle = conv_oracle(x, p.value("g2.l0.w"));  // channel t*N + n
  const Tensor got = g2_features(x, p, cfg, 7);
  for (int n = 0; n < 2; ++n)
    for (int t = 0; t < 7; ++t)
      for (int i = 0; i < 64; ++i) CHECK(got[(n * 7 + t) * 64 + i] == doctest::Approx(oracle[(t * 2 + n) * 64 + i]).epsilon(1e-13));

  CHECK_THROWS_AS(g2_features(Tensor({28, 8, 8}), p, cfg, 7), DimensionError);
}

TEST_CASE("mm term equals the squared feature mismatch") {
  for (MmKind kind : {MmKind::linear, MmKind::nonlinear}) {
    MultimodalOpConfig cfg = kind == MmKind::linear ? linear_cfg(3) : MultimodalOpConfig{};
    cfg.n_features = 3;
    const ParamSet p = mm_params(cfg, 21, 11);
    const SpaceTimeField y = random_field(kGrid, 12);
    const State s = random_state(kGrid, StateKind::ssh_only, 13);
    const Tensor a = g1_features(y, p, cfg);
    const Tensor b = g2_features(pack_state(s), p, cfg, 7);
    double oracle = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) oracle += (a[i] - b[i]) * (a[i] - b[i]);
    CHECK(mm_term(y, s, p, cfg) == doctest::Approx(oracle).epsilon(1e-13));

    ParamSet zero = p.clone();
    for (const auto & name : zero.names()) zero.set(name, Tensor(zero.value(name).shape()));
    CHECK(mm_term(y, s, zero, cfg) == 0.0);
  }
}

TEST_CASE("mm term vanishes when both operators extract the same features") {
  // G1 = centred delta in space-time, G2 selects the anomaly_rec channel of each step.
  const MultimodalOpConfig cfg = linear_cfg(1);
  ParamSet p = mm_params(cfg, 21, 5);
  Tensor d({1, 7, 3, 3});
  d[3 * 9 + 4] = 1.0;
  p.set("g1.l0.w", d);
  Tensor sel({7, 21, 3, 3});
  for (int t = 0; t < 7; ++t) sel[(t * 21 + 14 + t) * 9 + 4] = 1.0;
  p.set("g2.l0.w", sel);
  const SpaceTimeField y = random_field(kGrid, 6);
  const State s = random_state(kGrid, StateKind::ssh_only, 7);
  SshState matched(ssh_of(s).coarse, ssh_of(s).anomaly_obs, y);
  CHECK(mm_term(y, matched, p, cfg) == 0.0);
}

TEST_CASE("linear feature operators are linear in their input") {
  const MultimodalOpConfig cfg = linear_cfg(4);
  const ParamSet p = mm_params(cfg, 21, 8);
  const SpaceTimeField f = random_field(kGrid, 1), g = random_field(kGrid, 2);
  const double a = 0.7, b = -1.9;
  const SpaceTimeField comb(kGrid, f.values() * a + g.values() * b, "c", "K");
  CHECK(rel_error(g1_features(comb, p, cfg), g1_features(f, p, cfg) * a + g1_features(g, p, cfg) * b) < 1e-10);
  const Tensor xf = random_tensor({21, 8, 8}, 3), xg = random_tensor({21, 8, 8}, 4);
  CHECK(rel_error(g2_features(xf * a + xg * b, p, cfg, 7),
                  g2_features(xf, p, cfg, 7) * a + g2_features(xg, p, cfg, 7) * b) < 1e-10);
}

TEST_CASE("mm term ignores SST offsets when every G1 kernel sums to zero") {
  const MultimodalOpConfig cfg = linear_cfg(3);
  ParamSet p = mm_params(cfg, 21, 9);
  Tensor w = p.value("g1.l0.w");
  for (int n = 0; n < 3; ++n) {
    double mean = 0.0;
    for (int i = 0; i < 63; ++i) mean += w[n * 63 + i] / 63.0;
    for (int i = 0; i < 63; ++i) w[n * 63 + i] -= mean;
  }
  p.set("g1.l0.w", w);
  // Zero padding breaks the invariance near borders; the centre step t = 3 sees
  // all 7 kernel slices, so compare there on spatially interior cells.
  const SpaceTimeField y7 = random_field(kGrid, 4);
  const SpaceTimeField y7s(kGrid, y7.values() + Tensor(kGrid.shape(), 5.0), "y", "K");
  const Tensor fa = g1_features(y7, p, cfg), fb = g1_features(y7s, p, cfg);
  for (int n = 0; n < 3; ++n)
    for (int i = 1; i < 7; ++i)
      for (int j = 1; j < 7; ++j) {
        const std::size_t k = ((n * 7 + 3) * 8 + i) * 8 + j;
        CHECK(std::abs(fa[k] - fb[k]) < 1e-12);
      }
}

TEST_CASE("fractional Laplacian on single modes, constants, and linear combinations") {
  const SpaceTimeGrid g{32, 2, 0.05, 1.0};
  const double length = g.width * g.dx;
  for (int m : {1, 3, 7, 16}) {
    const SpaceTimeField f = x_mode(g, m);
    const SpaceTimeField out = fractional_laplacian(f);
    const double k = 2 * std::numbers::pi * m / length;
    CHECK((out.values() - f.values() * k).max_abs() < 1e-8);
  }
  CHECK(fractional_laplacian(SpaceTimeField(g, Tensor(g.shape(), 2.5), "c", "m")).values().max_abs() < 1e-12);
  const SpaceTimeField a = random_field(g, 1), b = random_field(g, 2);
  const SpaceTimeField comb(g, a.values() * 1.5 + b.values() * -0.25, "c", "m");
  CHECK((fractional_laplacian(comb).values() -
         (fractional_laplacian(a).values() * 1.5 + fractional_laplacian(b).values() * -0.25))
            .max_abs() < 1e-10);
}

TEST_CASE("bandpass passes and annihilates single modes") {
  const SpaceTimeGrid g{32, 2, 0.05, 1.0};
  const double nyq = 0.5 / g.dx;
  const SpaceTimeField f = random_field(g, 3);
  CHECK((bandpass(f, 0.0, nyq).values() - f.values()).max_abs() < 1e-10);
  CHECK(bandpass(f, 1.0, 1.0).values().max_abs() < 1e-14);
  const double df = 1.0 / (g.width * g.dx);  // 0.625 cycles per degree
  const SpaceTimeField in_band = x_mode(g, 3);    // 1.875
  const SpaceTimeField out_band = x_mode(g, 10);  // 6.25
  CHECK((bandpass(in_band, 1.5 * df, 5 * df).values() - in_band.values()).max_abs() < 1e-12);
  CHECK(bandpass(out_band, 1.5 * df, 5 * df).values().max_abs() < 1e-12);
  CHECK(bandpass(x_mode(g, 1), 1.5 * df, 5 * df).values().max_abs() < 1e-12);
}

TEST_CASE("bandpass and fractional Laplacian commute") {
  const SpaceTimeGrid g{32, 3, 0.05, 1.0};
  const SpaceTimeField f = random_field(g, 4);
  const SpaceTimeField ab = bandpass(fractional_laplacian(f), 1.0, 6.0);
  const SpaceTimeField ba = fractional_laplacian(bandpass(f, 1.0, 6.0));
  CHECK((ab.values() - ba.values()).max_abs() < 1e-9);
}

TEST_CASE("SQG term: exact transfer, zero inputs, quadratic homogeneity") {
  const SpaceTimeGrid g{32, 3, 0.05, 1.0};
  SqgConfig cfg;
  const State s = random_state(g, StateKind::ssh_only, 20);
  const SpaceTimeField ssh = reconstruct_ssh(s);
  const SpaceTimeField sst = sqg_transfer(ssh, cfg);
  CHECK(sqg_mm_term(sst, s, cfg) < 1e-8 * sst.values().sum_sq());

  const State zero = random_state(g, StateKind::ssh_only, 0);
  const State z = unpack_state(Tensor(pack_state(zero).shape()), g, StateKind::ssh_only);
  CHECK(sqg_mm_term(SpaceTimeField::zeros(g, "sst", "K"), z, cfg) == 0.0);

  const SpaceTimeField y = random_field(g, 21);
  const double base = sqg_mm_term(y, s, cfg);
  const double c = 3.0;
  const State sc = unpack_state(pack_state(s) * c, g, StateKind::ssh_only);
  const SpaceTimeField yc(g, y.values() * c, "y", "K");
  CHECK(sqg_mm_term(yc, sc, cfg) == doctest::Approx(c * c * base).epsilon(1e-12));
}

TEST_CASE("configuration checks") {
  MultimodalOpConfig c = linear_cfg(2);
  c.n_layers = 4;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = linear_cfg(0);
  CHECK_THROWS_AS(c.validate(), ConfigError);
  SqgConfig s;
  s.bandpass_low = 3.0;
  s.bandpass_high = 2.0;
  CHECK_THROWS_AS(s.validate(10.0), ConfigError);
}
