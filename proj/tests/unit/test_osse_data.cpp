/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cmath>
#include <complex>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "test_support.hpp"
#include "varassim/errors.hpp"
#include "varassim/osse_data.hpp"

using namespace varassim;
using namespace varassim::testing;

namespace {

TruthConfig small_truth() {
  TruthConfig c;
  c.grid = {32, 24, 0.05, 1.0};
  c.seed = 42;
  return c;
}

}  // namespace

TEST_CASE("truth generation is deterministic in the seed") {
  const TruthConfig c = small_truth();
  const Truth a = generate_truth(c), b = generate_truth(c);
  CHECK(a.ssh.values() == b.ssh.values());
  CHECK(a.sst.values() == b.sst.values());
  TruthConfig d = c;
  d.seed = 43;
  CHECK(!(generate_truth(d).ssh.values() == a.ssh.values()));
}

TEST_CASE("noise-free SQG coupling reproduces the SQG transfer exactly") {
  TruthConfig c = small_truth();
  c.sst_noise_amplitude = 0.0;
  const Truth t = generate_truth(c);
  const SpaceTimeField expect = bandpass(fractional_laplacian(t.ssh), c.sqg.bandpass_low, c.sqg.bandpass_high);
  CHECK((t.sst.values() - expect.values() * c.sqg.transfer_scale).max_abs() < 1e-12 * (1.0 + expect.values().max_abs()));
  State s = SshState(t.ssh, SpaceTimeField::zeros(c.grid, "a", "m"), SpaceTimeField::zeros(c.grid, "b", "m"));
  CHECK(sqg_mm_term(t.sst, s, c.sqg) < 1e-20 * (1.0 + t.sst.values().sum_sq()));
}

TEST_CASE("SSH spectrum follows the configured power law") {
  TruthConfig c;
  c.grid = {64, 10, 0.05, 1.0};
  c.spectral_slope = -4.0;
  const Truth t = generate_truth(c);
  // Radially averaged periodogram from a separable direct DFT, integer index bins.
  const int w = 64;
  std::vector<double> power(w / 2, 0.0), count(w / 2, 0.0);
  std::vector<std::complex<double>> tw(w), rows(w * w), full(w * w);
  for (int k = 0; k < w; ++k) tw[k] = std::polar(1.0, -2.0 * M_PI * k / w);
  for (int f = 0; f < 10; ++f) {
    const double * v = t.ssh.values().data() + f * w * w;
    for (int i = 0; i < w; ++i)
      for (int kx = 0; kx < w; ++kx) {
        std::complex<double> acc = 0.0;
        for (int j = 0; j < w; ++j) acc += v[i * w + j] * tw[(kx * j) % w];
        rows[i * w + kx] = acc;
      }
    for (int ky = 0; ky < w; ++ky)
      for (int kx = 0; kx < w; ++kx) {
        std::complex<double> acc = 0.0;
        for (int i = 0; i < w; ++i) acc += rows[i * w + kx] * tw[(ky * i) % w];
        full[ky * w + kx] = acc;
      }
    for (int r = 0; r < w; ++r)
      for (int col = 0; col < w; ++col) {
        const int ky = r <= w / 2 ? r : r - w, kx = col <= w / 2 ? col : col - w;
        const int bin = static_cast<int>(std::lround(std::sqrt(double(ky * ky + kx * kx))));
        if (bin < 1 || bin >= w / 2) continue;
        power[bin] += std::norm(full[r * w + col]);
        count[bin] += 1.0;
      }
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (int b = 2; b < w / 2; ++b) {
    const double x = std::log(double(b)), y = std::log(power[b] / count[b]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(slope == doctest::Approx(-4.0).epsilon(0.075));
}

TEST_CASE("nadir sampling") {
  const SpaceTimeGrid g{64, 20, 0.05, 1.0};
  SamplingConfig c;
  c.n_nadir_tracks_per_day = 0;
  CHECK(nadir_mask(g, c, 1).count() == 0);

  c = SamplingConfig{};
  const Mask m = nadir_mask(g, c, 3);
  for (int d = 0; d < g.time_steps; ++d) {
    CHECK(m.fraction(d) >= 0.005);
    CHECK(m.fraction(d) < 0.10);
  }
  CHECK(nadir_mask(g, c, 3).values() == m.values());

  // One horizontal track as wide as the domain: each row fully observed or not at all.
  SamplingConfig wide;
  wide.n_nadir_tracks_per_day = 1;
  wide.track_width = g.width;
  wide.track_angle_min = wide.track_angle_max = 0.0;
  const Mask band = nadir_mask(SpaceTimeGrid{16, 3, 0.05, 1.0}, wide, 5);
  for (int t = 0; t < 3; ++t) {
    int full_rows = 0;
    for (int i = 0; i < 16; ++i) {
      int n = 0;
      for (int j = 0; j < 16; ++j) n += band.observed(t, i, j);
      CHECK((n == 0 || n == 16));
      full_rows += n == 16;
    }
    CHECK(full_rows >= 8);
  }
}

TEST_CASE("swath sampling") {
  const SpaceTimeGrid g{64, 20, 0.05, 1.0};
  SamplingConfig c;
  c.swath_repeat_days = 30;
  int days = 0;
  const Mask once = swath_mask(g, c, 1);
  for (int d = 0; d < g.time_steps; ++d) days += once.fraction(d) > 0.0;
  CHECK(days <= 1);

  // Zero gap: one contiguous band of twice the swath width along a horizontal line.
  SamplingConfig flat;
  flat.swath_gap = 0;
  flat.swath_width = 3;
  flat.track_angle_min = flat.track_angle_max = 0.0;
  const Mask band = swath_mask(g, flat, 2);
  std::vector<int> rows;
  for (int i = 0; i < 64; ++i)
    if (band.observed(0, i, 0)) rows.push_back(i);
  REQUIRE(!rows.empty());
  CHECK(rows.size() <= 6u);
  for (std::size_t k = 1; k < rows.size(); ++k) CHECK(rows[k] == rows[k - 1] + 1);

  const SamplingConfig def;
  const Mask all = sampling_mask(g, def, 4);
  const Mask nadir = nadir_mask(g, def, 4);
  for (int d = 0; d < g.time_steps; d += def.swath_repeat_days) {
    for (int e = 0; e < g.time_steps; ++e) {
      if (e % def.swath_repeat_days != 0) CHECK(all.fraction(d) > nadir.fraction(e));
    }
  }
}

TEST_CASE("SST coarsening") {
  const SpaceTimeGrid g{16, 3, 0.05, 1.0};
  const SpaceTimeField f = random_field(g, 1, "sst");
  CHECK(coarsen_sst(f, 1).values() == f.values());
  const SpaceTimeField k(g, Tensor(g.shape(), 3.25), "sst", "K");
  for (int factor : {2, 4, 8, 16}) CHECK((coarsen_sst(k, factor).values() - k.values()).max_abs() < 1e-14);
  for (int factor : {2, 4, 8}) {
    const SpaceTimeField c = coarsen_sst(f, factor);
    for (int t = 0; t < 3; ++t) {
      double a = 0, b = 0;
      for (int i = 0; i < 256; ++i) a += f.values()[t * 256 + i], b += c.values()[t * 256 + i];
      CHECK(std::abs(a - b) / 256 < 1e-10);
    }
  }
  Tensor checker({1, 8, 8});
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) checker(0, i, j) = (i + j) % 2;
  const SpaceTimeGrid g1{8, 1, 0.05, 1.0};
  const SpaceTimeField cc = coarsen_sst(SpaceTimeField(g1, checker, "sst", "K"), 2);
  CHECK((cc.values() - Tensor({1, 8, 8}, 0.5)).max_abs() < 1e-15);
  CHECK_THROWS_AS(coarsen_sst(f, 3), DimensionError);
}

TEST_CASE("windows: counts, noise-free sampling, disjoint splits") {
  TruthConfig c = small_truth();
  const Truth t = generate_truth(c);
  const Mask full = Mask::filled(c.grid, true);
  OiConfig oi;
  oi.max_obs_per_window = 300;
  oi.half_window_days = 1;
  const ObservedSeries s = observe(t, full, oi);
  const DayRange r{0, 17};
  CHECK(make_windows(t, s, r, 4, 4).size() == 4u);
  CHECK(make_windows(t, s, r, 4, 1).size() == 14u);
  for (const Sample & w : make_windows(t, s, r, 4, 4)) {
    CHECK(w.obs.ssh_alongtrack.values() == w.truth.values());
    CHECK(w.obs.sst->values() == slice_days(t.sst, w.start_day, 4).values());
  }

  const Mask sparse = sampling_mask(c.grid, SamplingConfig{}, 3);
  const ObservedSeries s2 = observe(t, sparse, oi);
  const Dataset d = make_dataset(t, s2, DatasetSplit{{0, 12}, {12, 18}, {18, 24}}, 4, 1);
  auto days = [](const std::vector<Sample> & v) {
    std::set<int> out;
    for (const Sample & w : v)
      for (int k = 0; k < 4; ++k) out.insert(w.start_day + k);
    return out;
  };
  const auto a = days(d.train), b = days(d.validation), e = days(d.test);
  for (int x : a) CHECK((b.count(x) == 0 && e.count(x) == 0));
  for (int x : b) CHECK(e.count(x) == 0);
  for (const Sample & w : d.train)
    for (std::size_t i = 0; i < w.truth.values().size(); ++i)
      if (w.obs.ssh_mask.values()[i] != 0.0) CHECK(w.obs.ssh_alongtrack.values()[i] == w.truth.values()[i]);

  CHECK_THROWS_AS(make_windows(t, s, DayRange{0, 3}, 4, 1), ConfigError);
  CHECK_THROWS_AS((DatasetSplit{{0, 12}, {10, 18}, {18, 24}}.validate(24, 4)), ConfigError);
}
