/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/osse_data.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "varassim/errors.hpp"
#include "varassim/spectral.hpp"
#include "varassim/stencils.hpp"

namespace varassim {

std::string to_string(SstCoupling c) { return c == SstCoupling::sqg ? "sqg" : "independent"; }

SstCoupling sst_coupling_from_string(const std::string & s) {
  if (s == "sqg") return SstCoupling::sqg;
  if (s == "independent") return SstCoupling::independent;
  throw ConfigError("unknown sst_coupling '" + s + "'");
}

void TruthConfig::validate(int window_length) const {
  grid.validate();
  if (!(spectral_slope < -1.0)) throw ConfigError("truth.spectral_slope must be < -1");
  if (grid.time_steps < 3 * window_length) {
    throw ConfigError("truth series of " + std::to_string(grid.time_steps) + " days is shorter than 3 windows");
  }
  if (!(sst_noise_amplitude >= 0.0) || !(ssh_rms > 0.0)) throw ConfigError("truth amplitudes must be positive");
  if (grid.width % 2 != 0) throw DimensionError("truth grid width must be even");
}

void SamplingConfig::validate() const {
  if (n_nadir_tracks_per_day < 0) throw ConfigError("sampling.n_nadir_tracks_per_day must be >= 0");
  if (track_width < 1 || swath_width < 1) throw ConfigError("sampling widths must be >= 1");
  if (swath_gap < 0) throw ConfigError("sampling.swath_gap must be >= 0");
  if (swath_repeat_days < 1) throw ConfigError("sampling.swath_repeat_days must be >= 1");
  if (track_angle_max < track_angle_min) throw ConfigError("sampling track angle range is empty");
  if (!(obs_noise_std >= 0.0)) throw ConfigError("sampling.obs_noise_std must be >= 0");
}

void DatasetSplit::validate(int n_days, int window_length) const {
  for (const DayRange * r : {&train, &validation, &test}) {
    if (r->begin < 0 || r->end > n_days || r->length() < window_length) {
      throw ConfigError("split range [" + std::to_string(r->begin) + ", " + std::to_string(r->end) +
                        ") must lie in the series and hold at least one window");
    }
  }
  auto overlap = [](const DayRange & a, const DayRange & b) { return a.begin < b.end && b.begin < a.end; };
  if (overlap(train, validation) || overlap(train, test) || overlap(validation, test)) {
    throw ConfigError("train, validation and test ranges must be disjoint");
  }
}

SpaceTimeField random_phase_field(const SpaceTimeGrid & grid, double slope, double advection_speed,
                                  double rotation_rate, std::uint64_t seed, const char * name, const char * units) {
  grid.validate();
  const int w = grid.width;
  const int cols = w / 2 + 1;
  const double two_pi = 2.0 * std::numbers::pi;
  Rng rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, two_pi);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double heading = uniform(rng);
  const double ux = advection_speed * grid.dx * std::cos(heading);  // degrees per day
  const double uy = advection_speed * grid.dx * std::sin(heading);

  const std::size_t modes = static_cast<std::size_t>(w) * cols;
  std::vector<double> amp(modes), phase0(modes), drift(modes);
  for (int r = 0; r < w; ++r) {
    for (int c = 0; c < cols; ++c) {
      const std::size_t m = static_cast<std::size_t>(r) * cols + c;
      const double fy = spectral::frequency(r, w, grid.dx);
      const double fx = spectral::frequency(c, w, grid.dx);
      const double f = std::sqrt(fx * fx + fy * fy);
      amp[m] = f > 0.0 ? std::pow(f, 0.5 * slope) : 0.0;
      phase0[m] = uniform(rng);
      // Advection moves every mode's phase; the random drift decorrelates it.
      drift[m] = -two_pi * (fx * ux + fy * uy) + rotation_rate * normal(rng);
    }
  }

  Tensor values(grid.shape());
  const std::size_t plane = static_cast<std::size_t>(w) * w;
  spectral::HalfSpectrum spec{w, w, std::vector<spectral::Complex>(modes)};
  for (int t = 0; t < grid.time_steps; ++t) {
    const double time = t * grid.dt;
    for (std::size_t m = 0; m < modes; ++m) spec.data[m] = std::polar(amp[m], phase0[m] + drift[m] * time);
    // Columns 0 and W/2 hold their own mirror images: enforce Hermitian symmetry.
    for (int c : {0, w / 2}) {
      for (int r = 1; r < w / 2; ++r) spec.at(w - r, c) = std::conj(spec.at(r, c));
      spec.at(0, c) = spec.at(0, c).real();
      spec.at(w / 2, c) = spec.at(w / 2, c).real();
    }
    const std::vector<double> frame = spectral::inverse(spec);
    std::copy(frame.begin(), frame.end(), values.data() + t * plane);
  }
  const double rms = std::sqrt(values.sum_sq() / static_cast<double>(values.size()));
  if (rms > 0.0) values *= 1.0 / rms;
  return SpaceTimeField(grid, std::move(values), name, units);
}

Truth generate_truth(const TruthConfig & cfg) {
  cfg.grid.validate();
  SpaceTimeField ssh = random_phase_field(cfg.grid, cfg.spectral_slope, cfg.advection_speed, cfg.phase_rotation_rate,
                                          cfg.seed, "ssh", "m");
  ssh = ssh.with_values(ssh.values() * cfg.ssh_rms);
  const SpaceTimeField sqg_part = sqg_transfer(ssh, cfg.sqg);
  const double sqg_rms = std::sqrt(sqg_part.values().sum_sq() / static_cast<double>(sqg_part.values().size()));
  const SpaceTimeField noise = random_phase_field(cfg.grid, cfg.spectral_slope, cfg.advection_speed,
                                                  cfg.phase_rotation_rate, cfg.seed ^ 0x5eedf00dULL, "sst_noise", "K");
  Tensor sst;
  if (cfg.sst_coupling == SstCoupling::sqg) {
    sst = sqg_part.values();
    if (cfg.sst_noise_amplitude > 0.0) sst += noise.values() * (cfg.sst_noise_amplitude * sqg_rms);
  } else {
    sst = noise.values() * (std::max(cfg.sst_noise_amplitude, 1.0) * sqg_rms);
  }
  return {std::move(ssh), SpaceTimeField(cfg.grid, std::move(sst), "sst", "K")};
}

namespace {

struct Line {
  double x0;
  double y0;
  double sin_a;
  double cos_a;

  // Signed distance in cells of cell (i, j) centre from the line.
  double distance(int i, int j) const { return -(j + 0.5 - x0) * sin_a + (i + 0.5 - y0) * cos_a; }
};

Line make_line(double angle_deg, double x0, double y0) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  return {x0, y0, std::sin(a), std::cos(a)};
}

}  // namespace

Mask nadir_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed) {
  grid.validate();
  cfg.validate();
  Rng rng(seed);
  std::uniform_real_distribution<double> angle(cfg.track_angle_min, cfg.track_angle_max);
  std::uniform_real_distribution<double> pos(0.0, grid.width);
  Tensor m(grid.shape());
  const double half = 0.5 * cfg.track_width;
  for (int t = 0; t < grid.time_steps; ++t) {
    for (int k = 0; k < cfg.n_nadir_tracks_per_day; ++k) {
      const double a = angle(rng);
      const double x0 = pos(rng);
      const double y0 = pos(rng);
      const Line line = make_line(a, x0, y0);
      for (int i = 0; i < grid.width; ++i)
        for (int j = 0; j < grid.width; ++j) {
          const double d = line.distance(i, j);
          if (d >= -half && d < half) m(t, i, j) = 1.0;
        }
    }
  }
  return Mask(grid, std::move(m));
}

Mask swath_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed) {
  grid.validate();
  cfg.validate();
  Tensor m(grid.shape());
  if (!cfg.swath_enabled) return Mask(grid, std::move(m));
  Rng rng(seed ^ 0x5a7a7aULL);
  std::uniform_real_distribution<double> angle(cfg.track_angle_min, cfg.track_angle_max);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double base = unit(rng) * grid.width;
  const double g2 = 0.5 * cfg.swath_gap;
  const double c = 0.5 * grid.width;
  for (int t = 0; t < grid.time_steps; t += cfg.swath_repeat_days) {
    const int pass = t / cfg.swath_repeat_days;
    const double a = angle(rng);
    // The swath centre shifts across the domain from one pass to the next.
    const double offset = std::fmod(base + pass * 0.382 * grid.width, static_cast<double>(grid.width)) - c;
    const Line line = make_line(a, c, c);
    for (int i = 0; i < grid.width; ++i)
      for (int j = 0; j < grid.width; ++j) {
        const double d = line.distance(i, j) - offset;
        if ((d >= g2 && d < g2 + cfg.swath_width) || (d >= -g2 - cfg.swath_width && d < -g2)) m(t, i, j) = 1.0;
      }
  }
  return Mask(grid, std::move(m));
}

Mask mask_union(const Mask & a, const Mask & b) {
  if (a.grid() != b.grid()) throw DimensionError("mask_union: grids differ");
  Tensor m(a.grid().shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = (a.values()[i] != 0.0 || b.values()[i] != 0.0) ? 1.0 : 0.0;
  return Mask(a.grid(), std::move(m));
}

Mask sampling_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed) {
  const Mask nadir = nadir_mask(grid, cfg, seed);
  if (!cfg.swath_enabled) return nadir;
  return mask_union(nadir, swath_mask(grid, cfg, seed));
}

SpaceTimeField coarsen_sst(const SpaceTimeField & sst, int factor) {
  const int w = sst.grid().width;
  if (factor < 1 || w % factor != 0) {
    throw DimensionError("coarsen_sst: width " + std::to_string(w) + " is not divisible by factor " +
                         std::to_string(factor));
  }
  if (factor == 1) return sst;
  return sst.with_values(stencils::upsample_bilinear(stencils::avg_pool(sst.values(), factor), factor));
}

SpaceTimeField slice_days(const SpaceTimeField & f, int begin, int count) {
  const SpaceTimeGrid & g = f.grid();
  if (begin < 0 || count < 1 || begin + count > g.time_steps) throw DimensionError("slice_days: out of range");
  const std::size_t plane = static_cast<std::size_t>(g.width) * g.width;
  const double * src = f.values().data() + begin * plane;
  const SpaceTimeGrid sub = g.with_time_steps(count);
  return SpaceTimeField(sub, Tensor(sub.shape(), std::vector<double>(src, src + count * plane)), f.name(), f.units());
}

Mask slice_days(const Mask & m, int begin, int count) {
  const SpaceTimeField f(m.grid(), m.values(), "mask", "1");
  return Mask(m.grid().with_time_steps(count), slice_days(f, begin, count).values());
}

SpaceTimeField sample_ssh(const Truth & truth, const Mask & mask, double obs_noise_std, std::uint64_t noise_seed) {
  Tensor y = truth.ssh.values();
  Rng rng(noise_seed);
  std::normal_distribution<double> normal(0.0, obs_noise_std > 0.0 ? obs_noise_std : 1.0);
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (mask.values()[i] == 0.0) y[i] = 0.0;
    else if (obs_noise_std > 0.0) y[i] += normal(rng);
  }
  return SpaceTimeField(truth.ssh.grid(), std::move(y), "ssh_obs", "m", mask);
}

ObservedSeries observe(const Truth & truth, const Mask & mask, const OiConfig & oi, double obs_noise_std,
                       std::uint64_t noise_seed) {
  SpaceTimeField obs = sample_ssh(truth, mask, obs_noise_std, noise_seed);
  SpaceTimeField coarse = oi_product(obs, mask, oi).renamed("ssh_coarse");
  return {std::move(obs), mask, std::move(coarse), truth.sst};
}

std::vector<int> window_starts(const DayRange & range, int window_length, int stride) {
  if (stride < 1) throw ConfigError("window stride must be >= 1");
  std::vector<int> starts;
  for (int s = range.begin; s + window_length <= range.end; s += stride) starts.push_back(s);
  return starts;
}

std::vector<Sample> make_windows(const Truth & truth, const ObservedSeries & series, const DayRange & range,
                                 int window_length, int stride) {
  const std::vector<int> starts = window_starts(range, window_length, stride);
  if (starts.empty()) {
    throw ConfigError("day range [" + std::to_string(range.begin) + ", " + std::to_string(range.end) +
                      ") holds no window of " + std::to_string(window_length) + " days");
  }
  std::vector<Sample> out;
  out.reserve(starts.size());
  for (int s : starts) {
    ObservationSet obs(slice_days(series.ssh_obs, s, window_length), slice_days(series.mask, s, window_length),
                       slice_days(series.ssh_coarse, s, window_length), slice_days(series.sst, s, window_length));
    out.push_back({s, std::move(obs), slice_days(truth.ssh, s, window_length)});
  }
  return out;
}

Dataset make_dataset(const Truth & truth, const ObservedSeries & series, const DatasetSplit & split, int window_length,
                     int stride) {
  split.validate(truth.ssh.grid().time_steps, window_length);
  return {make_windows(truth, series, split.train, window_length, stride),
          make_windows(truth, series, split.validation, window_length, stride),
          make_windows(truth, series, split.test, window_length, stride)};
}

}  // namespace varassim
