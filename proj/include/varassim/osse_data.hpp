/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "varassim/core_types.hpp"
#include "varassim/obs_operators.hpp"
#include "varassim/oi.hpp"

namespace varassim {

enum class SstCoupling { sqg, independent };

std::string to_string(SstCoupling c);
SstCoupling sst_coupling_from_string(const std::string & s);

/// Synthetic truth: doubly periodic random-phase SSH with a power-law spectrum,
/// advected and slowly decorrelating in time, and an SST series derived from it.
struct TruthConfig {
  std::uint64_t seed = 1;
  SpaceTimeGrid grid{64, 120, 0.05, 1.0};  ///< time_steps = series length in days
  double spectral_slope = -4.0;
  double advection_speed = 0.5;     ///< grid cells per day
  double phase_rotation_rate = 0.15;  ///< rad/day, scale of per-mode phase drift
  double ssh_rms = 0.1;             ///< metres
  SstCoupling sst_coupling = SstCoupling::sqg;
  /// Independent smooth SST part, relative to the RMS of the SQG part.
  double sst_noise_amplitude = 0.1;
  SqgConfig sqg{1.0 / 3.0, 2.0, 1.0};

  void validate(int window_length) const;
};

struct SamplingConfig {
  int n_nadir_tracks_per_day = 3;
  double track_angle_min = 60.0;  ///< degrees from the x axis
  double track_angle_max = 120.0;
  int track_width = 1;
  bool swath_enabled = true;
  int swath_width = 5;
  int swath_gap = 3;
  int swath_repeat_days = 4;
  /// Standard deviation of additive Gaussian noise on sampled SSH; 0 disables it.
  double obs_noise_std = 0.0;

  void validate() const;
};

struct DayRange {
  int begin = 0;
  int end = 0;  ///< exclusive

  int length() const noexcept { return end - begin; }
  friend bool operator==(const DayRange &, const DayRange &) = default;
};

struct DatasetSplit {
  DayRange train{0, 80};
  DayRange validation{80, 100};
  DayRange test{100, 120};

  void validate(int n_days, int window_length) const;
};

struct Truth {
  SpaceTimeField ssh;
  SpaceTimeField sst;
};

Truth generate_truth(const TruthConfig & cfg);

/// Random-phase field with radially averaged power ~ |k|^slope, zero mean, unit RMS
/// over the series. The same seed always yields the same field.
SpaceTimeField random_phase_field(const SpaceTimeGrid & grid, double slope, double advection_speed,
                                  double rotation_rate, std::uint64_t seed, const char * name, const char * units);

Mask nadir_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed);
Mask swath_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed);
/// Union of the nadir tracks and (when enabled) the swath.
Mask sampling_mask(const SpaceTimeGrid & grid, const SamplingConfig & cfg, std::uint64_t seed);
Mask mask_union(const Mask & a, const Mask & b);

/// Per frame: block average by `factor`, then bilinear interpolation back.
SpaceTimeField coarsen_sst(const SpaceTimeField & sst, int factor);

/// Days [begin, begin + count) of a series.
SpaceTimeField slice_days(const SpaceTimeField & f, int begin, int count);
Mask slice_days(const Mask & m, int begin, int count);

/// Observations of a full series: sampled SSH, its mask, the OI product and SST.
struct ObservedSeries {
  SpaceTimeField ssh_obs;
  Mask mask;
  SpaceTimeField ssh_coarse;
  SpaceTimeField sst;
};

/// Truth on the mask (plus optional Gaussian noise), zero elsewhere.
SpaceTimeField sample_ssh(const Truth & truth, const Mask & mask, double obs_noise_std = 0.0,
                          std::uint64_t noise_seed = 0);

ObservedSeries observe(const Truth & truth, const Mask & mask, const OiConfig & oi, double obs_noise_std = 0.0,
                       std::uint64_t noise_seed = 0);

struct Sample {
  int start_day = 0;
  ObservationSet obs;
  SpaceTimeField truth;
};

struct Dataset {
  std::vector<Sample> train;
  std::vector<Sample> validation;
  std::vector<Sample> test;
};

/// Window start days of length-T windows with the given stride inside a range.
std::vector<int> window_starts(const DayRange & range, int window_length, int stride);

std::vector<Sample> make_windows(const Truth & truth, const ObservedSeries & series, const DayRange & range,
                                 int window_length, int stride);
Dataset make_dataset(const Truth & truth, const ObservedSeries & series, const DatasetSplit & split,
                     int window_length, int stride);

}  // namespace varassim
