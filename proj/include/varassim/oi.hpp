/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <vector>

#include "varassim/core_types.hpp"

namespace varassim {

struct OiConfig {
  double spatial_lengthscale = 1.0;   ///< degrees
  double temporal_lengthscale = 7.0;  ///< days
  double obs_noise_variance = 0.01;
  double prior_variance = 1.0;
  int max_obs_per_window = 2000;
  /// Half-width in days of the observation window used for each daily map of the product.
  int half_window_days = 5;

  void validate() const;
};

/// One scalar sample at grid cell (t, y, x); t may be fractional.
struct ObsPoint {
  double t;
  int y;
  int x;
  double value;
};

/// Observed cells of a masked field, in (t, y, x) order.
std::vector<ObsPoint> collect_observations(const SpaceTimeField & y, const Mask & mask, int t_offset = 0);

/// Every k-th point so that at most `cap` remain; deterministic.
std::vector<ObsPoint> subsample_uniform(const std::vector<ObsPoint> & points, int cap);

/// Zero-mean Gaussian-process posterior mean with separable squared-exponential
/// covariance, evaluated on frames `times` of a W x W grid with spacing dx and dt.
/// Returns [times.size(), W, W].
Tensor oi_posterior_mean(const std::vector<ObsPoint> & points, const std::vector<double> & times, int width,
                         double dx, double dt, const OiConfig & cfg);

/// Posterior mean over the whole window of `y` (observations capped at max_obs_per_window).
SpaceTimeField oi_interpolate(const SpaceTimeField & y, const Mask & mask, const OiConfig & cfg);

/// Daily gridded product over a full series: each day is mapped from observations
/// within +-half_window_days, anomalies taken about the mean of those observations.
SpaceTimeField oi_product(const SpaceTimeField & y, const Mask & mask, const OiConfig & cfg);

}  // namespace varassim
