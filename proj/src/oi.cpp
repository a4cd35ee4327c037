/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/oi.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <iostream>

#include "varassim/errors.hpp"

namespace varassim {

void OiConfig::validate() const {
  if (!(spatial_lengthscale > 0.0) || !(temporal_lengthscale > 0.0)) throw ConfigError("OI lengthscales must be > 0");
  if (!(obs_noise_variance >= 0.0) || !(prior_variance >= 0.0)) throw ConfigError("OI variances must be >= 0");
  if (max_obs_per_window < 1) throw ConfigError("oi.max_obs_per_window must be >= 1");
  if (half_window_days < 0) throw ConfigError("oi.half_window_days must be >= 0");
}

std::vector<ObsPoint> collect_observations(const SpaceTimeField & y, const Mask & mask, int t_offset) {
  const SpaceTimeGrid & g = y.grid();
  std::vector<ObsPoint> points;
  for (int t = 0; t < g.time_steps; ++t)
    for (int i = 0; i < g.width; ++i)
      for (int j = 0; j < g.width; ++j)
        if (mask.observed(t, i, j)) points.push_back({static_cast<double>(t + t_offset), i, j, y.values()(t, i, j)});
  return points;
}

std::vector<ObsPoint> subsample_uniform(const std::vector<ObsPoint> & points, int cap) {
  const std::size_t n = points.size();
  if (n <= static_cast<std::size_t>(cap)) return points;
  std::vector<ObsPoint> out;
  out.reserve(cap);
  for (std::size_t i = 0; i < static_cast<std::size_t>(cap); ++i) out.push_back(points[i * n / cap]);
  return out;
}

Tensor oi_posterior_mean(const std::vector<ObsPoint> & points, const std::vector<double> & times, int width,
                         double dx, double dt, const OiConfig & cfg) {
  cfg.validate();
  const int nf = static_cast<int>(times.size());
  Tensor out({nf, width, width});
  const int n = static_cast<int>(points.size());
  if (n == 0 || cfg.prior_variance == 0.0) return out;

  // Spatial offsets are integers on the grid: tabulate the 1-D kernel.
  std::vector<double> ks(width);
  for (int d = 0; d < width; ++d) {
    const double r = d * dx / cfg.spatial_lengthscale;
    ks[d] = std::exp(-0.5 * r * r);
  }
  auto kt = [&](double a, double b) {
    const double r = (a - b) * dt / cfg.temporal_lengthscale;
    return std::exp(-0.5 * r * r);
  };

  Eigen::MatrixXd k(n, n);
  Eigen::VectorXd v(n);
  for (int a = 0; a < n; ++a) {
    v(a) = points[a].value;
    for (int b = 0; b <= a; ++b) {
      const double c = cfg.prior_variance * kt(points[a].t, points[b].t) * ks[std::abs(points[a].y - points[b].y)] *
                       ks[std::abs(points[a].x - points[b].x)];
      k(a, b) = c;
      k(b, a) = c;
    }
  }
  double jitter = cfg.obs_noise_variance;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int attempt = 0;; ++attempt) {
    Eigen::MatrixXd kk = k;
    kk.diagonal().array() += jitter;
    llt.compute(kk);
    if (llt.info() == Eigen::Success) break;
    if (attempt == 12) throw NumericalError("OI covariance is not positive definite even after regularization");
    jitter = std::max(jitter * 10.0, 1e-10 * cfg.prior_variance);
    std::cerr << "warning: OI system singular, diagonal regularized to " << jitter << "\n";
  }
  const Eigen::VectorXd alpha = llt.solve(v);

  // mean(t, i, j) = sum_a alpha_a s kt(t, t_a) ks(i - y_a) ks(j - x_a), done separably:
  // per frame, per observation row y_a, accumulate into a W x W buffer via row vectors.
  for (int f = 0; f < nf; ++f) {
    Eigen::MatrixXd rowsum = Eigen::MatrixXd::Zero(width, width);  // [y_a][x]
    for (int a = 0; a < n; ++a) {
      const double w = alpha(a) * cfg.prior_variance * kt(times[f], points[a].t);
      for (int j = 0; j < width; ++j) rowsum(points[a].y, j) += w * ks[std::abs(j - points[a].x)];
    }
    Eigen::MatrixXd ky(width, width);
    for (int i = 0; i < width; ++i)
      for (int r = 0; r < width; ++r) ky(i, r) = ks[std::abs(i - r)];
    const Eigen::MatrixXd frame = ky * rowsum;
    for (int i = 0; i < width; ++i)
      for (int j = 0; j < width; ++j) out(f, i, j) = frame(i, j);
  }
  return out;
}

SpaceTimeField oi_interpolate(const SpaceTimeField & y, const Mask & mask, const OiConfig & cfg) {
  const SpaceTimeGrid & g = y.grid();
  if (mask.grid() != g) throw DimensionError("oi_interpolate: mask grid differs");
  const auto points = subsample_uniform(collect_observations(y, mask), cfg.max_obs_per_window);
  std::vector<double> times(g.time_steps);
  for (int t = 0; t < g.time_steps; ++t) times[t] = t;
  return SpaceTimeField(g, oi_posterior_mean(points, times, g.width, g.dx, g.dt, cfg), "ssh_oi", y.units());
}

SpaceTimeField oi_product(const SpaceTimeField & y, const Mask & mask, const OiConfig & cfg) {
  cfg.validate();
  const SpaceTimeGrid & g = y.grid();
  if (mask.grid() != g) throw DimensionError("oi_product: mask grid differs");
  const auto all = collect_observations(y, mask);
  Tensor out(g.shape());
  const std::size_t plane = static_cast<std::size_t>(g.width) * g.width;
  for (int d = 0; d < g.time_steps; ++d) {
    std::vector<ObsPoint> near;
    for (const ObsPoint & p : all) {
      if (std::abs(p.t - d) <= cfg.half_window_days) near.push_back(p);
    }
    near = subsample_uniform(near, cfg.max_obs_per_window);
    double mean = 0.0;
    for (const ObsPoint & p : near) mean += p.value;
    if (!near.empty()) mean /= static_cast<double>(near.size());
    for (ObsPoint & p : near) p.value -= mean;
    const Tensor frame = oi_posterior_mean(near, {static_cast<double>(d)}, g.width, g.dx, g.dt, cfg);
    for (std::size_t i = 0; i < plane; ++i) out[d * plane + i] = frame[i] + mean;
  }
  return SpaceTimeField(g, out, "ssh_oi", y.units());
}

}  // namespace varassim
