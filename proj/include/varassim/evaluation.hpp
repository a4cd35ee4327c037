/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "varassim/array_io.hpp"
#include "varassim/core_types.hpp"

namespace varassim {

struct EvalConfig {
  /// Error-to-signal PSD ratio below which a scale counts as resolved.
  double psd_threshold = 0.5;
  /// Average window-wise mu instead of normalizing over the whole period.
  bool per_window_mu = false;
  /// Window length for the per-window breakdown.
  int window_length = 7;

  void validate() const;
};

/// 1 - RMS(recon - truth) / RMS(truth - mean(truth)).
double mu_score(const SpaceTimeField & truth, const SpaceTimeField & recon);

/// nullopt marks an unresolved axis.
struct ResolvedScales {
  std::optional<double> lambda_x;  ///< degrees
  std::optional<double> lambda_t;  ///< days
};

/// Radially binned spectrum: bins k = 1 .. n with frequency k * df.
struct BinnedSpectrum {
  double df = 0.0;
  std::vector<double> power;  ///< power[k - 1] for bin k
  double nyquist_scale = 0.0;  ///< reported when every bin is resolved
};

/// Time-averaged radial PSD of Hann-tapered, mean-removed frames; bins of width 1 / (W dx) up to Nyquist.
BinnedSpectrum spatial_psd(const Tensor & frames, double dx);
/// Space-averaged PSD of Hann-tapered, mean-removed pixel series; bins of width 1 / (T dt).
BinnedSpectrum temporal_psd(const Tensor & frames, double dt);

/// Largest scale 1 / f_c such that err / truth <= threshold on every bin up to f_c,
/// linearly interpolated between bins. All bins resolved gives the Nyquist scale;
/// a failing first bin gives nullopt.
std::optional<double> resolved_scale(const BinnedSpectrum & err, const BinnedSpectrum & truth, double threshold);

ResolvedScales resolved_scales(const SpaceTimeField & truth, const SpaceTimeField & recon, double threshold = 0.5);

enum class Derivative { none, grad };

/// 100 (1 - MSE(recon) / MSE(baseline)), optionally on spatial gradients.
double tau_gain(const SpaceTimeField & truth, const SpaceTimeField & recon, const SpaceTimeField & baseline,
                Derivative derivative);

/// 100 (1 - Var(lap recon - lap truth) / Var(lap truth)) with the interior 5-point Laplacian.
double laplacian_explained_variance(const SpaceTimeField & truth, const SpaceTimeField & recon);

struct MetricReport {
  std::string method;
  double mu = 0.0;
  std::optional<double> lambda_x;
  std::optional<double> lambda_t;
  double tau_ssh = 0.0;
  double tau_grad_ssh = 0.0;
  double tau_lap_ssh = 0.0;
  std::vector<double> per_window_mu;
};

struct NamedField {
  std::string name;
  SpaceTimeField field;
};

/// One report per method; tau columns are relative to `baseline_name`.
std::vector<MetricReport> report(const std::vector<NamedField> & methods, const SpaceTimeField & truth,
                                 const std::string & baseline_name, const EvalConfig & cfg = {});

std::string report_csv(const std::vector<MetricReport> & reports);
Json report_json(const std::vector<MetricReport> & reports);

/// Daily series over [begin, end): each day d comes from the window starting at
/// clamp(d - T / 2, begin, end - T); `window` returns the T-day field for a start day.
SpaceTimeField assemble_series(int begin, int end, int time_steps,
                               const std::function<SpaceTimeField(int start)> & window);

/// Per-pixel gradient norm of each frame.
Tensor gradient_norm(const Tensor & frames);

struct PlotSet {
  double grad_min = 0.0, grad_max = 0.0;
  double lap_min = 0.0, lap_max = 0.0;
  std::vector<std::filesystem::path> files;
};

/// Gradient-norm and Laplacian maps of day `day` (frame index) for each method,
/// colour scales shared across methods.
PlotSet plot_fields(const std::vector<NamedField> & methods, int day, const std::filesystem::path & out_dir);

/// Writes a frame [H,W] as an RGB PNG with a perceptual colour map over [vmin, vmax].
void write_png(const std::filesystem::path & path, const Tensor & frame, double vmin, double vmax);

}  // namespace varassim
