/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/evaluation.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <sstream>

#include "varassim/errors.hpp"
#include "varassim/spectral.hpp"
#include "varassim/stencils.hpp"

namespace varassim {

void EvalConfig::validate() const {
  if (!(psd_threshold > 0.0)) throw ConfigError("eval.psd_threshold must be > 0");
  if (window_length < 1) throw ConfigError("eval.window_length must be >= 1");
}

namespace {

double mean_of(const Tensor & t) { return t.sum() / static_cast<double>(t.size()); }

double variance_of(const Tensor & t) {
  const double m = mean_of(t);
  double s = 0.0;
  for (double v : t.values()) s += (v - m) * (v - m);
  return s / static_cast<double>(t.size());
}

void require_same(const SpaceTimeField & a, const SpaceTimeField & b, const char * what) {
  if (a.grid() != b.grid()) throw DimensionError(std::string(what) + ": fields are on different grids");
}

double taper(int i, int n) {
  const double s = std::sin(std::numbers::pi * (i + 0.5) / n);
  return s * s;
}

}  // namespace

double mu_score(const SpaceTimeField & truth, const SpaceTimeField & recon) {
  require_same(truth, recon, "mu_score");
  const double var = variance_of(truth.values());
  if (!(var > 0.0)) throw NumericalError("undefined metric: mu needs a truth field with non-zero variance");
  const double mse = (recon.values() - truth.values()).sum_sq() / static_cast<double>(truth.values().size());
  return 1.0 - std::sqrt(mse) / std::sqrt(var);
}

BinnedSpectrum spatial_psd(const Tensor & frames, double dx) {
  const int n = frames.dim(0), h = frames.dim(1), w = frames.dim(2);
  if (h != w) throw DimensionError("spatial_psd needs square frames");
  const int bins = w / 2;
  BinnedSpectrum out{1.0 / (w * dx), std::vector<double>(bins, 0.0)};
  std::vector<double> count(bins, 0.0);
  std::vector<double> frame(static_cast<std::size_t>(w) * w);
  for (int f = 0; f < n; ++f) {
    const double * src = frames.data() + static_cast<std::size_t>(f) * w * w;
    double mean = 0.0;
    for (int i = 0; i < w * w; ++i) mean += src[i];
    mean /= w * w;
    for (int i = 0; i < w; ++i)
      for (int j = 0; j < w; ++j) frame[i * w + j] = (src[i * w + j] - mean) * taper(i, w) * taper(j, w);
    const spectral::HalfSpectrum s = spectral::forward(frame, w, w);
    for (int r = 0; r < w; ++r) {
      const int ky = r <= w / 2 ? r : r - w;
      for (int c = 0; c < s.columns(); ++c) {
        const int k = static_cast<int>(std::lround(std::sqrt(double(ky * ky + c * c))));
        if (k < 1 || k > bins) continue;
        // Interior columns stand for a conjugate pair.
        const double mult = (c == 0 || 2 * c == w) ? 1.0 : 2.0;
        out.power[k - 1] += mult * std::norm(s.at(r, c));
        count[k - 1] += mult;
      }
    }
  }
  for (int k = 0; k < bins; ++k) out.power[k] = count[k] > 0 ? out.power[k] / count[k] : 0.0;
  out.nyquist_scale = 2.0 * dx;
  return out;
}

BinnedSpectrum temporal_psd(const Tensor & frames, double dt) {
  const int n = frames.dim(0);
  const std::size_t plane = frames.size() / n;
  const int bins = n / 2;
  BinnedSpectrum out{1.0 / (n * dt), std::vector<double>(bins, 0.0)};
  std::vector<double> series(n);
  for (std::size_t p = 0; p < plane; ++p) {
    double mean = 0.0;
    for (int t = 0; t < n; ++t) mean += frames[t * plane + p];
    mean /= n;
    for (int t = 0; t < n; ++t) series[t] = (frames[t * plane + p] - mean) * taper(t, n);
    const std::vector<double> power = spectral::power_1d(series);
    for (int m = 1; m <= bins; ++m) out.power[m - 1] += power[m] / static_cast<double>(plane);
  }
  out.nyquist_scale = 2.0 * dt;
  return out;
}

std::optional<double> resolved_scale(const BinnedSpectrum & err, const BinnedSpectrum & truth, double threshold) {
  const std::size_t n = truth.power.size();
  if (err.power.size() != n) throw DimensionError("resolved_scale: spectra have different bin counts");
  auto ratio = [&](std::size_t k) {
    if (truth.power[k] > 0.0) return err.power[k] / truth.power[k];
    return err.power[k] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  };
  for (std::size_t k = 0; k < n; ++k) {
    const double r = ratio(k);
    if (r <= threshold) continue;
    if (k == 0) return std::nullopt;
    const double prev = ratio(k - 1);
    const double frac = std::isfinite(r) ? (threshold - prev) / (r - prev) : 0.0;
    return 1.0 / (truth.df * (static_cast<double>(k) + frac));
  }
  return truth.nyquist_scale;
}

ResolvedScales resolved_scales(const SpaceTimeField & truth, const SpaceTimeField & recon, double threshold) {
  require_same(truth, recon, "resolved_scales");
  const SpaceTimeGrid & g = truth.grid();
  if (g.time_steps < 4) throw DimensionError("resolved_scales needs at least 4 time steps");
  if (!(variance_of(truth.values()) > 0.0)) throw NumericalError("undefined metric: truth has zero variance");
  const Tensor err = recon.values() - truth.values();
  return {resolved_scale(spatial_psd(err, g.dx), spatial_psd(truth.values(), g.dx), threshold),
          resolved_scale(temporal_psd(err, g.dt), temporal_psd(truth.values(), g.dt), threshold)};
}

namespace {

double field_mse(const Tensor & d, Derivative derivative) {
  if (derivative == Derivative::none) return d.sum_sq() / static_cast<double>(d.size());
  return (stencils::diff_x(d).sum_sq() + stencils::diff_y(d).sum_sq()) / static_cast<double>(d.size());
}

}  // namespace

double tau_gain(const SpaceTimeField & truth, const SpaceTimeField & recon, const SpaceTimeField & baseline,
                Derivative derivative) {
  require_same(truth, recon, "tau_gain");
  require_same(truth, baseline, "tau_gain");
  const double base = field_mse(baseline.values() - truth.values(), derivative);
  if (!(base > 0.0)) throw NumericalError("undefined metric: baseline MSE is zero");
  return 100.0 * (1.0 - field_mse(recon.values() - truth.values(), derivative) / base);
}

double laplacian_explained_variance(const SpaceTimeField & truth, const SpaceTimeField & recon) {
  require_same(truth, recon, "laplacian_explained_variance");
  const Tensor lt = stencils::laplacian_interior(truth.values());
  const Tensor lr = stencils::laplacian_interior(recon.values());
  const double v = variance_of(lt);
  if (!(v > 0.0)) throw NumericalError("undefined metric: truth Laplacian has zero variance");
  return 100.0 * (1.0 - variance_of(lr - lt) / v);
}

namespace {

std::vector<double> window_mu(const SpaceTimeField & truth, const SpaceTimeField & recon, int length) {
  const SpaceTimeGrid & g = truth.grid();
  const int n = std::max(1, g.time_steps / length);
  const std::size_t plane = static_cast<std::size_t>(g.width) * g.width;
  std::vector<double> out;
  for (int k = 0; k < n; ++k) {
    const int begin = k * length;
    const int end = k == n - 1 ? g.time_steps : begin + length;
    const SpaceTimeGrid wg = g.with_time_steps(end - begin);
    auto slice = [&](const SpaceTimeField & f) {
      return SpaceTimeField(wg, Tensor(wg.shape(), std::vector<double>(f.values().data() + begin * plane,
                                                                      f.values().data() + end * plane)),
                            f.name(), f.units());
    };
    out.push_back(mu_score(slice(truth), slice(recon)));
  }
  return out;
}

}  // namespace

std::vector<MetricReport> report(const std::vector<NamedField> & methods, const SpaceTimeField & truth,
                                 const std::string & baseline_name, const EvalConfig & cfg) {
  cfg.validate();
  const auto base = std::find_if(methods.begin(), methods.end(),
                                 [&](const NamedField & m) { return m.name == baseline_name; });
  if (base == methods.end()) throw ConfigError("baseline '" + baseline_name + "' is not among the methods");
  std::vector<MetricReport> out;
  for (const NamedField & m : methods) {
    MetricReport r;
    r.method = m.name;
    r.per_window_mu = window_mu(truth, m.field, cfg.window_length);
    if (cfg.per_window_mu) {
      double s = 0.0;
      for (double v : r.per_window_mu) s += v;
      r.mu = s / static_cast<double>(r.per_window_mu.size());
    } else {
      r.mu = mu_score(truth, m.field);
    }
    const ResolvedScales s = resolved_scales(truth, m.field, cfg.psd_threshold);
    r.lambda_x = s.lambda_x;
    r.lambda_t = s.lambda_t;
    r.tau_ssh = tau_gain(truth, m.field, base->field, Derivative::none);
    r.tau_grad_ssh = tau_gain(truth, m.field, base->field, Derivative::grad);
    r.tau_lap_ssh = laplacian_explained_variance(truth, m.field);
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string scale_text(const std::optional<double> & v) { return v ? number(*v) : "unresolved"; }

Json scale_json(const std::optional<double> & v) { return v ? Json(*v) : Json("unresolved"); }

}  // namespace

std::string report_csv(const std::vector<MetricReport> & reports) {
  std::ostringstream s;
  s << "method,mu,lambda_x_deg,lambda_t_days,tau_ssh_pct,tau_grad_ssh_pct,tau_lap_ssh_pct\n";
  for (const MetricReport & r : reports) {
    s << r.method << ',' << number(r.mu) << ',' << scale_text(r.lambda_x) << ',' << scale_text(r.lambda_t) << ','
      << number(r.tau_ssh) << ',' << number(r.tau_grad_ssh) << ',' << number(r.tau_lap_ssh) << '\n';
  }
  return s.str();
}

Json report_json(const std::vector<MetricReport> & reports) {
  Json out = Json::array();
  for (const MetricReport & r : reports) {
    out.push_back({{"method", r.method},
                   {"mu", r.mu},
                   {"lambda_x", scale_json(r.lambda_x)},
                   {"lambda_t", scale_json(r.lambda_t)},
                   {"tau_ssh", r.tau_ssh},
                   {"tau_grad_ssh", r.tau_grad_ssh},
                   {"tau_lap_ssh", r.tau_lap_ssh},
                   {"per_window_mu", r.per_window_mu}});
  }
  return out;
}

SpaceTimeField assemble_series(int begin, int end, int time_steps,
                               const std::function<SpaceTimeField(int start)> & window) {
  if (end - begin < time_steps) throw ConfigError("series range is shorter than one window");
  std::map<int, SpaceTimeField> cache;
  std::optional<SpaceTimeGrid> grid;
  Tensor values;
  std::string name = "ssh", units = "m";
  for (int d = begin; d < end; ++d) {
    const int s = std::clamp(d - time_steps / 2, begin, end - time_steps);
    auto it = cache.find(s);
    if (it == cache.end()) it = cache.emplace(s, window(s)).first;
    const SpaceTimeField & w = it->second;
    if (!grid) {
      grid = w.grid().with_time_steps(end - begin);
      values = Tensor(grid->shape());
      name = w.name();
      units = w.units();
    }
    if (w.grid().time_steps != time_steps || w.grid().width != grid->width) {
      throw DimensionError("assemble_series: window for day " + std::to_string(s) + " has the wrong shape");
    }
    const std::size_t plane = static_cast<std::size_t>(grid->width) * grid->width;
    std::copy(w.values().data() + (d - s) * plane, w.values().data() + (d - s + 1) * plane,
              values.data() + (d - begin) * plane);
  }
  return SpaceTimeField(*grid, values, name, units);
}

Tensor gradient_norm(const Tensor & frames) {
  const Tensor gx = stencils::diff_x(frames), gy = stencils::diff_y(frames);
  Tensor out(frames.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::sqrt(gx[i] * gx[i] + gy[i] * gy[i]);
  return out;
}

PlotSet plot_fields(const std::vector<NamedField> & methods, int day, const std::filesystem::path & out_dir) {
  if (methods.empty()) throw ConfigError("plot_fields: no fields to plot");
  const SpaceTimeGrid & g = methods.front().field.grid();
  if (day < 0 || day >= g.time_steps) {
    throw ConfigError("day " + std::to_string(day) + " is outside the " + std::to_string(g.time_steps) +
                      "-day series");
  }
  const std::size_t plane = static_cast<std::size_t>(g.width) * g.width;
  std::vector<Tensor> grads, laps;
  PlotSet out;
  for (const NamedField & m : methods) {
    if (m.field.grid() != g) throw DimensionError("plot_fields: fields are on different grids");
    Tensor frame({1, g.width, g.width},
                 std::vector<double>(m.field.values().data() + day * plane, m.field.values().data() + (day + 1) * plane));
    grads.push_back(gradient_norm(frame) * (1.0 / g.dx));
    laps.push_back(stencils::laplacian_interior(frame) * (1.0 / (g.dx * g.dx)));
  }
  auto range = [](const std::vector<Tensor> & ts, double & lo, double & hi) {
    lo = ts.front()[0];
    hi = lo;
    for (const Tensor & t : ts)
      for (double v : t.values()) lo = std::min(lo, v), hi = std::max(hi, v);
  };
  range(grads, out.grad_min, out.grad_max);
  range(laps, out.lap_min, out.lap_max);
  std::filesystem::create_directories(out_dir);
  for (std::size_t k = 0; k < methods.size(); ++k) {
    const std::string stem = methods[k].name + "_day" + std::to_string(day);
    out.files.push_back(out_dir / (stem + "_grad.png"));
    write_png(out.files.back(), grads[k].reshaped({grads[k].dim(1), grads[k].dim(2)}), out.grad_min, out.grad_max);
    out.files.push_back(out_dir / (stem + "_lap.png"));
    write_png(out.files.back(), laps[k].reshaped({laps[k].dim(1), laps[k].dim(2)}), out.lap_min, out.lap_max);
  }
  return out;
}

namespace {

// Anchors of a perceptually ordered blue-green-yellow map.
constexpr double kColours[][3] = {{68, 1, 84},    {72, 40, 120},  {62, 74, 137},  {49, 104, 142}, {38, 130, 142},
                                  {31, 158, 137}, {53, 183, 121}, {109, 205, 89}, {180, 222, 44}, {253, 231, 37}};

void colour(double u, png_byte * rgb) {
  constexpr int n = sizeof kColours / sizeof kColours[0];
  u = std::clamp(u, 0.0, 1.0) * (n - 1);
  const int i = std::min(static_cast<int>(u), n - 2);
  const double t = u - i;
  for (int c = 0; c < 3; ++c) rgb[c] = static_cast<png_byte>(std::lround((1 - t) * kColours[i][c] + t * kColours[i + 1][c]));
}

}  // namespace

void write_png(const std::filesystem::path & path, const Tensor & frame, double vmin, double vmax) {
  if (frame.rank() != 2) throw DimensionError("write_png expects a 2-D frame");
  constexpr int zoom = 4;
  const int h = frame.dim(0), w = frame.dim(1);
  FILE * fp = std::fopen(path.c_str(), "wb");
  if (!fp) throw FormatError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
    throw FormatError("libpng failed writing " + path.string());
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, w * zoom, h * zoom, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_byte> row(static_cast<std::size_t>(w) * zoom * 3);
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      png_byte rgb[3];
      colour((frame[static_cast<std::size_t>(i) * w + j] - vmin) / span, rgb);
      for (int z = 0; z < zoom; ++z) std::copy(rgb, rgb + 3, row.data() + (j * zoom + z) * 3);
    }
    for (int z = 0; z < zoom; ++z) png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

}  // namespace varassim
