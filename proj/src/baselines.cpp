/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/baselines.hpp"

#include <numbers>

#include "varassim/errors.hpp"
#include "varassim/spectral.hpp"

namespace varassim {

using ad::Var;

void UnetDirectConfig::validate() const {
  if (net.kind != PriorKind::unet2scale) throw ConfigError("unet_direct needs the unet2scale network kind");
  net.validate();
}

void init_unet_direct(ParamSet & params, const UnetDirectConfig & cfg, int time_steps, Rng & rng) {
  cfg.validate();
  init_unet2scale(params, "unet", cfg.in_channels(time_steps), time_steps, cfg.net, Skip::projection, rng);
}

namespace terms {

Tensor unet_direct_input(const WindowObs & obs, const UnetDirectConfig & cfg) {
  std::vector<Tensor> parts{obs.y_ssh, obs.mask, obs.y_coarse};
  if (cfg.use_sst) {
    if (!obs.y_sst) throw ConfigError("unet_direct with use_sst needs SST observations");
    parts.push_back(*obs.y_sst);
  }
  const int t = obs.time_steps(), w = obs.width();
  Tensor out({static_cast<int>(parts.size()) * t, w, w});
  std::size_t offset = 0;
  for (const Tensor & p : parts) {
    std::copy(p.data(), p.data() + p.size(), out.data() + offset);
    offset += p.size();
  }
  return out;
}

Var unet_direct(const WindowObs & obs, const ParamSet & params, const UnetDirectConfig & cfg) {
  const int t = obs.time_steps();
  const Shape expect{t, cfg.in_channels(t), 1, 1};
  if (!params.contains("unet.skip.w") || params.value("unet.skip.w").shape() != expect) {
    throw DimensionError("unet_direct: parameters do not match " + std::to_string(cfg.in_channels(t)) +
                         " input and " + std::to_string(t) + " output channels");
  }
  return unet2scale(Var::constant(unet_direct_input(obs, cfg)), params, "unet", cfg.net, Skip::projection);
}

}  // namespace terms

SpaceTimeField unet_direct(const ObservationSet & obs, const ParamSet & params, const UnetDirectConfig & cfg) {
  ad::NoGradGuard guard;
  const WindowObs w = WindowObs::from(obs);
  return SpaceTimeField(obs.grid(), terms::unet_direct(w, params, cfg).value(), "ssh_unet",
                        obs.ssh_alongtrack.units());
}

namespace {

bool in_low_band(double f, double cutoff_degrees, double dx) {
  // A cutoff at or below two cells keeps the whole grid band.
  return cutoff_degrees <= 2.0 * dx * (1.0 + 1e-12) || f < 1.0 / cutoff_degrees;
}

}  // namespace

SpaceTimeField lowpass(const SpaceTimeField & field, double cutoff_degrees) {
  if (!(cutoff_degrees > 0.0)) throw ConfigError("cutoff must be > 0 degrees");
  const double dx = field.grid().dx;
  const Tensor v = spectral::apply_radial_multiplier(
      field.values(), dx, [&](double f) { return in_low_band(f, cutoff_degrees, dx) ? 1.0 : 0.0; });
  return SpaceTimeField(field.grid(), v, field.name() + "_low", field.units());
}

SpaceTimeField inverse_sqg_high_band(const SpaceTimeField & sst, double cutoff_degrees) {
  if (!(cutoff_degrees > 0.0)) throw ConfigError("cutoff must be > 0 degrees");
  const double dx = sst.grid().dx;
  const Tensor v = spectral::apply_radial_multiplier(sst.values(), dx, [&](double f) {
    return in_low_band(f, cutoff_degrees, dx) ? 0.0 : 1.0 / (2.0 * std::numbers::pi * f);
  });
  return SpaceTimeField(sst.grid(), v, "ssh_from_sst", "m");
}

SpaceTimeField sqg_complement(const SpaceTimeField & oi_field, const SpaceTimeField & y_sst, double cutoff_degrees,
                              double scale) {
  if (oi_field.grid() != y_sst.grid()) throw DimensionError("sqg_complement: OI and SST grids differ");
  const SpaceTimeField low = lowpass(oi_field, cutoff_degrees);
  const SpaceTimeField high = inverse_sqg_high_band(y_sst, cutoff_degrees);
  return SpaceTimeField(oi_field.grid(), low.values() + high.values() * scale, "ssh_sqg", oi_field.units());
}

double fit_sqg_scale(const std::vector<SqgFitSample> & samples, double cutoff_degrees) {
  double num = 0.0, den = 0.0;
  for (const SqgFitSample & s : samples) {
    const Tensor b = inverse_sqg_high_band(*s.sst, cutoff_degrees).values();
    const Tensor r = s.truth->values() - lowpass(*s.oi_field, cutoff_degrees).values();
    for (std::size_t i = 0; i < b.size(); ++i) num += b[i] * r[i], den += b[i] * b[i];
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace varassim
