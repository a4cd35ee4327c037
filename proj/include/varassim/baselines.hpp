/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <vector>

#include "varassim/autodiff.hpp"
#include "varassim/core_types.hpp"
#include "varassim/params.hpp"
#include "varassim/prior_phi.hpp"
#include "varassim/variational_cost.hpp"

namespace varassim {

/// Direct inversion network: zero-filled SSH, mask, coarse SSH (and SST) in,
/// SSH out. Uses the two-scale family of the prior with a projection skip.
struct UnetDirectConfig {
  bool use_sst = false;
  PriorConfig net;

  void validate() const;
  int in_channels(int time_steps) const { return (use_sst ? 4 : 3) * time_steps; }
};

/// Adds "unet.*". The skip projection starts at zero.
void init_unet_direct(ParamSet & params, const UnetDirectConfig & cfg, int time_steps, Rng & rng);

namespace terms {

Tensor unet_direct_input(const WindowObs & obs, const UnetDirectConfig & cfg);
/// Reconstructed SSH [T,W,W] in the units of the inputs.
ad::Var unet_direct(const WindowObs & obs, const ParamSet & params, const UnetDirectConfig & cfg);

}  // namespace terms

SpaceTimeField unet_direct(const ObservationSet & obs, const ParamSet & params, const UnetDirectConfig & cfg);

/// Part of `field` above `cutoff_degrees` wavelength (spatial frequencies below 1 / cutoff).
SpaceTimeField lowpass(const SpaceTimeField & field, double cutoff_degrees);

/// SSH-like field from SST: the high band (frequencies >= 1 / cutoff) divided by 2 pi |f|.
SpaceTimeField inverse_sqg_high_band(const SpaceTimeField & sst, double cutoff_degrees);

/// lowpass(oi) + scale * inverse_sqg_high_band(sst).
SpaceTimeField sqg_complement(const SpaceTimeField & oi_field, const SpaceTimeField & y_sst, double cutoff_degrees,
                              double scale);

struct SqgFitSample {
  const SpaceTimeField * oi_field;
  const SpaceTimeField * sst;
  const SpaceTimeField * truth;
};

/// Least-squares scale of the SST high band against truth - lowpass(oi); 0 when the band is empty.
double fit_sqg_scale(const std::vector<SqgFitSample> & samples, double cutoff_degrees);

}  // namespace varassim
