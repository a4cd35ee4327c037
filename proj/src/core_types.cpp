/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/core_types.hpp"

#include <cmath>

#include "varassim/errors.hpp"

namespace varassim {

void SpaceTimeGrid::validate() const {
  if (width < 8) throw DimensionError("grid width must be >= 8, got " + std::to_string(width));
  if (time_steps < 1) throw DimensionError("grid needs at least one time step");
  if (!(dx > 0.0) || !(dt > 0.0)) throw DimensionError("grid spacings must be positive");
}

SpaceTimeGrid SpaceTimeGrid::with_time_steps(int t) const {
  SpaceTimeGrid g = *this;
  g.time_steps = t;
  g.validate();
  return g;
}

namespace {

void require_grid_shape(const SpaceTimeGrid & grid, const Tensor & values, const std::string & what) {
  grid.validate();
  if (values.shape() != grid.shape()) {
    throw DimensionError(what + ": values " + to_string(values.shape()) + " do not match grid " +
                         to_string(grid.shape()));
  }
}

}  // namespace

Mask::Mask(SpaceTimeGrid grid, Tensor values) : grid_(grid), values_(std::move(values)) {
  require_grid_shape(grid_, values_, "mask");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] != 0.0 && values_[i] != 1.0) throw FormatError("mask entries must be 0 or 1");
  }
}

Mask Mask::filled(const SpaceTimeGrid & grid, bool observed) {
  return Mask(grid, Tensor(grid.shape(), observed ? 1.0 : 0.0));
}

std::size_t Mask::count() const noexcept {
  std::size_t n = 0;
  for (std::size_t i = 0; i < values_.size(); ++i) n += values_[i] != 0.0;
  return n;
}

double Mask::fraction(int t) const {
  const std::size_t plane = static_cast<std::size_t>(grid_.width) * grid_.width;
  std::size_t n = 0;
  for (std::size_t i = 0; i < plane; ++i) n += values_[t * plane + i] != 0.0;
  return static_cast<double>(n) / static_cast<double>(plane);
}

SpaceTimeField::SpaceTimeField(SpaceTimeGrid grid, Tensor values, std::string name, std::string units)
    : grid_(grid), values_(std::move(values)), name_(std::move(name)), units_(std::move(units)) {
  require_grid_shape(grid_, values_, "field '" + name_ + "'");
  if (!values_.all_finite()) throw NumericalError("field '" + name_ + "' has non-finite values");
}

SpaceTimeField::SpaceTimeField(SpaceTimeGrid grid, Tensor values, std::string name,
                               std::string units, const Mask & observed)
    : grid_(grid), values_(std::move(values)), name_(std::move(name)), units_(std::move(units)) {
  require_grid_shape(grid_, values_, "field '" + name_ + "'");
  if (observed.grid() != grid_) throw DimensionError("field '" + name_ + "': mask grid differs");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (observed.values()[i] == 0.0) {
      values_[i] = 0.0;
    } else if (!std::isfinite(values_[i])) {
      throw NumericalError("field '" + name_ + "' has non-finite observed values");
    }
  }
}

SpaceTimeField SpaceTimeField::zeros(const SpaceTimeGrid & grid, std::string name, std::string units) {
  return SpaceTimeField(grid, Tensor(grid.shape()), std::move(name), std::move(units));
}

SpaceTimeField SpaceTimeField::renamed(std::string name) const {
  SpaceTimeField f = *this;
  f.name_ = std::move(name);
  return f;
}

SpaceTimeField SpaceTimeField::with_values(Tensor values) const {
  return SpaceTimeField(grid_, std::move(values), name_, units_);
}

std::string to_string(StateKind kind) { return kind == StateKind::ssh_only ? "ssh_only" : "ssh_sst"; }

StateKind state_kind_from_string(const std::string & s) {
  if (s == "ssh_only") return StateKind::ssh_only;
  if (s == "ssh_sst") return StateKind::ssh_sst;
  throw ConfigError("unknown state formulation '" + s + "'");
}

SshState::SshState(SpaceTimeField c, SpaceTimeField ao, SpaceTimeField ar)
    : coarse(std::move(c)), anomaly_obs(std::move(ao)), anomaly_rec(std::move(ar)) {
  if (anomaly_obs.grid() != coarse.grid() || anomaly_rec.grid() != coarse.grid()) {
    throw DimensionError("SSH state components must share one grid");
  }
}

MultimodalState::MultimodalState(SshState s, SpaceTimeField t) : ssh(std::move(s)), sst(std::move(t)) {
  if (sst.grid() != ssh.grid()) throw DimensionError("SST component must share the SSH grid");
}

StateKind kind_of(const State & state) noexcept {
  return std::holds_alternative<SshState>(state) ? StateKind::ssh_only : StateKind::ssh_sst;
}

const SshState & ssh_of(const State & state) noexcept {
  if (const auto * s = std::get_if<SshState>(&state)) return *s;
  return std::get<MultimodalState>(state).ssh;
}

const SpaceTimeGrid & grid_of(const State & state) noexcept { return ssh_of(state).grid(); }

Tensor pack_state(const State & state) {
  const SpaceTimeGrid & grid = grid_of(state);
  const StateLayout layout{kind_of(state), grid.time_steps};
  Tensor packed({layout.channels(), grid.width, grid.width});
  const std::size_t block = static_cast<std::size_t>(grid.time_steps) * grid.width * grid.width;
  auto put = [&](const SpaceTimeField & f, int channel) {
    std::copy(f.values().data(), f.values().data() + block,
              packed.data() + static_cast<std::size_t>(channel) * grid.width * grid.width);
  };
  const SshState & ssh = ssh_of(state);
  put(ssh.coarse, layout.coarse());
  put(ssh.anomaly_obs, layout.anomaly_obs());
  put(ssh.anomaly_rec, layout.anomaly_rec());
  if (const auto * mm = std::get_if<MultimodalState>(&state)) put(mm->sst, layout.sst());
  return packed;
}

State unpack_state(const Tensor & packed, const SpaceTimeGrid & grid, StateKind kind) {
  grid.validate();
  const StateLayout layout{kind, grid.time_steps};
  if (packed.rank() != 3 || packed.dim(0) != layout.channels() || packed.dim(1) != grid.width ||
      packed.dim(2) != grid.width) {
    throw DimensionError("unpack_state: expected " + std::to_string(layout.channels()) +
                         " channels of " + std::to_string(grid.width) + "x" +
                         std::to_string(grid.width) + " for " + to_string(kind) + ", got " +
                         to_string(packed.shape()));
  }
  const std::size_t block = static_cast<std::size_t>(grid.time_steps) * grid.width * grid.width;
  auto take = [&](int channel, const char * name, const char * units) {
    const double * begin = packed.data() + static_cast<std::size_t>(channel) * grid.width * grid.width;
    return SpaceTimeField(grid, Tensor(grid.shape(), std::vector<double>(begin, begin + block)),
                          name, units);
  };
  SshState ssh(take(layout.coarse(), "ssh_coarse", "m"),
               take(layout.anomaly_obs(), "ssh_anomaly_obs", "m"),
               take(layout.anomaly_rec(), "ssh_anomaly_rec", "m"));
  if (kind == StateKind::ssh_only) return ssh;
  return MultimodalState(std::move(ssh), take(layout.sst(), "sst", "K"));
}

SpaceTimeField reconstruct_ssh(const State & state) {
  const SshState & ssh = ssh_of(state);
  return SpaceTimeField(ssh.grid(), ssh.coarse.values() + ssh.anomaly_rec.values(), "ssh",
                        ssh.coarse.units());
}

ObservationSet::ObservationSet(SpaceTimeField along, Mask mask, SpaceTimeField coarse,
                               std::optional<SpaceTimeField> sst_field)
    : ssh_alongtrack(std::move(along)),
      ssh_mask(std::move(mask)),
      ssh_coarse(std::move(coarse)),
      sst(std::move(sst_field)) {
  const SpaceTimeGrid & g = ssh_coarse.grid();
  if (ssh_alongtrack.grid() != g || ssh_mask.grid() != g || (sst && sst->grid() != g)) {
    throw DimensionError("observation fields must share one grid");
  }
  for (std::size_t i = 0; i < ssh_mask.values().size(); ++i) {
    if (ssh_mask.values()[i] == 0.0 && ssh_alongtrack.values()[i] != 0.0) {
      throw FormatError("along-track SSH must be zero outside the sampling mask");
    }
  }
}

}  // namespace varassim
