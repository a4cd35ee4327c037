/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <optional>
#include <string>
#include <variant>

#include "varassim/tensor.hpp"

namespace varassim {

/// Uniform Cartesian space-time grid of a T-day window over a W x W domain.
struct SpaceTimeGrid {
  int width = 64;       ///< grid points per spatial axis
  int time_steps = 7;   ///< days per window
  double dx = 0.05;     ///< degrees
  double dt = 1.0;      ///< days

  void validate() const;
  Shape shape() const { return {time_steps, width, width}; }
  /// Same spatial geometry, different number of time steps.
  SpaceTimeGrid with_time_steps(int t) const;

  friend bool operator==(const SpaceTimeGrid &, const SpaceTimeGrid &) = default;
};

/// Sampling pattern: true (1.0) where a value is observed.
class Mask {
 public:
  Mask(SpaceTimeGrid grid, Tensor values);
  static Mask filled(const SpaceTimeGrid & grid, bool observed);

  const SpaceTimeGrid & grid() const noexcept { return grid_; }
  const Tensor & values() const noexcept { return values_; }
  bool observed(int t, int y, int x) const { return values_(t, y, x) != 0.0; }
  std::size_t count() const noexcept;
  bool any() const noexcept { return count() > 0; }
  /// Observed fraction of frame t.
  double fraction(int t) const;

 private:
  SpaceTimeGrid grid_;
  Tensor values_;
};

/// Gridded scalar field of shape T x W x W.
class SpaceTimeField {
 public:
  /// Rejects non-finite values.
  SpaceTimeField(SpaceTimeGrid grid, Tensor values, std::string name, std::string units);
  /// Cells outside `observed` are gaps: stored as zero, any value accepted there.
  SpaceTimeField(SpaceTimeGrid grid, Tensor values, std::string name, std::string units,
                 const Mask & observed);

  static SpaceTimeField zeros(const SpaceTimeGrid & grid, std::string name, std::string units);

  const SpaceTimeGrid & grid() const noexcept { return grid_; }
  const Tensor & values() const noexcept { return values_; }
  const std::string & name() const noexcept { return name_; }
  const std::string & units() const noexcept { return units_; }

  SpaceTimeField renamed(std::string name) const;
  SpaceTimeField with_values(Tensor values) const;

 private:
  SpaceTimeGrid grid_;
  Tensor values_;
  std::string name_;
  std::string units_;
};

enum class StateKind { ssh_only, ssh_sst };

std::string to_string(StateKind kind);
StateKind state_kind_from_string(const std::string & s);

/// SSH decomposed into a coarse component and two fine-scale anomalies.
struct SshState {
  SshState(SpaceTimeField coarse, SpaceTimeField anomaly_obs, SpaceTimeField anomaly_rec);

  SpaceTimeField coarse;
  SpaceTimeField anomaly_obs;  ///< only seen by the along-track observation term
  SpaceTimeField anomaly_rec;  ///< only enters the reconstruction

  const SpaceTimeGrid & grid() const noexcept { return coarse.grid(); }
};

struct MultimodalState {
  MultimodalState(SshState ssh, SpaceTimeField sst);

  SshState ssh;
  SpaceTimeField sst;

  const SpaceTimeGrid & grid() const noexcept { return ssh.grid(); }
};

using State = std::variant<SshState, MultimodalState>;

StateKind kind_of(const State & state) noexcept;
const SpaceTimeGrid & grid_of(const State & state) noexcept;
const SshState & ssh_of(const State & state) noexcept;

/// Channel layout of a packed state: components grouped, time-major within each.
struct StateLayout {
  StateKind kind = StateKind::ssh_only;
  int time_steps = 7;

  int components() const noexcept { return kind == StateKind::ssh_only ? 3 : 4; }
  int channels() const noexcept { return components() * time_steps; }
  int coarse() const noexcept { return 0; }
  int anomaly_obs() const noexcept { return time_steps; }
  int anomaly_rec() const noexcept { return 2 * time_steps; }
  int sst() const noexcept { return 3 * time_steps; }
};

/// [coarse(t0..), anomaly_obs(..), anomaly_rec(..), sst(..)?] stacked into C x W x W.
Tensor pack_state(const State & state);
State unpack_state(const Tensor & packed, const SpaceTimeGrid & grid, StateKind kind);

/// coarse + anomaly_rec.
SpaceTimeField reconstruct_ssh(const State & state);

/// Everything observed over one window.
struct ObservationSet {
  ObservationSet(SpaceTimeField ssh_alongtrack, Mask ssh_mask, SpaceTimeField ssh_coarse,
                 std::optional<SpaceTimeField> sst);

  SpaceTimeField ssh_alongtrack;       ///< zero outside ssh_mask
  Mask ssh_mask;
  SpaceTimeField ssh_coarse;           ///< dense interpolated product
  std::optional<SpaceTimeField> sst;   ///< dense auxiliary field

  const SpaceTimeGrid & grid() const noexcept { return ssh_coarse.grid(); }
};

}  // namespace varassim
