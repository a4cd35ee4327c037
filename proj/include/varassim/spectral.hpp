/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "varassim/tensor.hpp"

/// Thin FFTW wrapper for periodic 2-D frames and 1-D series.
namespace varassim::spectral {

using Complex = std::complex<double>;

/// Half-plane spectrum of a real H x W frame: H rows by W/2 + 1 columns.
struct HalfSpectrum {
  int height = 0;
  int width = 0;
  std::vector<Complex> data;

  int columns() const noexcept { return width / 2 + 1; }
  Complex & at(int row, int col) { return data[static_cast<std::size_t>(row) * columns() + col]; }
  Complex at(int row, int col) const { return data[static_cast<std::size_t>(row) * columns() + col]; }
};

/// Signed frequency (cycles per unit length) of DFT index `index` on an n-point grid.
double frequency(int index, int n, double spacing) noexcept;

HalfSpectrum forward(std::span<const double> frame, int height, int width);
/// Normalised inverse: inverse(forward(f)) == f.
std::vector<double> inverse(const HalfSpectrum & spectrum);

/// Applies a real multiplier m(|k|) (|k| in cycles per unit length) to every
/// H x W frame of `frames` (any leading shape). The operator is self-adjoint.
Tensor apply_radial_multiplier(const Tensor & frames, double spacing,
                               const std::function<double(double)> & multiplier);

/// One-sided power |X_m|^2 for m = 0 .. n/2 of a real series.
std::vector<double> power_1d(std::span<const double> series);

}  // namespace varassim::spectral
