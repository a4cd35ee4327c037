/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <utility>

#include "varassim/errors.hpp"

namespace varassim::spectral {

namespace {

// FFTW's planner is not re-entrant; plans are created once per size under a lock
// and executed through the new-array interface with fftw_malloc'd buffers.
struct PlanCache {
  std::mutex mutex;
  std::map<std::pair<int, int>, std::pair<fftw_plan, fftw_plan>> plans2d;
  std::map<int, fftw_plan> plans1d;

  std::pair<fftw_plan, fftw_plan> get2d(int h, int w) {
    std::lock_guard lock(mutex);
    auto it = plans2d.find({h, w});
    if (it != plans2d.end()) return it->second;
    double * real = fftw_alloc_real(static_cast<std::size_t>(h) * w);
    fftw_complex * cplx = fftw_alloc_complex(static_cast<std::size_t>(h) * (w / 2 + 1));
    fftw_plan fwd = fftw_plan_dft_r2c_2d(h, w, real, cplx, FFTW_ESTIMATE);
    fftw_plan inv = fftw_plan_dft_c2r_2d(h, w, cplx, real, FFTW_ESTIMATE);
    fftw_free(real);
    fftw_free(cplx);
    return plans2d.emplace(std::make_pair(h, w), std::make_pair(fwd, inv)).first->second;
  }

  fftw_plan get1d(int n) {
    std::lock_guard lock(mutex);
    auto it = plans1d.find(n);
    if (it != plans1d.end()) return it->second;
    double * real = fftw_alloc_real(n);
    fftw_complex * cplx = fftw_alloc_complex(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(n, real, cplx, FFTW_ESTIMATE);
    fftw_free(real);
    fftw_free(cplx);
    return plans1d.emplace(n, p).first->second;
  }
};

PlanCache & cache() {
  static PlanCache instance;
  return instance;
}

struct RealBuffer {
  explicit RealBuffer(std::size_t n) : ptr(fftw_alloc_real(n)) {}
  ~RealBuffer() { fftw_free(ptr); }
  RealBuffer(const RealBuffer &) = delete;
  RealBuffer & operator=(const RealBuffer &) = delete;
  double * ptr;
};

struct ComplexBuffer {
  explicit ComplexBuffer(std::size_t n) : ptr(fftw_alloc_complex(n)) {}
  ~ComplexBuffer() { fftw_free(ptr); }
  ComplexBuffer(const ComplexBuffer &) = delete;
  ComplexBuffer & operator=(const ComplexBuffer &) = delete;
  fftw_complex * ptr;
};

}  // namespace

double frequency(int index, int n, double spacing) noexcept {
  const int signed_index = index <= n / 2 ? index : index - n;
  return static_cast<double>(signed_index) / (n * spacing);
}

HalfSpectrum forward(std::span<const double> frame, int height, int width) {
  if (frame.size() != static_cast<std::size_t>(height) * width) {
    throw DimensionError("spectral::forward: frame size does not match " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  const auto plans = cache().get2d(height, width);
  HalfSpectrum out{height, width, {}};
  const std::size_t nc = static_cast<std::size_t>(height) * out.columns();
  RealBuffer in(frame.size());
  ComplexBuffer spec(nc);
  std::copy(frame.begin(), frame.end(), in.ptr);
  fftw_execute_dft_r2c(plans.first, in.ptr, spec.ptr);
  out.data.resize(nc);
  for (std::size_t i = 0; i < nc; ++i) out.data[i] = {spec.ptr[i][0], spec.ptr[i][1]};
  return out;
}

std::vector<double> inverse(const HalfSpectrum & spectrum) {
  const auto plans = cache().get2d(spectrum.height, spectrum.width);
  const std::size_t n = static_cast<std::size_t>(spectrum.height) * spectrum.width;
  ComplexBuffer spec(spectrum.data.size());
  RealBuffer out(n);
  for (std::size_t i = 0; i < spectrum.data.size(); ++i) {
    spec.ptr[i][0] = spectrum.data[i].real();
    spec.ptr[i][1] = spectrum.data[i].imag();
  }
  fftw_execute_dft_c2r(plans.second, spec.ptr, out.ptr);
  std::vector<double> result(out.ptr, out.ptr + n);
  const double norm = 1.0 / static_cast<double>(n);
  for (double & v : result) v *= norm;
  return result;
}

Tensor apply_radial_multiplier(const Tensor & frames, double spacing,
                               const std::function<double(double)> & multiplier) {
  if (frames.rank() < 2) throw DimensionError("apply_radial_multiplier needs [..., H, W]");
  const int h = frames.dim(-2);
  const int w = frames.dim(-1);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  const std::size_t count = plane == 0 ? 0 : frames.size() / plane;
  const int cols = w / 2 + 1;
  std::vector<double> mult(static_cast<std::size_t>(h) * cols);
  for (int r = 0; r < h; ++r) {
    const double fy = frequency(r, h, spacing);
    for (int c = 0; c < cols; ++c) {
      const double fx = frequency(c, w, spacing);
      mult[static_cast<std::size_t>(r) * cols + c] = multiplier(std::sqrt(fx * fx + fy * fy));
    }
  }
  Tensor out(frames.shape());
  for (std::size_t f = 0; f < count; ++f) {
    HalfSpectrum spec = forward({frames.data() + f * plane, plane}, h, w);
    for (std::size_t i = 0; i < spec.data.size(); ++i) spec.data[i] *= mult[i];
    const std::vector<double> back = inverse(spec);
    std::copy(back.begin(), back.end(), out.data() + f * plane);
  }
  return out;
}

std::vector<double> power_1d(std::span<const double> series) {
  const int n = static_cast<int>(series.size());
  if (n == 0) return {};
  const fftw_plan plan = cache().get1d(n);
  RealBuffer in(n);
  ComplexBuffer spec(n / 2 + 1);
  std::copy(series.begin(), series.end(), in.ptr);
  fftw_execute_dft_r2c(plan, in.ptr, spec.ptr);
  std::vector<double> power(n / 2 + 1);
  for (int m = 0; m <= n / 2; ++m) power[m] = spec.ptr[m][0] * spec.ptr[m][0] + spec.ptr[m][1] * spec.ptr[m][1];
  return power;
}

}  // namespace varassim::spectral
