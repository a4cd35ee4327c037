/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"
#include "varassim/spectral.hpp"
#include "varassim/stencils.hpp"

using namespace varassim;
using namespace varassim::testing;
namespace st = varassim::stencils;

TEST_CASE("linear grid operators satisfy <Ax, y> = <x, A^T y>") {
  const Tensor x = random_tensor({3, 8, 12}, 1);
  for (int f : {1, 2, 4}) {
    const Tensor yp = random_tensor({3, 8 / f, 12 / f}, 2);
    CHECK(dot(st::avg_pool(x, f), yp) == doctest::Approx(dot(x, st::avg_pool_adjoint(yp, f))).epsilon(1e-13));
    const Tensor xc = random_tensor({3, 8 / f, 12 / f}, 3);
    CHECK(dot(st::upsample_bilinear(xc, f), x) ==
          doctest::Approx(dot(xc, st::upsample_bilinear_adjoint(x, f))).epsilon(1e-13));
  }
  const Tensor y = random_tensor({3, 8, 12}, 4);
  CHECK(dot(st::diff_x(x), y) == doctest::Approx(dot(x, st::diff_x_adjoint(y))).epsilon(1e-13));
  CHECK(dot(st::diff_y(x), y) == doctest::Approx(dot(x, st::diff_y_adjoint(y))).epsilon(1e-13));
  CHECK(dot(st::laplacian_neumann(x), y) == doctest::Approx(dot(x, st::laplacian_neumann(y))).epsilon(1e-13));
}

TEST_CASE("pooling and interpolation preserve constants and frame means") {
  const Tensor c({2, 8, 8}, 3.5);
  CHECK(st::upsample_bilinear(st::avg_pool(c, 4), 4).max_abs() == doctest::Approx(3.5));
  const Tensor x = random_tensor({1, 16, 16}, 9);
  for (int f : {2, 4, 8}) {
    const Tensor r = st::upsample_bilinear(st::avg_pool(x, f), f);
    CHECK(std::abs(r.sum() - x.sum()) < 1e-10);
  }
}

TEST_CASE("differences and Laplacians on polynomials") {
  Tensor lin({1, 6, 7});
  Tensor quad({1, 6, 7});
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 7; ++x) {
      lin(0, y, x) = 2.0 * x - 3.0 * y + 1.0;
      quad(0, y, x) = x * x + y * y;
    }
  const Tensor dx = st::diff_x(lin);
  const Tensor dy = st::diff_y(lin);
  for (std::size_t i = 0; i < dx.size(); ++i) {
    CHECK(dx[i] == doctest::Approx(2.0));
    CHECK(dy[i] == doctest::Approx(-3.0));
  }
  CHECK(st::laplacian_interior(lin).max_abs() < 1e-12);
  const Tensor lq = st::laplacian_interior(quad);
  for (std::size_t i = 0; i < lq.size(); ++i) CHECK(lq[i] == doctest::Approx(4.0));
  CHECK(st::laplacian_neumann(Tensor({2, 5, 5}, 1.7)).max_abs() < 1e-14);
}

TEST_CASE("FFT round trip and radial multiplier of a single mode") {
  const int n = 16;
  const double dx = 0.25;
  const Tensor x = random_tensor({1, n, n}, 5);
  const auto back = spectral::inverse(spectral::forward(x.values(), n, n));
  for (std::size_t i = 0; i < back.size(); ++i) CHECK(back[i] == doctest::Approx(x[i]).epsilon(1e-12));

  Tensor mode({1, n, n});
  const double fx = 3.0 / (n * dx);
  const double fy = 2.0 / (n * dx);
  for (int y = 0; y < n; ++y)
    for (int i = 0; i < n; ++i) mode(0, y, i) = std::cos(2 * std::numbers::pi * (fx * i * dx + fy * y * dx));
  const Tensor out = spectral::apply_radial_multiplier(mode, dx, [](double f) { return f * f; });
  const double expect = fx * fx + fy * fy;
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(std::abs(out[i] - expect * mode[i]) < 1e-12);
}

TEST_CASE("one-dimensional power spectrum") {
  std::vector<double> s(8);
  for (int i = 0; i < 8; ++i) s[i] = std::cos(2 * std::numbers::pi * 2 * i / 8.0);
  const auto p = spectral::power_1d(s);
  REQUIRE(p.size() == 5);
  CHECK(p[2] == doctest::Approx(16.0));
  CHECK(p[0] + p[1] + p[3] + p[4] < 1e-20);
}
