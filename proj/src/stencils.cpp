/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "varassim/stencils.hpp"

#include <algorithm>
#include <vector>

#include "varassim/errors.hpp"

namespace varassim::stencils {

namespace {

struct Planes {
  std::size_t count;
  int h;
  int w;
};

Planes planes_of(const Shape & s, const char * what) {
  if (s.size() < 2) throw DimensionError(std::string(what) + ": need at least 2 axes");
  const int h = s[s.size() - 2];
  const int w = s[s.size() - 1];
  return {numel(s) / (static_cast<std::size_t>(h) * w), h, w};
}

Shape with_hw(Shape s, int h, int w) {
  s[s.size() - 2] = h;
  s[s.size() - 1] = w;
  return s;
}

// Two-tap interpolation row: fine index i reads coarse lo/hi with weights.
struct Tap {
  int lo;
  int hi;
  double wlo;
  double whi;
};

std::vector<Tap> bilinear_taps(int coarse, int factor) {
  std::vector<Tap> taps(static_cast<std::size_t>(coarse) * factor);
  for (int i = 0; i < coarse * factor; ++i) {
    const double c = (i + 0.5) / factor - 0.5;
    if (c <= 0.0) {
      taps[i] = {0, 0, 1.0, 0.0};
    } else if (c >= coarse - 1) {
      taps[i] = {coarse - 1, coarse - 1, 1.0, 0.0};
    } else {
      const int lo = static_cast<int>(c);
      const double t = c - lo;
      taps[i] = {lo, lo + 1, 1.0 - t, t};
    }
  }
  return taps;
}

void check_divisible(int h, int w, int factor, const char * what) {
  if (factor < 1 || h % factor != 0 || w % factor != 0) {
    throw DimensionError(std::string(what) + ": " + std::to_string(h) + "x" + std::to_string(w) +
                         " not divisible by factor " + std::to_string(factor));
  }
}

}  // namespace

Tensor avg_pool(const Tensor & x, int factor) {
  const auto [n, h, w] = planes_of(x.shape(), "avg_pool");
  check_divisible(h, w, factor, "avg_pool");
  const int ho = h / factor;
  const int wo = w / factor;
  Tensor out(with_hw(x.shape(), ho, wo));
  const double inv = 1.0 / (factor * factor);
  for (std::size_t p = 0; p < n; ++p) {
    const double * src = x.data() + p * h * w;
    double * dst = out.data() + p * ho * wo;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) dst[(y / factor) * wo + xx / factor] += src[y * w + xx] * inv;
    }
  }
  return out;
}

Tensor avg_pool_adjoint(const Tensor & g, int factor) {
  const auto [n, ho, wo] = planes_of(g.shape(), "avg_pool_adjoint");
  const int h = ho * factor;
  const int w = wo * factor;
  Tensor out(with_hw(g.shape(), h, w));
  const double inv = 1.0 / (factor * factor);
  for (std::size_t p = 0; p < n; ++p) {
    const double * src = g.data() + p * ho * wo;
    double * dst = out.data() + p * h * w;
    for (int y = 0; y < h; ++y) {
      for (int xx = 0; xx < w; ++xx) dst[y * w + xx] = src[(y / factor) * wo + xx / factor] * inv;
    }
  }
  return out;
}

Tensor upsample_bilinear(const Tensor & x, int factor) {
  const auto [n, hc, wc] = planes_of(x.shape(), "upsample_bilinear");
  if (factor < 1) throw DimensionError("upsample_bilinear: factor must be >= 1");
  const int h = hc * factor;
  const int w = wc * factor;
  const auto ty = bilinear_taps(hc, factor);
  const auto tx = bilinear_taps(wc, factor);
  Tensor out(with_hw(x.shape(), h, w));
  std::vector<double> rows(static_cast<std::size_t>(hc) * w);
  for (std::size_t p = 0; p < n; ++p) {
    const double * src = x.data() + p * hc * wc;
    double * dst = out.data() + p * h * w;
    for (int y = 0; y < hc; ++y) {
      for (int i = 0; i < w; ++i) {
        rows[y * w + i] = tx[i].wlo * src[y * wc + tx[i].lo] + tx[i].whi * src[y * wc + tx[i].hi];
      }
    }
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        dst[j * w + i] = ty[j].wlo * rows[ty[j].lo * w + i] + ty[j].whi * rows[ty[j].hi * w + i];
      }
    }
  }
  return out;
}

Tensor upsample_bilinear_adjoint(const Tensor & g, int factor) {
  const auto [n, h, w] = planes_of(g.shape(), "upsample_bilinear_adjoint");
  check_divisible(h, w, factor, "upsample_bilinear_adjoint");
  const int hc = h / factor;
  const int wc = w / factor;
  const auto ty = bilinear_taps(hc, factor);
  const auto tx = bilinear_taps(wc, factor);
  Tensor out(with_hw(g.shape(), hc, wc));
  std::vector<double> rows(static_cast<std::size_t>(hc) * w);
  for (std::size_t p = 0; p < n; ++p) {
    const double * src = g.data() + p * h * w;
    double * dst = out.data() + p * hc * wc;
    std::fill(rows.begin(), rows.end(), 0.0);
    for (int j = 0; j < h; ++j) {
      for (int i = 0; i < w; ++i) {
        rows[ty[j].lo * w + i] += ty[j].wlo * src[j * w + i];
        rows[ty[j].hi * w + i] += ty[j].whi * src[j * w + i];
      }
    }
    for (int y = 0; y < hc; ++y) {
      for (int i = 0; i < w; ++i) {
        dst[y * wc + tx[i].lo] += tx[i].wlo * rows[y * w + i];
        dst[y * wc + tx[i].hi] += tx[i].whi * rows[y * w + i];
      }
    }
  }
  return out;
}

Tensor laplacian_neumann(const Tensor & x) {
  const auto [n, h, w] = planes_of(x.shape(), "laplacian_neumann");
  Tensor out(x.shape());
  for (std::size_t p = 0; p < n; ++p) {
    const double * s = x.data() + p * h * w;
    double * d = out.data() + p * h * w;
    for (int y = 0; y < h; ++y) {
      const int ym = std::max(y - 1, 0);
      const int yp = std::min(y + 1, h - 1);
      for (int i = 0; i < w; ++i) {
        const int im = std::max(i - 1, 0);
        const int ip = std::min(i + 1, w - 1);
        d[y * w + i] = s[ym * w + i] + s[yp * w + i] + s[y * w + im] + s[y * w + ip] - 4.0 * s[y * w + i];
      }
    }
  }
  return out;
}

namespace {

// Derivative along an axis with stride `step` and length `len`: returns the
// two-point stencil (a, b, coefficient) for output index i: c * (v[b] - v[a]).
struct Stencil {
  int a;
  int b;
  double c;
};

Stencil diff_stencil(int i, int len) {
  if (len == 1) return {0, 0, 0.0};
  if (i == 0) return {0, 1, 1.0};
  if (i == len - 1) return {len - 2, len - 1, 1.0};
  return {i - 1, i + 1, 0.5};
}

Tensor diff_along(const Tensor & x, bool along_x, bool adjoint) {
  const auto [n, h, w] = planes_of(x.shape(), "diff");
  Tensor out(x.shape());
  for (std::size_t p = 0; p < n; ++p) {
    const double * s = x.data() + p * h * w;
    double * d = out.data() + p * h * w;
    for (int y = 0; y < h; ++y) {
      for (int i = 0; i < w; ++i) {
        const int k = along_x ? i : y;
        const int len = along_x ? w : h;
        const Stencil st = diff_stencil(k, len);
        const int ia = along_x ? y * w + st.a : st.a * w + i;
        const int ib = along_x ? y * w + st.b : st.b * w + i;
        if (adjoint) {
          d[ib] += st.c * s[y * w + i];
          d[ia] -= st.c * s[y * w + i];
        } else {
          d[y * w + i] = st.c * (s[ib] - s[ia]);
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor diff_x(const Tensor & x) { return diff_along(x, true, false); }
Tensor diff_x_adjoint(const Tensor & g) { return diff_along(g, true, true); }
Tensor diff_y(const Tensor & x) { return diff_along(x, false, false); }
Tensor diff_y_adjoint(const Tensor & g) { return diff_along(g, false, true); }

Tensor laplacian_interior(const Tensor & x) {
  const auto [n, h, w] = planes_of(x.shape(), "laplacian_interior");
  if (h < 3 || w < 3) throw DimensionError("laplacian_interior: frames smaller than 3x3");
  Tensor out(with_hw(x.shape(), h - 2, w - 2));
  for (std::size_t p = 0; p < n; ++p) {
    const double * s = x.data() + p * h * w;
    double * d = out.data() + p * (h - 2) * (w - 2);
    for (int y = 1; y < h - 1; ++y) {
      for (int i = 1; i < w - 1; ++i) {
        d[(y - 1) * (w - 2) + i - 1] =
            s[(y - 1) * w + i] + s[(y + 1) * w + i] + s[y * w + i - 1] + s[y * w + i + 1] - 4.0 * s[y * w + i];
      }
    }
  }
  return out;
}

ad::LinearOp avg_pool_op(int factor) {
  return {"avg_pool", [factor](const Tensor & x) { return avg_pool(x, factor); },
          [factor](const Tensor & g) { return avg_pool_adjoint(g, factor); }};
}

ad::LinearOp upsample_op(int factor) {
  return {"upsample", [factor](const Tensor & x) { return upsample_bilinear(x, factor); },
          [factor](const Tensor & g) { return upsample_bilinear_adjoint(g, factor); }};
}

ad::LinearOp diff_x_op() { return {"diff_x", diff_x, diff_x_adjoint}; }
ad::LinearOp diff_y_op() { return {"diff_y", diff_y, diff_y_adjoint}; }

}  // namespace varassim::stencils
