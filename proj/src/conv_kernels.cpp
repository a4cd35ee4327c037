/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#include "conv_kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <string>

#include "varassim/errors.hpp"

namespace varassim::kernels {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

void check_kernel(const Tensor & w, const char * context) {
  if (w.rank() != 4 || w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
    throw DimensionError(std::string(context) + ": kernel must be [O,C,K,K] with odd K, got " +
                         to_string(w.shape()));
  }
}

// col[(c*K + a)*K + b, y*W + x] = img[c, y + a - P, x + b - P]
void im2col(const double * img, int channels, int height, int width, int ksize, double * col) {
  const int pad = ksize / 2;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    const double * src = img + c * plane;
    for (int a = 0; a < ksize; ++a) {
      for (int b = 0; b < ksize; ++b) {
        double * dst = col + ((static_cast<std::size_t>(c) * ksize + a) * ksize + b) * plane;
        const int dy = a - pad;
        const int dx = b - pad;
        const int x_lo = std::min(width, std::max(0, -dx));
        const int x_hi = std::max(x_lo, std::min(width, width - dx));
        for (int y = 0; y < height; ++y) {
          double * row = dst + static_cast<std::size_t>(y) * width;
          const int sy = y + dy;
          if (sy < 0 || sy >= height) {
            std::fill(row, row + width, 0.0);
            continue;
          }
          const double * srow = src + static_cast<std::size_t>(sy) * width;
          std::fill(row, row + x_lo, 0.0);
          for (int x = x_lo; x < x_hi; ++x) row[x] = srow[x + dx];
          std::fill(row + x_hi, row + width, 0.0);
        }
      }
    }
  }
}

void col2im_add(const double * col, int channels, int height, int width, int ksize, double * img) {
  const int pad = ksize / 2;
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  for (int c = 0; c < channels; ++c) {
    double * dst = img + c * plane;
    for (int a = 0; a < ksize; ++a) {
      for (int b = 0; b < ksize; ++b) {
        const double * src = col + ((static_cast<std::size_t>(c) * ksize + a) * ksize + b) * plane;
        const int dy = a - pad;
        const int dx = b - pad;
        const int x_lo = std::min(width, std::max(0, -dx));
        const int x_hi = std::max(x_lo, std::min(width, width - dx));
        for (int y = 0; y < height; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= height) continue;
          const double * row = src + static_cast<std::size_t>(y) * width;
          double * drow = dst + static_cast<std::size_t>(sy) * width;
          for (int x = x_lo; x < x_hi; ++x) drow[x + dx] += row[x];
        }
      }
    }
  }
}

Shape with_channels(const ConvGeometry & g, int channels) {
  if (g.batched) return {g.batch, channels, g.height, g.width};
  return {channels, g.height, g.width};
}

}  // namespace

ConvGeometry conv_geometry(const Tensor & x, const char * context) {
  ConvGeometry g;
  if (x.rank() == 3) {
    g.channels = x.dim(0);
    g.height = x.dim(1);
    g.width = x.dim(2);
  } else if (x.rank() == 4) {
    g.batched = true;
    g.batch = x.dim(0);
    g.channels = x.dim(1);
    g.height = x.dim(2);
    g.width = x.dim(3);
  } else {
    throw DimensionError(std::string(context) + ": expected [C,H,W] or [N,C,H,W], got " +
                         to_string(x.shape()));
  }
  return g;
}

Tensor conv2d_forward(const Tensor & x, const Tensor & w) {
  check_kernel(w, "conv2d");
  const ConvGeometry g = conv_geometry(x, "conv2d");
  if (w.dim(1) != g.channels) {
    throw DimensionError("conv2d: kernel expects " + std::to_string(w.dim(1)) +
                         " input channels, got " + std::to_string(g.channels));
  }
  const int out_ch = w.dim(0);
  const int k = w.dim(2);
  const int plane = g.height * g.width;
  const int ckk = g.channels * k * k;
  Tensor out(with_channels(g, out_ch));
  ConstMapMat wm(w.data(), out_ch, ckk);
  std::vector<double> col(k == 1 ? 0 : static_cast<std::size_t>(ckk) * plane);
  for (int n = 0; n < g.batch; ++n) {
    const double * xin = x.data() + static_cast<std::size_t>(n) * g.channels * plane;
    MapMat om(out.data() + static_cast<std::size_t>(n) * out_ch * plane, out_ch, plane);
    if (k == 1) {
      om.noalias() = wm * ConstMapMat(xin, g.channels, plane);
    } else {
      im2col(xin, g.channels, g.height, g.width, k, col.data());
      om.noalias() = wm * ConstMapMat(col.data(), ckk, plane);
    }
  }
  return out;
}

Tensor conv2d_input_grad(const Tensor & gout, const Tensor & w) {
  check_kernel(w, "conv2d_input_grad");
  const ConvGeometry g = conv_geometry(gout, "conv2d_input_grad");
  if (w.dim(0) != g.channels) {
    throw DimensionError("conv2d_input_grad: kernel has " + std::to_string(w.dim(0)) +
                         " output channels, gradient has " + std::to_string(g.channels));
  }
  const int in_ch = w.dim(1);
  const int k = w.dim(2);
  const int plane = g.height * g.width;
  const int ckk = in_ch * k * k;
  Tensor out(with_channels(g, in_ch));
  ConstMapMat wm(w.data(), g.channels, ckk);
  std::vector<double> col(k == 1 ? 0 : static_cast<std::size_t>(ckk) * plane);
  for (int n = 0; n < g.batch; ++n) {
    ConstMapMat gm(gout.data() + static_cast<std::size_t>(n) * g.channels * plane, g.channels,
                   plane);
    double * xout = out.data() + static_cast<std::size_t>(n) * in_ch * plane;
    if (k == 1) {
      MapMat(xout, in_ch, plane).noalias() = wm.transpose() * gm;
    } else {
      MapMat cm(col.data(), ckk, plane);
      cm.noalias() = wm.transpose() * gm;
      col2im_add(col.data(), in_ch, g.height, g.width, k, xout);
    }
  }
  return out;
}

Tensor conv2d_weight_grad(const Tensor & x, const Tensor & gout, int ksize) {
  if (ksize <= 0 || ksize % 2 == 0) throw DimensionError("conv2d_weight_grad: kernel size must be odd");
  const ConvGeometry gx = conv_geometry(x, "conv2d_weight_grad");
  const ConvGeometry gg = conv_geometry(gout, "conv2d_weight_grad");
  if (gx.batch != gg.batch || gx.height != gg.height || gx.width != gg.width ||
      gx.batched != gg.batched) {
    throw DimensionError("conv2d_weight_grad: input " + to_string(x.shape()) +
                         " and gradient " + to_string(gout.shape()) + " disagree");
  }
  const int out_ch = gg.channels;
  const int plane = gx.height * gx.width;
  const int ckk = gx.channels * ksize * ksize;
  Tensor dw({out_ch, gx.channels, ksize, ksize});
  MapMat wm(dw.data(), out_ch, ckk);
  std::vector<double> col(ksize == 1 ? 0 : static_cast<std::size_t>(ckk) * plane);
  for (int n = 0; n < gx.batch; ++n) {
    const double * xin = x.data() + static_cast<std::size_t>(n) * gx.channels * plane;
    ConstMapMat gm(gout.data() + static_cast<std::size_t>(n) * out_ch * plane, out_ch, plane);
    if (ksize == 1) {
      wm.noalias() += gm * ConstMapMat(xin, gx.channels, plane).transpose();
    } else {
      im2col(xin, gx.channels, gx.height, gx.width, ksize, col.data());
      wm.noalias() += gm * ConstMapMat(col.data(), ckk, plane).transpose();
    }
  }
  return dw;
}

}  // namespace varassim::kernels
