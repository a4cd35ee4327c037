/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include "varassim/tensor.hpp"

// Raw (non-differentiable) convolution kernels shared by the autodiff ops.
namespace varassim::kernels {

struct ConvGeometry {
  int batch = 1;
  int channels = 0;
  int height = 0;
  int width = 0;
  bool batched = false;
};

ConvGeometry conv_geometry(const Tensor & x, const char * context);

Tensor conv2d_forward(const Tensor & x, const Tensor & w);
Tensor conv2d_input_grad(const Tensor & g, const Tensor & w);
Tensor conv2d_weight_grad(const Tensor & x, const Tensor & g, int ksize);

}  // namespace varassim::kernels
