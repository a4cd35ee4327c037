/*
 * (C) Copyright 2026 The varassim authors.
 *
 * This software is licensed under the terms of the Apache Licence Version 2.0
 * which can be obtained at http://www.apache.org/licenses/LICENSE-2.0.
 */

#pragma once

#include "varassim/autodiff.hpp"
#include "varassim/tensor.hpp"

/// Fixed linear grid operators acting on the trailing H x W axes of a tensor.
/// Each comes with its exact adjoint so it can sit inside a differentiable graph.
namespace varassim::stencils {

/// Block average by `factor` (H, W divisible by factor).
Tensor avg_pool(const Tensor & x, int factor);
Tensor avg_pool_adjoint(const Tensor & g, int factor);

/// Bilinear interpolation from cell centres of a grid `factor` times coarser,
/// edges clamped. Preserves constants and block means.
Tensor upsample_bilinear(const Tensor & x, int factor);
Tensor upsample_bilinear_adjoint(const Tensor & g, int factor);

/// 5-point Laplacian with replicated (zero-flux) edges, grid units. Self-adjoint.
Tensor laplacian_neumann(const Tensor & x);

/// Spatial derivatives in grid units: centred differences inside, one-sided at edges.
Tensor diff_x(const Tensor & x);
Tensor diff_x_adjoint(const Tensor & g);
Tensor diff_y(const Tensor & x);
Tensor diff_y_adjoint(const Tensor & g);

/// 5-point Laplacian on interior cells only, grid units: [..., H-2, W-2].
Tensor laplacian_interior(const Tensor & x);

ad::LinearOp avg_pool_op(int factor);
ad::LinearOp upsample_op(int factor);
ad::LinearOp diff_x_op();
ad::LinearOp diff_y_op();

}  // namespace varassim::stencils
