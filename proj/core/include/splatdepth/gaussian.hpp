// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/types.hpp"

namespace splatdepth {

/// Scales below this are treated as a singular covariance.
inline constexpr double kMinScale = 1e-12;

/// Sigma = R S S^T R^T. Throws InvalidPrimitive for non-positive scales.
Mat3 covarianceFrom(const Quat &rotation, const Vec3 &scales);

/// exp(-(x - c)^T Sigma^-1 (x - c)); note there is no 1/2 in the exponent,
/// so one standard deviation along a principal axis evaluates to e^-1.
double evalGaussian(const Gaussian3D &g, const Vec3 &x);

/// View-dependent rgb for a unit direction from the camera toward the splat.
Vec3 evalSh(const ShCoefficients &color, const Vec3 &viewDir);

/// Throws InvalidPrimitive when `g` violates the primitive invariants
/// (unit quaternion within 1e-6, positive scales, opacity in (0, 1)).
void validateGaussian(const Gaussian3D &g);

} // namespace splatdepth
