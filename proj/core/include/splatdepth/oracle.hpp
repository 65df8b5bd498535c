// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force and alternate-route evaluations used to validate the closed
// forms in projection.hpp. Nothing here is on the rendering path; every
// routine favours precision over speed.
#pragma once

#include "splatdepth/projection.hpp"
#include "splatdepth/types.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace splatdepth::oracle {

/// x = origin + t * direction, direction unit length.
struct Ray {
    Vec3 origin    = Vec3::Zero();
    Vec3 direction = Vec3::UnitZ();
};

/// Camera-space ray through the image point (u, v); origin is the camera
/// center (zero).
Ray cameraRay(const Camera &camera, const Vec2 &pixel);

/// Same ray expressed in world coordinates.
Ray worldRay(const Camera &camera, const Vec2 &pixel);

/// Argmax of the 1D restriction G1(t) of the splat along the ray:
/// v^T Sigma^-1 (x_c - o) / (v^T Sigma^-1 v). May be negative.
double intersectPerspective(const Gaussian3D &g, const Ray &ray);

/// G1(t) along a world-space ray.
double gaussianAlongRay(const Gaussian3D &g, const Ray &ray, double t);

/// Ray-space argmax for the pixel, evaluated from the full inverse of the
/// stored ray-space covariance (an independent route from proj.q).
double intersectRaySpace(const SplatProjection &proj, const Vec2 &pixel);

/// Ray-space 1D Gaussian exp(-(u - u_c)^T Sigma'^-1 (u - u_c)) with
/// u = (pixel, t).
double rayspaceGaussianAlongRay(const SplatProjection &proj, const Vec2 &pixel, double t);

struct SampledMaximum {
    double t           = 0.0; // refined argmax
    double value       = 0.0; // f(t)
    double gridBestT   = 0.0;
    double gridBestVal = 0.0;
    double gridMaxGap  = 0.0; // max over samples of f(sample) - f(t); <= 0 means t dominates
};

/// Dense grid argmax of f over [lo, hi] followed by golden-section
/// refinement down to `tolerance` in t.
SampledMaximum maximizeBySampling(const std::function<double(double)> &f, double lo, double hi,
                                  std::size_t samples = 100000, double tolerance = 1e-10);

/// Sampling window [max(0, tc - 6 s kappa), tc + 6 s kappa] with s the largest
/// scale and kappa = 3.
std::pair<double, double> samplingWindow(double tc, double maxScale);

/// max |(q, 1) . (u - u_c)| with u = (pixel, intersectRaySpace(pixel)).
double planarityResidual(const SplatProjection &proj, std::span<const Vec2> pixels);

/// Per-pixel |d_raster - d_persp| / d_persp where d_persp = cos(theta) t* of the
/// exact perspective intersection along the pixel's own ray.
std::vector<double> affineVsPerspectiveGap(const Gaussian3D &g, const Camera &camera,
                                           std::span<const Vec2> pixels);

/// Pixel sample points (col + 0.5, row + 0.5) inside the splat's 3-sigma
/// screen footprint and the image.
std::vector<Vec2> footprintPixels(const SplatProjection &proj, const Camera &camera);

} // namespace splatdepth::oracle
