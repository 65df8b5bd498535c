// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Procedural scenes and camera rigs with known geometry, shared by the
// tests, the benchmarks and the fixture generator.
#pragma once

#include "splatdepth/fit.hpp"
#include "splatdepth/types.hpp"

#include <random>
#include <vector>

namespace splatdepth::synth {

using Rng = std::mt19937_64;

/// Uniform random unit quaternion.
Quat randomRotation(Rng &rng);

/// Camera with random pose looking roughly at the world origin from 2-4
/// units away, focal length equal to the image width.
Camera randomCamera(Rng &rng, int width, int height);

/// Splat whose center lies within `maxOffAxisDeg` of the camera's optical
/// axis at depth 1.5-4, with scales in [minScale, maxScale] and a scale
/// ratio bounded by 10 so the projection stays well conditioned.
Gaussian3D randomSplat(Rng &rng, const Camera &camera, double minScale = 0.02,
                       double maxScale = 0.2, double maxOffAxisDeg = 25.0);

/// `count` random splats visible from `camera`, random dc colors.
std::vector<Gaussian3D> randomScene(Rng &rng, const Camera &camera, int count,
                                    double minScale = 0.02, double maxScale = 0.2);

/// Flat splat lying in the plane through `center` with the given normal:
/// in-plane standard deviation `radius`, thickness `radius * flatness`.
Gaussian3D flatSplat(const Vec3 &center, const Vec3 &normal, double radius, double flatness,
                     double opacity, const Vec3 &rgb);

/// DC coefficient that evaluates to `rgb` (before clamping).
Vec3 dcForColor(const Vec3 &rgb);

/// `count` flat splats tangent to a sphere, placed on a Fibonacci lattice.
std::vector<Gaussian3D> sphereOfSplats(int count, double radius);

/// Cameras on a sphere of the given radius (Fibonacci lattice), all looking
/// at the origin.
std::vector<Camera> orbitCameras(int count, double radius, int width, int height, double focal);

/// Plane fitting fixture: a 4x4 grid of colored flat splats on z = 0
/// viewed by four training cameras tilted `tiltDeg` off the plane normal and
/// one held-out camera between them. Every view carries its analytic plane
/// depth.
struct PlaneFixture {
    std::vector<Gaussian3D>   generator;
    std::vector<TrainingView> train;
    TrainingView              heldOut;
};

PlaneFixture texturedPlane(int size = 128, double tiltDeg = 20.0);

/// Analytic z-depth of the plane z = 0 (world) for every pixel of `camera`,
/// 0 where the ray misses it.
Image planeDepth(const Camera &camera);

/// Point on which the optical axes of the cameras converge (least squares).
Vec3 convergencePoint(std::span<const Camera> cameras);

/// Initial scene for fitting: a jittered sqrt(count) x sqrt(count) grid of
/// gray splats facing the mean viewing direction at the convergence point,
/// spanning the first camera's field of view.
std::vector<Gaussian3D> planeInit(Rng &rng, std::span<const Camera> cameras, int count);

/// Initial scene for fitting: gray splats uniformly inside a cube around the
/// convergence point.
std::vector<Gaussian3D> randomInit(Rng &rng, std::span<const Camera> cameras, int count);

} // namespace splatdepth::synth
