// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Oracle-driven self-check of a scene and camera set. The thresholds are the
// ones the acceptance suite uses.
#pragma once

#include "splatdepth/grad_check.hpp"
#include "splatdepth/types.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace splatdepth {

namespace thresholds {
inline constexpr double kPlanarity       = 1e-9;  // residual / t_c
inline constexpr double kCenterDepth     = 1e-12; // relative
inline constexpr double kRasterRaySpace  = 1e-12; // relative
inline constexpr double kAffineGapMedian = 1e-2;
inline constexpr double kGradient        = 1e-3;
inline constexpr double kMaxFootprintPx  = 10.0; // 3-sigma radius for the affine-gap population
inline constexpr double kMaxOffAxisDeg   = 30.0;
} // namespace thresholds

struct ValidationOptions {
    std::size_t   trials = 1000;
    std::uint64_t seed   = 0;
    /// Test hook: scales p and q by 1.05 after projection, which must be
    /// caught as a planarity failure.
    bool corruptDepthPlane = false;
    int  gradSplats        = 8;
    int  gradImageSide     = 32;
};

struct ValidationMetric {
    std::string name;
    double      value     = 0.0;
    double      threshold = 0.0;
    bool        passed    = true;
    bool        skipped   = false; // no qualifying samples
    std::size_t samples   = 0;
};

struct ValidationReport {
    std::vector<ValidationMetric> metrics;
    std::vector<double>           affineGapQuantiles; // 50, 90, 99 percent
    GradCheckReport               gradients;

    bool                     passed() const;
    std::vector<std::string> failures() const;
};

/// Samples `trials` random (camera, splat, in-footprint pixel) triples and
/// checks planarity, the center-depth identity, rasterized vs ray-space
/// depth and the affine-approximation gap, then runs a gradient check on a
/// downscaled view of up to gradSplats splats. Throws InvalidArgument for
/// zero trials or empty inputs.
ValidationReport validateScene(std::span<const Gaussian3D> scene, std::span<const Camera> cameras,
                               const ValidationOptions &opts = {});

} // namespace splatdepth
