// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/rasterizer.hpp"
#include "splatdepth/types.hpp"

#include <span>

namespace splatdepth {

struct LossWeights {
    double depthWeight  = 100.0; // w_d
    double normalWeight = 5.0;   // w_n
    double ssimLambda   = 0.2;   // photometric mix

    void validate() const;
};

struct LossBreakdown {
    double photometric       = 0.0; // L_c
    double depthDistortion   = 0.0; // mean over pixels of L_d
    double normalConsistency = 0.0; // mean over pixels of L_n
    double total             = 0.0;
};

/// sum_ij w_i w_j (d_i - d_j)^2 for one pixel, via 2 (A D2 - D^2).
double depthDistortion(std::span<const PixelBlendRecord> records);

/// sum_i w_i (1 - n_i . target) for one pixel.
double normalConsistency(std::span<const PixelBlendRecord> records, const Vec3 &target);

/// Per-pixel camera-space normals from finite differences of a depth map.
/// Holes (depth 0) and pixels whose right/down neighbor is a hole get a zero
/// normal; the last row and column have no forward neighbor and are zero too.
Image normalFromDepth(const Image &depth, const Camera &camera);

/// Mean SSIM over all pixels and channels, 11x11 Gaussian window (sigma 1.5),
/// zero padding at the borders.
double ssim(const Image &a, const Image &b);

/// d(mean SSIM)/d(a).
Image ssimGradient(const Image &a, const Image &b);

/// (1 - lambda) mean|a - b| + lambda (1 - SSIM(a, b)).
double photometricLoss(const Image &rendered, const Image &target, double ssimLambda);

/// d(photometricLoss)/d(rendered).
Image photometricLossGradient(const Image &rendered, const Image &target, double ssimLambda);

/// Target normal map for the consistency term: finite differences of the
/// expected-depth buffer. Treated as a constant by the backward pass.
Image consistencyTargetNormals(const FrameBuffers &buffers, const Camera &camera);

/// L_c + w_d mean(L_d) + w_n mean(L_n). Requires buffers rendered with
/// retainRecords; pixels with an undefined target normal are skipped by L_n.
LossBreakdown totalLoss(const FrameBuffers &buffers, const Camera &camera, const Image &target,
                        const LossWeights &weights);

/// Same as totalLoss with an explicit consistency target.
LossBreakdown totalLoss(const FrameBuffers &buffers, const Image &normalTarget,
                        const Image &target, const LossWeights &weights);

} // namespace splatdepth
