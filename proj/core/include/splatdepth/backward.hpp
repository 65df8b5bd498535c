// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/losses.hpp"
#include "splatdepth/rasterizer.hpp"
#include "splatdepth/types.hpp"

#include <span>
#include <vector>

namespace splatdepth {

/// Gradient w.r.t. the activated parameters of one splat. The rotation
/// gradient is w.r.t. the (w, x, y, z) quaternion components and is
/// orthogonal to the quaternion itself.
struct SplatGradient {
    Vec3   center   = Vec3::Zero();
    Vec3   scales   = Vec3::Zero();
    Vec4   rotation = Vec4::Zero();
    double opacity  = 0.0;
    Vec3   dc       = Vec3::Zero();

    bool allFinite() const;
};

struct ParamGradients {
    std::vector<SplatGradient> splats;

    bool allFinite() const;
    void add(const ParamGradients &other);
};

/// Upstream gradients for one view. The per-pixel terms enter the loss as
/// depthCoeff * L_d(pixel) + normalCoeff * L_n(pixel) summed over pixels, so
/// for the averaged loss these are w_d / pixels and w_n / pixels.
struct LossSeeds {
    Image  colorGrad;    // dL/d(color buffer), 3 channels
    double depthCoeff  = 0.0;
    double normalCoeff = 0.0;
    Image  normalTarget; // 3 channels; zero pixels are excluded from L_n
};

/// Seeds of the total loss for a rendered view.
LossSeeds lossSeeds(const FrameBuffers &buffers, const Image &target, const Image &normalTarget,
                    const LossWeights &weights);

/// Analytic gradients of the seeded loss w.r.t. every splat parameter. The
/// blend weights are constants inside the depth-distortion term and the
/// normal target is a constant; every other path is differentiated.
/// Throws State when `buffers` were rendered without retainRecords.
ParamGradients backward(std::span<const Gaussian3D> scene, const Camera &camera,
                        const FrameBuffers &buffers, const LossSeeds &seeds);

struct LossAndGradients {
    LossBreakdown  loss;
    ParamGradients gradients;
    FrameBuffers   buffers;
};

/// Render with records, evaluate the total loss against `target`, and run
/// the backward pass.
LossAndGradients lossAndGradients(std::span<const Gaussian3D> scene, const Camera &camera,
                                  const Image &target, const LossWeights &weights,
                                  const RenderOptions &opts = {});

} // namespace splatdepth
