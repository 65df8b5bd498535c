// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/backward.hpp"

#include <string>
#include <vector>

namespace splatdepth {

enum class ParamClass { Center, Scales, Rotation, Opacity, Color };

const char *toString(ParamClass c);

struct GradCheckClass {
    ParamClass  paramClass;
    double      maxRelativeError = 0.0; // |analytic - fd|_inf / max(|analytic|_inf, |fd|_inf)
    std::size_t checked          = 0;
    std::size_t excluded         = 0;   // parameters next to a cutoff discontinuity
};

struct GradCheckReport {
    std::vector<GradCheckClass> classes;

    double worst() const;
    bool   passed(double tolerance) const;
};

struct GradCheckOptions {
    double        step = 1e-4;
    RenderOptions render;
    /// Replaces the analytic gradients with zeros; used to sanity-check the
    /// harness itself.
    bool zeroAnalytic = false;
};

/// Compares backward() against central finite differences of the same loss
/// with the detached quantities (blend weights inside L_d, the consistency
/// target normals) frozen at the base point. Parameters whose +-2 step
/// perturbation changes the set of blended (pixel, splat) pairs, their 0.99
/// clamping or the sign of any L1 residual are reported as excluded.
GradCheckReport gradCheck(std::span<const Gaussian3D> scene, const Camera &camera,
                          const Image &target, const LossWeights &weights,
                          const GradCheckOptions &opts = {});

} // namespace splatdepth
