// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/grad_check.hpp"

#include "splatdepth/error.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace splatdepth {

namespace {

constexpr std::size_t kMaxScene = 64;
constexpr int         kMaxSide  = 64;

// Everything whose change makes the loss non-differentiable: which splats
// blend at each pixel (alpha cutoff, early exit, sort order), which of them
// hit the 0.99 clamp, and the sign of every L1 residual.
struct ActiveSet {
    std::vector<std::vector<std::pair<std::size_t, bool>>> blended;
    std::vector<signed char>                               residualSigns;

    bool operator==(const ActiveSet &) const = default;
};

ActiveSet
activeSet(const FrameBuffers &fb, const Image &target, bool withL1) {
    ActiveSet set;
    set.blended.resize(fb.records.size());
    for (std::size_t p = 0; p < fb.records.size(); ++p) {
        for (const auto &r : fb.records[p]) {
            set.blended[p].emplace_back(r.splatIndex, r.alpha == kMaxAlpha);
        }
    }
    if (withL1) {
        const auto &a = fb.color.data();
        const auto &b = target.data();
        set.residualSigns.resize(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            set.residualSigns[i] = static_cast<signed char>((a[i] > b[i]) - (a[i] < b[i]));
        }
    }
    return set;
}

struct FrozenContext {
    Image                            normalTarget;
    std::vector<std::vector<double>> weights; // per pixel, per blended splat
    ActiveSet                        active;
};

// Loss with the detached quantities taken from `frozen`.
double
surrogateLoss(const FrameBuffers &fb, const Image &target, const LossWeights &w,
              const FrozenContext &frozen) {
    double       lc     = photometricLoss(fb.color, target, w.ssimLambda);
    double       ld     = 0.0, ln = 0.0;
    const double pixels = static_cast<double>(fb.width) * fb.height;
    for (int y = 0; y < fb.height; ++y) {
        for (int x = 0; x < fb.width; ++x) {
            const auto  pix = fb.pixelIndex(x, y);
            const auto &rec = fb.records[pix];
            const auto &fw  = frozen.weights[pix];
            double      a = 0.0, d = 0.0, d2 = 0.0;
            for (std::size_t k = 0; k < rec.size() && k < fw.size(); ++k) {
                a += fw[k];
                d += fw[k] * rec[k].depth;
                d2 += fw[k] * rec[k].depth * rec[k].depth;
            }
            ld += 2.0 * (a * d2 - d * d);
            const Vec3 n = frozen.normalTarget.vec3(x, y);
            if (n.squaredNorm() > 0.0) {
                ln += normalConsistency(rec, n);
            }
        }
    }
    return lc + w.depthWeight * ld / pixels + w.normalWeight * ln / pixels;
}

double &
component(Gaussian3D &g, ParamClass c, int i) {
    switch (c) {
    case ParamClass::Center: return g.center[i];
    case ParamClass::Scales: return g.scales[i];
    case ParamClass::Rotation:
        return i == 0 ? g.rotation.w() : (i == 1 ? g.rotation.x() : (i == 2 ? g.rotation.y() : g.rotation.z()));
    case ParamClass::Opacity: return g.opacity;
    case ParamClass::Color: return g.color.dc()[i];
    }
    return g.opacity;
}

double
analyticComponent(const SplatGradient &s, ParamClass c, int i) {
    switch (c) {
    case ParamClass::Center: return s.center[i];
    case ParamClass::Scales: return s.scales[i];
    case ParamClass::Rotation: return s.rotation[i];
    case ParamClass::Opacity: return s.opacity;
    case ParamClass::Color: return s.dc[i];
    }
    return 0.0;
}

int
classSize(ParamClass c) {
    switch (c) {
    case ParamClass::Rotation: return 4;
    case ParamClass::Opacity: return 1;
    default: return 3;
    }
}

} // namespace

const char *
toString(ParamClass c) {
    switch (c) {
    case ParamClass::Center: return "center";
    case ParamClass::Scales: return "scales";
    case ParamClass::Rotation: return "rotation";
    case ParamClass::Opacity: return "opacity";
    case ParamClass::Color: return "color";
    }
    return "unknown";
}

double
GradCheckReport::worst() const {
    double w = 0.0;
    for (const auto &c : classes) {
        w = std::max(w, c.maxRelativeError);
    }
    return w;
}

bool
GradCheckReport::passed(double tolerance) const {
    return worst() <= tolerance;
}

GradCheckReport
gradCheck(std::span<const Gaussian3D> scene, const Camera &camera, const Image &target,
          const LossWeights &weights, const GradCheckOptions &opts) {
    if (scene.size() > kMaxScene || camera.width > kMaxSide || camera.height > kMaxSide) {
        raise(ErrorKind::InvalidArgument, "gradient check is limited to 64 splats and 64x64 images");
    }
    RenderOptions ro = opts.render;
    ro.retainRecords = true;

    const FrameBuffers base = render(scene, camera, ro);
    FrozenContext      frozen;
    frozen.normalTarget = consistencyTargetNormals(base, camera);
    const bool withL1   = weights.ssimLambda < 1.0;
    frozen.active       = activeSet(base, target, withL1);
    frozen.weights.resize(base.records.size());
    for (std::size_t p = 0; p < base.records.size(); ++p) {
        for (const auto &r : base.records[p]) {
            frozen.weights[p].push_back(r.weight);
        }
    }
    ParamGradients analytic =
        backward(scene, camera, base, lossSeeds(base, target, frozen.normalTarget, weights));

    std::vector<Gaussian3D> work(scene.begin(), scene.end());
    auto evaluate = [&](std::size_t splat, ParamClass c, int i, double offset, bool &sameSet) {
        double &slot     = component(work[splat], c, i);
        const double old = slot;
        slot             = old + offset;
        const FrameBuffers fb = render(work, camera, ro);
        slot             = old;
        sameSet          = activeSet(fb, target, withL1) == frozen.active;
        return surrogateLoss(fb, target, weights, frozen);
    };

    GradCheckReport report;
    for (ParamClass c : {ParamClass::Center, ParamClass::Scales, ParamClass::Rotation,
                         ParamClass::Opacity, ParamClass::Color}) {
        GradCheckClass entry{c};
        double         maxDiff = 0.0, maxMag = 0.0;
        for (std::size_t s = 0; s < scene.size(); ++s) {
            for (int i = 0; i < classSize(c); ++i) {
                bool same = true, stable = true;
                evaluate(s, c, i, 2.0 * opts.step, same);
                stable = stable && same;
                evaluate(s, c, i, -2.0 * opts.step, same);
                stable = stable && same;
                const double plus  = evaluate(s, c, i, opts.step, same);
                stable             = stable && same;
                const double minus = evaluate(s, c, i, -opts.step, same);
                stable             = stable && same;
                if (!stable) {
                    ++entry.excluded;
                    continue;
                }
                ++entry.checked;
                const double fd = (plus - minus) / (2.0 * opts.step);
                const double an =
                    opts.zeroAnalytic ? 0.0 : analyticComponent(analytic.splats[s], c, i);
                maxDiff = std::max(maxDiff, std::abs(an - fd));
                maxMag  = std::max({maxMag, std::abs(an), std::abs(fd)});
            }
        }
        entry.maxRelativeError = maxMag > 1e-12 ? maxDiff / maxMag : 0.0;
        report.classes.push_back(entry);
    }
    return report;
}

} // namespace splatdepth
