// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Reverse pass in two stages: a hand-written per-pixel adjoint of the
// alpha-blending, conic and depth-plane evaluation accumulates gradients of
// the per-splat projected quantities, which are then pulled back to the
// primitive parameters through the forward-mode derivative of projectSplat.
#include "splatdepth/backward.hpp"

#include "splatdepth/detail/projection_impl.hpp"
#include "splatdepth/error.hpp"
#include "splatdepth/parallel.hpp"

#include <unsupported/Eigen/AutoDiff>

#include <algorithm>
#include <array>
#include <cmath>

namespace splatdepth {

namespace {

constexpr int kInputs = 13; // center 3, scales 3, quaternion 4, dc 3

using Derivs = Eigen::Matrix<double, kInputs, 1>;
using Dual   = Eigen::AutoDiffScalar<Derivs>;

// Layout of the projected quantities the pixel pass differentiates.
enum Slot : int {
    kU = 0,
    kV,
    kZ,
    kConicA,
    kConicB,
    kConicC,
    kP0,
    kP1,
    kNx,
    kNy,
    kNz,
    kR,
    kG,
    kB,
    kOpacity,
    kSlots
};

struct DiffProjection {
    bool                                  visible = false;
    std::array<double, kSlots>            value{};
    std::array<Derivs, kSlots - 1>        jacobian; // no entry for opacity
};

Dual
seedVar(double value, int index) {
    return Dual(value, kInputs, index);
}

DiffProjection
differentiate(const Camera &camera, const Gaussian3D &g) {
    detail::Vec3T<Dual> center(seedVar(g.center.x(), 0), seedVar(g.center.y(), 1),
                               seedVar(g.center.z(), 2));
    detail::Vec3T<Dual> scales(seedVar(g.scales.x(), 3), seedVar(g.scales.y(), 4),
                               seedVar(g.scales.z(), 5));
    const Dual qw = seedVar(g.rotation.w(), 6), qx = seedVar(g.rotation.x(), 7),
               qy = seedVar(g.rotation.y(), 8), qz = seedVar(g.rotation.z(), 9);
    detail::Vec3T<Dual> dc(seedVar(g.color.dc().x(), 10), seedVar(g.color.dc().y(), 11),
                           seedVar(g.color.dc().z(), 12));
    const auto rotation = detail::rotationMatrix<Dual>(qw, qx, qy, qz);
    const auto s = detail::projectSplat<Dual>(camera, center, rotation, scales, dc,
                                              g.color.coeffs, g.color.degree());
    DiffProjection out;
    if (s.status != detail::ProjectStatus::Ok) {
        return out;
    }
    out.visible                     = true;
    const std::array<const Dual *, kSlots - 1> outputs = {
        &s.u,         &s.v,         &s.z,         &s.conicA, &s.conicB,
        &s.conicC,    &s.p0,        &s.p1,        &s.normal[0], &s.normal[1],
        &s.normal[2], &s.rgb[0],    &s.rgb[1],    &s.rgb[2]};
    for (int k = 0; k < kSlots - 1; ++k) {
        out.value[k] = outputs[k]->value();
        // Constant outputs (clamped color channels) carry empty derivatives.
        out.jacobian[k] = outputs[k]->derivatives().size() == kInputs
                              ? Derivs(outputs[k]->derivatives())
                              : Derivs::Zero();
    }
    out.value[kOpacity] = g.opacity;
    return out;
}

using SlotGrad = std::array<double, kSlots>;

constexpr int kRowsPerChunk = 8;

} // namespace

bool
SplatGradient::allFinite() const {
    return center.allFinite() && scales.allFinite() && rotation.allFinite() &&
           std::isfinite(opacity) && dc.allFinite();
}

bool
ParamGradients::allFinite() const {
    return std::all_of(splats.begin(), splats.end(),
                       [](const SplatGradient &s) { return s.allFinite(); });
}

void
ParamGradients::add(const ParamGradients &other) {
    if (splats.size() != other.splats.size()) {
        raise(ErrorKind::InvalidArgument, "gradient sets have different splat counts");
    }
    for (std::size_t i = 0; i < splats.size(); ++i) {
        splats[i].center += other.splats[i].center;
        splats[i].scales += other.splats[i].scales;
        splats[i].rotation += other.splats[i].rotation;
        splats[i].opacity += other.splats[i].opacity;
        splats[i].dc += other.splats[i].dc;
    }
}

LossSeeds
lossSeeds(const FrameBuffers &buffers, const Image &target, const Image &normalTarget,
          const LossWeights &weights) {
    weights.validate();
    LossSeeds seeds;
    seeds.colorGrad      = photometricLossGradient(buffers.color, target, weights.ssimLambda);
    const double pixels  = static_cast<double>(buffers.width) * buffers.height;
    seeds.depthCoeff     = weights.depthWeight / pixels;
    seeds.normalCoeff    = weights.normalWeight / pixels;
    seeds.normalTarget   = normalTarget;
    return seeds;
}

ParamGradients
backward(std::span<const Gaussian3D> scene, const Camera &camera, const FrameBuffers &buffers,
         const LossSeeds &seeds) {
    if (!buffers.hasRecords()) {
        raise(ErrorKind::State, "backward requires buffers rendered with retainRecords");
    }
    if (buffers.width != camera.width || buffers.height != camera.height) {
        raise(ErrorKind::InvalidArgument, "buffers do not match the camera dimensions");
    }
    const bool haveColor  = !seeds.colorGrad.empty();
    const bool haveNormal = seeds.normalCoeff != 0.0 && !seeds.normalTarget.empty();
    if (haveColor && (seeds.colorGrad.width() != buffers.width ||
                      seeds.colorGrad.height() != buffers.height || seeds.colorGrad.channels() != 3)) {
        raise(ErrorKind::InvalidArgument, "color gradient seed has the wrong shape");
    }

    std::vector<DiffProjection> diff(scene.size());
    parallelFor(scene.size(), [&](std::size_t i) { diff[i] = differentiate(camera, scene[i]); });

    const int chunks = (buffers.height + kRowsPerChunk - 1) / kRowsPerChunk;
    std::vector<std::vector<SlotGrad>> partial(static_cast<std::size_t>(chunks));

    parallelFor(static_cast<std::size_t>(chunks), [&](std::size_t chunk) {
        auto &acc = partial[chunk];
        acc.assign(scene.size(), SlotGrad{});
        std::vector<double> alpha, transmit, weight, depth, extra;
        std::vector<bool>   clamped;
        const int           yEnd = std::min(buffers.height, static_cast<int>(chunk + 1) * kRowsPerChunk);
        for (int y = static_cast<int>(chunk) * kRowsPerChunk; y < yEnd; ++y) {
            for (int x = 0; x < buffers.width; ++x) {
                const auto &rec = buffers.records[buffers.pixelIndex(x, y)];
                if (rec.empty()) {
                    continue;
                }
                const Vec2   pixel(x + 0.5, y + 0.5);
                const Vec3   dColor = haveColor ? seeds.colorGrad.vec3(x, y) : Vec3::Zero();
                const Vec3   target = haveNormal ? seeds.normalTarget.vec3(x, y) : Vec3::Zero();
                const bool   normalActive = haveNormal && target.squaredNorm() > 0.0;
                const size_t count        = rec.size();
                alpha.resize(count);
                transmit.resize(count);
                weight.resize(count);
                depth.resize(count);
                extra.resize(count);
                clamped.resize(count);

                double t = 1.0, sumW = 0.0, sumWD = 0.0;
                for (size_t k = 0; k < count; ++k) {
                    const auto  &v  = diff[rec[k].splatIndex].value;
                    const double dx = v[kU] - pixel.x(), dy = v[kV] - pixel.y();
                    const double e  = v[kConicA] * dx * dx + 2.0 * v[kConicB] * dx * dy +
                                     v[kConicC] * dy * dy;
                    const double raw = v[kOpacity] * std::exp(-e);
                    clamped[k]       = raw > kMaxAlpha;
                    alpha[k]         = clamped[k] ? kMaxAlpha : raw;
                    transmit[k]      = t;
                    weight[k]        = alpha[k] * t;
                    depth[k]         = v[kZ] + v[kP0] * dx + v[kP1] * dy;
                    t *= 1.0 - alpha[k];
                    sumW += weight[k];
                    sumWD += weight[k] * depth[k];
                    const Vec3 rgb(v[kR], v[kG], v[kB]);
                    const Vec3 n(v[kNx], v[kNy], v[kNz]);
                    extra[k] = dColor.dot(rgb) +
                               (normalActive ? seeds.normalCoeff * (1.0 - n.dot(target)) : 0.0);
                }

                double suffix = 0.0; // sum_{i>k} w_i extra_i
                for (size_t kk = count; kk-- > 0;) {
                    const std::size_t s  = rec[kk].splatIndex;
                    const auto       &v  = diff[s].value;
                    auto             &g  = acc[s];
                    const double      dx = v[kU] - pixel.x(), dy = v[kV] - pixel.y();

                    const double dAlpha = transmit[kk] * extra[kk] - suffix / (1.0 - alpha[kk]);
                    suffix += weight[kk] * extra[kk];

                    g[kR] += weight[kk] * dColor.x();
                    g[kG] += weight[kk] * dColor.y();
                    g[kB] += weight[kk] * dColor.z();
                    if (normalActive) {
                        const double c = -seeds.normalCoeff * weight[kk];
                        g[kNx] += c * target.x();
                        g[kNy] += c * target.y();
                        g[kNz] += c * target.z();
                    }

                    double dDx = 0.0, dDy = 0.0;
                    // Depth distortion with detached weights.
                    const double dDepth =
                        seeds.depthCoeff * 4.0 * weight[kk] * (sumW * depth[kk] - sumWD);
                    g[kZ] += dDepth;
                    g[kP0] += dDepth * dx;
                    g[kP1] += dDepth * dy;
                    dDx += dDepth * v[kP0];
                    dDy += dDepth * v[kP1];

                    if (!clamped[kk]) {
                        const double gauss = alpha[kk] / v[kOpacity];
                        g[kOpacity] += dAlpha * gauss;
                        const double dE = -dAlpha * alpha[kk];
                        g[kConicA] += dE * dx * dx;
                        g[kConicB] += dE * 2.0 * dx * dy;
                        g[kConicC] += dE * dy * dy;
                        dDx += dE * 2.0 * (v[kConicA] * dx + v[kConicB] * dy);
                        dDy += dE * 2.0 * (v[kConicB] * dx + v[kConicC] * dy);
                    }
                    g[kU] += dDx;
                    g[kV] += dDy;
                }
            }
        }
    });

    ParamGradients out;
    out.splats.resize(scene.size());
    for (std::size_t s = 0; s < scene.size(); ++s) {
        if (!diff[s].visible) {
            continue;
        }
        SlotGrad total{};
        for (const auto &chunk : partial) {
            for (int k = 0; k < kSlots; ++k) {
                total[k] += chunk[s][k];
            }
        }
        Derivs full = Derivs::Zero();
        for (int k = 0; k < kSlots - 1; ++k) {
            full += total[k] * diff[s].jacobian[k];
        }
        auto &sg    = out.splats[s];
        sg.center   = full.segment<3>(0);
        sg.scales   = full.segment<3>(3);
        sg.rotation = full.segment<4>(6);
        sg.dc       = full.segment<3>(10);
        sg.opacity  = total[kOpacity];
    }
    return out;
}

LossAndGradients
lossAndGradients(std::span<const Gaussian3D> scene, const Camera &camera, const Image &target,
                 const LossWeights &weights, const RenderOptions &opts) {
    RenderOptions withRecords = opts;
    withRecords.retainRecords = true;
    LossAndGradients out;
    out.buffers              = render(scene, camera, withRecords);
    const Image normalTarget = consistencyTargetNormals(out.buffers, camera);
    out.loss                 = totalLoss(out.buffers, normalTarget, target, weights);
    const LossSeeds seeds    = lossSeeds(out.buffers, target, normalTarget, weights);
    out.gradients            = backward(scene, camera, out.buffers, seeds);
    return out;
}

} // namespace splatdepth
