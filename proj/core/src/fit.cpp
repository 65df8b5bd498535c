// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/fit.hpp"

#include "splatdepth/backward.hpp"
#include "splatdepth/error.hpp"
#include "splatdepth/gaussian.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

namespace splatdepth {

namespace {

constexpr int    kRawPerSplat = 14; // center 3, log scale 3, quaternion 4, logit opacity 1, dc 3
constexpr double kBeta1       = 0.9;
constexpr double kBeta2       = 0.999;
constexpr double kAdamEps     = 1e-8;

struct Adam {
    std::vector<double> m, v;
    int                 steps = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    // Returns the update direction for parameter i (without the rate).
    double
    direction(std::size_t i, double g) {
        m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
        v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
        const double mHat = m[i] / (1.0 - std::pow(kBeta1, steps));
        const double vHat = v[i] / (1.0 - std::pow(kBeta2, steps));
        return mHat / (std::sqrt(vHat) + kAdamEps);
    }
};

double
logit(double p) {
    return std::log(p / (1.0 - p));
}

} // namespace

double
cameraExtent(std::span<const TrainingView> views) {
    if (views.size() < 2) {
        return 1.0;
    }
    Vec3 mean = Vec3::Zero();
    for (const auto &v : views) {
        mean += v.camera.center();
    }
    mean /= static_cast<double>(views.size());
    double radius = 0.0;
    for (const auto &v : views) {
        radius = std::max(radius, (v.camera.center() - mean).norm());
    }
    return radius > 0.0 ? 1.1 * radius : 1.0;
}

FitResult
fit(std::span<const Gaussian3D> initial, std::span<const TrainingView> views,
    const LossWeights &weights, const FitSchedule &schedule) {
    if (views.empty()) {
        raise(ErrorKind::InvalidArgument, "fit needs at least one view");
    }
    if (initial.size() > kMaxFitSplats) {
        raise(ErrorKind::InvalidArgument, "fit supports at most 256 splats, got " +
                                              std::to_string(initial.size()));
    }
    if (schedule.phase1Iterations < 0 || schedule.phase2Iterations < 0) {
        raise(ErrorKind::InvalidArgument, "iteration counts must be non-negative");
    }
    weights.validate();
    schedule.render.validate();
    for (const auto &v : views) {
        v.camera.validate();
        if (v.target.width() != v.camera.width || v.target.height() != v.camera.height ||
            v.target.channels() != 3) {
            raise(ErrorKind::InvalidArgument, "target image does not match its camera");
        }
    }
    for (const auto &g : initial) {
        validateGaussian(g);
    }

    FitResult result;
    result.scene.assign(initial.begin(), initial.end());
    auto &scene = result.scene;

    const double extent     = schedule.extent > 0.0 ? schedule.extent : cameraExtent(views);
    const int    total      = schedule.phase1Iterations + schedule.phase2Iterations;
    const auto  &lr         = schedule.rates;
    Adam         adam(scene.size() * kRawPerSplat);

    std::mt19937_64                            rng(schedule.seed);
    std::uniform_int_distribution<std::size_t> pick(0, views.size() - 1);
    RenderOptions                              opts = schedule.render;
    opts.retainRecords                              = true;

    LossWeights photometricOnly  = weights;
    photometricOnly.depthWeight  = 0.0;
    photometricOnly.normalWeight = 0.0;

    for (int it = 0; it < total; ++it) {
        const int          phase = it < schedule.phase1Iterations ? 1 : 2;
        const std::size_t  vi    = pick(rng);
        const TrainingView &view = views[vi];
        auto lg = lossAndGradients(scene, view.camera, view.target,
                                   phase == 1 ? photometricOnly : weights, opts);
        if (!std::isfinite(lg.loss.total)) {
            throw DivergenceError("loss became non-finite at iteration " + std::to_string(it), it);
        }
        if (!lg.gradients.allFinite()) {
            throw DivergenceError("gradient became non-finite at iteration " + std::to_string(it),
                                  it);
        }
        result.trace.push_back({it, phase, vi, lg.loss});

        const double progress = total > 1 ? static_cast<double>(it) / (total - 1) : 0.0;
        const double centerLr = lr.center * extent * std::pow(0.01, progress);
        adam.steps += 1;
        for (std::size_t s = 0; s < scene.size(); ++s) {
            Gaussian3D          &g    = scene[s];
            const SplatGradient &grad = lg.gradients.splats[s];
            const std::size_t    base = s * kRawPerSplat;
            for (int a = 0; a < 3; ++a) {
                g.center[a] -= centerLr * adam.direction(base + a, grad.center[a]);
            }
            for (int a = 0; a < 3; ++a) {
                const double logS = std::log(g.scales[a]) -
                                    lr.scale * adam.direction(base + 3 + a, grad.scales[a] * g.scales[a]);
                g.scales[a] = std::max(std::exp(logS), 10.0 * kMinScale);
            }
            Vec4 q(g.rotation.w(), g.rotation.x(), g.rotation.y(), g.rotation.z());
            for (int a = 0; a < 4; ++a) {
                q[a] -= lr.rotation * adam.direction(base + 6 + a, grad.rotation[a]);
            }
            q.normalize();
            g.rotation = Quat(q[0], q[1], q[2], q[3]);

            const double o = g.opacity;
            const double raw =
                logit(o) - lr.opacity * adam.direction(base + 10, grad.opacity * o * (1.0 - o));
            g.opacity = std::clamp(1.0 / (1.0 + std::exp(-raw)), 1e-6, 1.0 - 1e-6);
            for (int a = 0; a < 3; ++a) {
                g.color.dc()[a] -= lr.color * adam.direction(base + 11 + a, grad.dc[a]);
            }
        }
    }
    return result;
}

double
viewL1(std::span<const Gaussian3D> scene, const TrainingView &view, const RenderOptions &opts) {
    const FrameBuffers fb = render(scene, view.camera, opts);
    return photometricLoss(fb.color, view.target, 0.0);
}

double
viewDepthError(std::span<const Gaussian3D> scene, const TrainingView &view,
               const RenderOptions &opts) {
    if (view.depth.empty()) {
        return std::nan("");
    }
    const FrameBuffers fb  = render(scene, view.camera, opts);
    double             sum = 0.0;
    std::size_t        n   = 0;
    for (std::size_t i = 0; i < view.depth.data().size(); ++i) {
        const double gt = view.depth.data()[i];
        const double d  = fb.medianDepth.data()[i];
        if (gt > 0.0 && d > 0.0) {
            sum += std::abs(d - gt);
            ++n;
        }
    }
    return n ? sum / static_cast<double>(n) : std::nan("");
}

void
writeLossTraceCsv(std::span<const LossTraceEntry> trace, const std::filesystem::path &path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrorKind::Io, "cannot open for writing: " + path.string());
    }
    out << "iteration,phase,view,L_c,L_d,L_n,total\n";
    char line[256];
    for (const auto &e : trace) {
        std::snprintf(line, sizeof(line), "%d,%d,%zu,%.17g,%.17g,%.17g,%.17g\n", e.iteration,
                      e.phase, e.view, e.loss.photometric, e.loss.depthDistortion,
                      e.loss.normalConsistency, e.loss.total);
        out << line;
    }
    out.flush();
    if (!out) {
        raise(ErrorKind::Io, "write failed: " + path.string());
    }
}

} // namespace splatdepth
