// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/validate.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/oracle.hpp"
#include "splatdepth/projection.hpp"
#include "splatdepth/rasterizer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>

namespace splatdepth {

namespace {

double
quantile(std::vector<double> values, double q) {
    if (values.empty()) {
        return std::nan("");
    }
    const std::size_t k = std::min(values.size() - 1,
                                   static_cast<std::size_t>(q * static_cast<double>(values.size())));
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
    return values[k];
}

// Largest 3-sigma screen radius of the alpha footprint.
double
footprintRadius(const SplatProjection &proj) {
    Eigen::SelfAdjointEigenSolver<Mat2> eig(proj.conic.inverse());
    return 3.0 * std::sqrt(eig.eigenvalues().maxCoeff());
}

double
offAxisDeg(const SplatProjection &proj) {
    return std::acos(std::clamp(proj.zc / proj.tc, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

void
corrupt(SplatProjection &proj) {
    proj.p *= 1.05;
    proj.q *= 1.05;
}

// Camera with the same field of view and at most `side` pixels per side.
Camera
downscaled(const Camera &cam, int side) {
    const double s = std::min(1.0, static_cast<double>(side) / std::max(cam.width, cam.height));
    Camera       c = cam;
    c.width        = std::max(1, static_cast<int>(std::lround(cam.width * s)));
    c.height       = std::max(1, static_cast<int>(std::lround(cam.height * s)));
    const double sx = static_cast<double>(c.width) / cam.width;
    const double sy = static_cast<double>(c.height) / cam.height;
    c.fx *= sx;
    c.cx *= sx;
    c.fy *= sy;
    c.cy *= sy;
    return c;
}

ValidationMetric
metric(std::string name, double value, double threshold, std::size_t samples) {
    ValidationMetric m;
    m.name      = std::move(name);
    m.samples   = samples;
    m.threshold = threshold;
    if (samples == 0) {
        m.skipped = true;
        return m;
    }
    m.value  = value;
    m.passed = std::isfinite(value) && value <= threshold;
    return m;
}

} // namespace

bool
ValidationReport::passed() const {
    return failures().empty();
}

std::vector<std::string>
ValidationReport::failures() const {
    std::vector<std::string> out;
    for (const auto &m : metrics) {
        if (!m.passed) {
            out.push_back(m.name);
        }
    }
    return out;
}

ValidationReport
validateScene(std::span<const Gaussian3D> scene, std::span<const Camera> cameras,
              const ValidationOptions &opts) {
    if (opts.trials == 0) {
        raise(ErrorKind::InvalidArgument, "validation needs at least one trial");
    }
    if (scene.empty() || cameras.empty()) {
        raise(ErrorKind::InvalidArgument, "validation needs a non-empty scene and camera set");
    }

    // Visible (camera, splat) pairs, projected once.
    struct Visible {
        std::size_t     camera;
        SplatProjection proj;
    };
    std::vector<Visible> visible;
    for (std::size_t c = 0; c < cameras.size(); ++c) {
        for (auto &proj : projectScene(scene, cameras[c])) {
            if (opts.corruptDepthPlane) {
                corrupt(proj);
            }
            visible.push_back({c, proj});
        }
    }

    ValidationReport report;
    if (visible.empty()) {
        report.metrics.push_back(metric("visibility", 1.0, 0.0, 1));
        return report;
    }

    std::mt19937_64                        rng(opts.seed);
    std::uniform_int_distribution<std::size_t> pick(0, visible.size() - 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    double              planarity = 0.0, centerDepth = 0.0, raySpace = 0.0;
    std::size_t         samples   = 0;
    std::vector<double> gaps;
    for (std::size_t trial = 0; trial < opts.trials; ++trial) {
        const Visible         &vis  = visible[pick(rng)];
        const SplatProjection &proj = vis.proj;
        const Camera          &cam  = cameras[vis.camera];

        // Uniform point in the 3-sigma ellipse of the alpha footprint.
        const Mat2   l   = proj.conic.inverse().llt().matrixL();
        const double r   = 3.0 * std::sqrt(unit(rng));
        const double phi = 2.0 * std::numbers::pi * unit(rng);
        const Vec2   px  = proj.uvCenter + l * Vec2(r * std::cos(phi), r * std::sin(phi));

        const std::array<Vec2, 1> one{px};
        planarity = std::max(planarity, oracle::planarityResidual(proj, one) / proj.tc);
        centerDepth =
            std::max(centerDepth, std::abs(depthAt(proj, proj.uvCenter) - proj.zc) / proj.zc);
        const double raster = depthAt(proj, px);
        const double oracleDepth = proj.zc / proj.tc * oracle::intersectRaySpace(proj, px);
        raySpace = std::max(raySpace, std::abs(raster - oracleDepth) / std::abs(oracleDepth));
        ++samples;

        if (footprintRadius(proj) <= thresholds::kMaxFootprintPx &&
            offAxisDeg(proj) <= thresholds::kMaxOffAxisDeg) {
            gaps.push_back(oracle::affineVsPerspectiveGap(scene[proj.splatIndex], cam, one)[0]);
        }
    }
    report.metrics.push_back(metric("planarity", planarity, thresholds::kPlanarity, samples));
    report.metrics.push_back(metric("center_depth", centerDepth, thresholds::kCenterDepth, samples));
    report.metrics.push_back(metric("raster_vs_ray_space", raySpace, thresholds::kRasterRaySpace, samples));
    report.affineGapQuantiles = {quantile(gaps, 0.5), quantile(gaps, 0.9), quantile(gaps, 0.99)};
    report.metrics.push_back(
        metric("affine_gap_median", report.affineGapQuantiles[0], thresholds::kAffineGapMedian, gaps.size()));

    // Gradient check on a small view of a few visible splats.
    const Camera small = downscaled(cameras.front(), opts.gradImageSide);
    std::vector<Gaussian3D> subset;
    for (const auto &proj : projectScene(scene, small)) {
        if (subset.size() >= static_cast<std::size_t>(opts.gradSplats)) {
            break;
        }
        subset.push_back(scene[proj.splatIndex]);
    }
    if (subset.empty()) {
        report.metrics.push_back(metric("gradient", 0.0, thresholds::kGradient, 0));
        return report;
    }
    std::vector<Gaussian3D> shifted = subset;
    std::normal_distribution<double> noise(0.0, 0.3);
    for (auto &g : shifted) {
        g.color.dc() += Vec3(noise(rng), noise(rng), noise(rng));
    }
    const Image target = render(shifted, small).color;
    report.gradients   = gradCheck(subset, small, target, LossWeights{});
    std::size_t checked = 0;
    for (const auto &c : report.gradients.classes) {
        checked += c.checked;
    }
    report.metrics.push_back(metric("gradient", report.gradients.worst(), thresholds::kGradient, checked));
    return report;
}

} // namespace splatdepth
