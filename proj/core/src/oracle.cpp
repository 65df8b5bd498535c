// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/oracle.hpp"

#include "splatdepth/detail/projection_impl.hpp"
#include "splatdepth/error.hpp"
#include "splatdepth/gaussian.hpp"
#include "splatdepth/rasterizer.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace splatdepth::oracle {

namespace {

/// Sigma^-1 = R S^-2 R^T from the primitive parameters.
Mat3
inverseCovariance(const Gaussian3D &g) {
    if (!(g.scales.array() > kMinScale).all()) {
        raise(ErrorKind::DegenerateCovariance, "gaussian scale below the singularity threshold");
    }
    const Mat3 r = detail::rotationMatrix<double>(g.rotation.w(), g.rotation.x(), g.rotation.y(),
                                                  g.rotation.z());
    const Vec3 inv = g.scales.cwiseInverse().cwiseAbs2();
    return r * inv.asDiagonal() * r.transpose();
}

} // namespace

Ray
cameraRay(const Camera &camera, const Vec2 &pixel) {
    Ray ray;
    ray.origin    = Vec3::Zero();
    ray.direction = camera.backproject(pixel.x(), pixel.y(), 1.0).normalized();
    return ray;
}

Ray
worldRay(const Camera &camera, const Vec2 &pixel) {
    const Ray local = cameraRay(camera, pixel);
    Ray       ray;
    ray.origin    = camera.center();
    ray.direction = camera.rotation.transpose() * local.direction;
    return ray;
}

double
intersectPerspective(const Gaussian3D &g, const Ray &ray) {
    const Mat3 inv = inverseCovariance(g);
    const Vec3 iv  = inv * ray.direction;
    return iv.dot(g.center - ray.origin) / iv.dot(ray.direction);
}

double
gaussianAlongRay(const Gaussian3D &g, const Ray &ray, double t) {
    return evalGaussian(g, ray.origin + t * ray.direction);
}

double
intersectRaySpace(const SplatProjection &proj, const Vec2 &pixel) {
    const Mat3 inv   = proj.rayCov.inverse();
    const Vec3 delta = proj.uCenter() - Vec3(pixel.x(), pixel.y(), 0.0);
    // v' = (0, 0, 1): numerator is row 3 of Sigma'^-1 times delta, the
    // denominator its (3, 3) entry.
    return inv.row(2).dot(delta) / inv(2, 2);
}

double
rayspaceGaussianAlongRay(const SplatProjection &proj, const Vec2 &pixel, double t) {
    const Mat3 inv = proj.rayCov.inverse();
    const Vec3 d   = Vec3(pixel.x(), pixel.y(), t) - proj.uCenter();
    return std::exp(-d.dot(inv * d));
}

SampledMaximum
maximizeBySampling(const std::function<double(double)> &f, double lo, double hi,
                   std::size_t samples, double tolerance) {
    if (samples < 3 || !(hi > lo)) {
        raise(ErrorKind::InvalidArgument, "sampling maximizer needs >= 3 samples on a non-empty interval");
    }
    const double step     = (hi - lo) / static_cast<double>(samples - 1);
    std::size_t  best     = 0;
    double       bestVal  = -1.0;
    std::vector<double> values(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        values[i] = f(lo + step * static_cast<double>(i));
        if (values[i] > bestVal) {
            bestVal = values[i];
            best    = i;
        }
    }
    double a = lo + step * static_cast<double>(best == 0 ? 0 : best - 1);
    double b = lo + step * static_cast<double>(std::min(samples - 1, best + 1));

    const double invPhi = (std::sqrt(5.0) - 1.0) / 2.0;
    double       c      = b - invPhi * (b - a);
    double       d      = a + invPhi * (b - a);
    double       fc = f(c), fd = f(d);
    while (b - a > tolerance) {
        if (fc > fd) {
            b  = d;
            d  = c;
            fd = fc;
            c  = b - invPhi * (b - a);
            fc = f(c);
        } else {
            a  = c;
            c  = d;
            fc = fd;
            d  = a + invPhi * (b - a);
            fd = f(d);
        }
    }
    SampledMaximum out;
    out.t           = 0.5 * (a + b);
    out.value       = f(out.t);
    out.gridBestT   = lo + step * static_cast<double>(best);
    out.gridBestVal = bestVal;
    double gap      = -1.0;
    for (double v : values) {
        gap = std::max(gap, v - out.value);
    }
    out.gridMaxGap = gap;
    return out;
}

std::pair<double, double>
samplingWindow(double tc, double maxScale) {
    constexpr double kKappa = 3.0;
    const double     half   = 6.0 * maxScale * kKappa;
    return {std::max(0.0, tc - half), tc + half};
}

double
planarityResidual(const SplatProjection &proj, std::span<const Vec2> pixels) {
    if (pixels.empty()) {
        raise(ErrorKind::InvalidArgument, "planarity residual needs at least one pixel");
    }
    const Vec3 plane = proj.qHat();
    const Vec3 uc    = proj.uCenter();
    double     worst = 0.0;
    for (const Vec2 &px : pixels) {
        const Vec3 u(px.x(), px.y(), intersectRaySpace(proj, px));
        worst = std::max(worst, std::abs(plane.dot(u - uc)));
    }
    return worst;
}

std::vector<double>
affineVsPerspectiveGap(const Gaussian3D &g, const Camera &camera, std::span<const Vec2> pixels) {
    const SplatProjection proj = projectSplat(camera, g);
    // Camera-space copy of the primitive so the exact intersection uses the
    // same frame as the rasterized depth.
    Gaussian3D local = g;
    local.center     = camera.toCamera(g.center);
    local.rotation   = Quat(camera.rotation) * g.rotation;

    std::vector<double> gaps;
    gaps.reserve(pixels.size());
    for (const Vec2 &px : pixels) {
        const Ray    ray         = cameraRay(camera, px);
        const double tStar       = intersectPerspective(local, ray);
        const double perspective = ray.direction.z() * tStar;
        const double raster      = depthAt(proj, px);
        gaps.push_back(std::abs(raster - perspective) / perspective);
    }
    return gaps;
}

std::vector<Vec2>
footprintPixels(const SplatProjection &proj, const Camera &camera) {
    const Mat2   cov = proj.conic.inverse();
    const double rx  = std::sqrt(kFootprintMahalanobis * cov(0, 0));
    const double ry  = std::sqrt(kFootprintMahalanobis * cov(1, 1));
    const int    x0  = std::max(0, static_cast<int>(std::ceil(proj.uvCenter.x() - rx - 0.5)));
    const int x1 = std::min(camera.width - 1, static_cast<int>(std::floor(proj.uvCenter.x() + rx - 0.5)));
    const int    y0  = std::max(0, static_cast<int>(std::ceil(proj.uvCenter.y() - ry - 0.5)));
    const int y1 = std::min(camera.height - 1, static_cast<int>(std::floor(proj.uvCenter.y() + ry - 0.5)));
    std::vector<Vec2> out;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            const Vec2 px(x + 0.5, y + 0.5);
            if (screenMahalanobis(proj, px) <= kFootprintMahalanobis) {
                out.push_back(px);
            }
        }
    }
    return out;
}

} // namespace splatdepth::oracle
