// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/types.hpp"

#include <cmath>
#include <cstddef>
#include <optional>

namespace splatdepth {

inline constexpr double kNearPlane = 0.01;
/// Added to the diagonal of the screen covariance before computing the
/// alpha conic only.
inline constexpr double kScreenDilation = 0.3;

/// Per-splat, per-view cache of everything the rasterizer and the oracles
/// need. All vectors are in camera space or pixel units.
struct SplatProjection {
    std::size_t splatIndex = 0;
    Vec2        uvCenter   = Vec2::Zero(); // (u_c, v_c)
    double      zc         = 0.0;          // camera-space z of the center
    double      tc         = 0.0;          // distance from the camera origin
    Mat2        conic      = Mat2::Identity();
    Vec2        p          = Vec2::Zero(); // depth change per pixel offset
    Vec2        q          = Vec2::Zero(); // ray-space t change per pixel offset
    Vec3        normal     = Vec3::UnitZ();
    Mat3        jacobian   = Mat3::Identity();
    Mat3        rayCov     = Mat3::Identity(); // J W Sigma W^T J^T, undilated
    Vec3        camCenter  = Vec3::Zero();
    Vec3        rgb        = Vec3::Zero();

    /// (q, 1): row of Sigma'^-1 for the ray-space t axis, normalized so its
    /// last entry is one.
    Vec3
    qHat() const {
        return {q.x(), q.y(), 1.0};
    }
    Vec3
    uCenter() const {
        return {uvCenter.x(), uvCenter.y(), tc};
    }
};

/// Rows are the gradients of (u, v, t) w.r.t. the camera-space point.
/// Throws BehindCamera when the point is not beyond the near plane.
Mat3 perspectiveJacobian(const Camera &camera, const Vec3 &camPoint);

/// Throws BehindCamera or DegenerateProjection when the splat cannot be
/// rasterized for this view.
SplatProjection projectSplat(const Camera &camera, const Gaussian3D &g, std::size_t index = 0);

/// Same as projectSplat but returns nullopt instead of throwing for culled
/// splats.
std::optional<SplatProjection> tryProjectSplat(const Camera &camera, const Gaussian3D &g,
                                               std::size_t index = 0);

/// Rasterized depth z_c + p . (u_c - u, v_c - v).
inline double
depthAt(const SplatProjection &proj, const Vec2 &pixel) {
    const Vec2 delta = proj.uvCenter - pixel;
    return proj.zc + proj.p.dot(delta);
}

/// Screen-space Mahalanobis distance squared under the alpha conic.
inline double
screenMahalanobis(const SplatProjection &proj, const Vec2 &pixel) {
    const Vec2 delta = proj.uvCenter - pixel;
    return delta.dot(proj.conic * delta);
}

inline constexpr double kMaxAlpha = 0.99;

/// opacity * exp(-delta^T conic delta), clamped to 0.99.
inline double
alphaAt(const SplatProjection &proj, double opacity, const Vec2 &pixel) {
    const double a = opacity * std::exp(-screenMahalanobis(proj, pixel));
    return a < kMaxAlpha ? a : kMaxAlpha;
}

} // namespace splatdepth
