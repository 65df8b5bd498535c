// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/projection.hpp"

#include "splatdepth/detail/projection_impl.hpp"
#include "splatdepth/error.hpp"

namespace splatdepth {

namespace {

detail::ProjectedSplat<double>
projectDouble(const Camera &camera, const Gaussian3D &g) {
    const Mat3 r = detail::rotationMatrix<double>(g.rotation.w(), g.rotation.x(), g.rotation.y(),
                                                  g.rotation.z());
    return detail::projectSplat<double>(camera, g.center, r, g.scales, g.color.dc(),
                                        g.color.coeffs, g.color.degree());
}

SplatProjection
toProjection(const detail::ProjectedSplat<double> &s, std::size_t index) {
    SplatProjection proj;
    proj.splatIndex = index;
    proj.uvCenter   = {s.u, s.v};
    proj.zc         = s.z;
    proj.tc         = s.t;
    proj.conic << s.conicA, s.conicB, s.conicB, s.conicC;
    proj.q         = {s.q0, s.q1};
    proj.p         = {s.p0, s.p1};
    proj.normal    = s.normal;
    proj.jacobian  = s.jacobian;
    proj.rayCov    = s.rayCov;
    proj.camCenter = s.camCenter;
    proj.rgb       = s.rgb;
    return proj;
}

} // namespace

Mat3
perspectiveJacobian(const Camera &camera, const Vec3 &camPoint) {
    if (!(camPoint.z() > kNearPlane)) {
        raise(ErrorKind::BehindCamera, "point is not in front of the near plane");
    }
    return detail::perspectiveJacobian<double>(camera.fx, camera.fy, camPoint);
}

SplatProjection
projectSplat(const Camera &camera, const Gaussian3D &g, std::size_t index) {
    const auto s = projectDouble(camera, g);
    switch (s.status) {
    case detail::ProjectStatus::BehindCamera:
        raise(ErrorKind::BehindCamera,
              "splat " + std::to_string(index) + " center is not in front of the near plane");
    case detail::ProjectStatus::Degenerate:
        raise(ErrorKind::DegenerateProjection,
              "splat " + std::to_string(index) + " has a degenerate screen covariance");
    case detail::ProjectStatus::Ok: break;
    }
    return toProjection(s, index);
}

std::optional<SplatProjection>
tryProjectSplat(const Camera &camera, const Gaussian3D &g, std::size_t index) {
    const auto s = projectDouble(camera, g);
    if (s.status != detail::ProjectStatus::Ok) {
        return std::nullopt;
    }
    return toProjection(s, index);
}

} // namespace splatdepth
