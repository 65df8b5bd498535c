// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Scalar-generic kernels shared by the double-precision public API and the
// forward-mode differentiated path in backward.cpp. Everything here is a pure
// function of its arguments.
#pragma once

#include "splatdepth/types.hpp"

#include <cmath>
#include <vector>

namespace splatdepth::detail {

inline constexpr double kNearPlane         = 0.01;
inline constexpr double kScreenDilation    = 0.3;
inline constexpr double kMaxConditionScreen = 1e12;

inline constexpr double kShC0 = 0.28209479177387814;
inline constexpr double kShC1 = 0.4886025119029199;
inline constexpr double kShC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                                    -1.0925484305920792, 0.5462742152960396};
inline constexpr double kShC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                                    0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                                    -0.5900435899266435};

template <typename T> using Vec2T = Eigen::Matrix<T, 2, 1>;
template <typename T> using Vec3T = Eigen::Matrix<T, 3, 1>;
template <typename T> using Mat3T = Eigen::Matrix<T, 3, 3>;

/// Rotation matrix of the quaternion (w, x, y, z) after normalization.
template <typename T>
Mat3T<T>
rotationMatrix(const T &qw, const T &qx, const T &qy, const T &qz) {
    using std::sqrt;
    const T norm = sqrt(qw * qw + qx * qx + qy * qy + qz * qz);
    const T w = qw / norm, x = qx / norm, y = qy / norm, z = qz / norm;
    Mat3T<T> r;
    r(0, 0) = T(1) - T(2) * (y * y + z * z);
    r(0, 1) = T(2) * (x * y - w * z);
    r(0, 2) = T(2) * (x * z + w * y);
    r(1, 0) = T(2) * (x * y + w * z);
    r(1, 1) = T(1) - T(2) * (x * x + z * z);
    r(1, 2) = T(2) * (y * z - w * x);
    r(2, 0) = T(2) * (x * z - w * y);
    r(2, 1) = T(2) * (y * z + w * x);
    r(2, 2) = T(1) - T(2) * (x * x + y * y);
    return r;
}

/// R S S^T R^T
template <typename T>
Mat3T<T>
covariance(const Mat3T<T> &rotation, const Vec3T<T> &scales) {
    Mat3T<T> m = rotation;
    for (int c = 0; c < 3; ++c) {
        m.col(c) *= scales[c];
    }
    return m * m.transpose();
}

/// 3DGS real spherical-harmonics evaluation with the +0.5 offset and
/// clamping to non-negative. `dir` must be unit length.
template <typename T>
Vec3T<T>
evalSh(const Vec3T<T> &dc, const std::vector<Vec3> &coeffs, int degree, const Vec3T<T> &dir) {
    Vec3T<T> result = dc * T(kShC0);
    if (degree > 0) {
        const T x = dir[0], y = dir[1], z = dir[2];
        auto    k = [&](int i) -> Vec3T<T> { return coeffs[i].template cast<T>(); };
        result += -T(kShC1) * y * k(1) + T(kShC1) * z * k(2) - T(kShC1) * x * k(3);
        if (degree > 1) {
            const T xx = x * x, yy = y * y, zz = z * z;
            const T xy = x * y, yz = y * z, xz = x * z;
            result += T(kShC2[0]) * xy * k(4) + T(kShC2[1]) * yz * k(5) +
                      T(kShC2[2]) * (T(2) * zz - xx - yy) * k(6) + T(kShC2[3]) * xz * k(7) +
                      T(kShC2[4]) * (xx - yy) * k(8);
            if (degree > 2) {
                result += T(kShC3[0]) * y * (T(3) * xx - yy) * k(9) +
                          T(kShC3[1]) * xy * z * k(10) +
                          T(kShC3[2]) * y * (T(4) * zz - xx - yy) * k(11) +
                          T(kShC3[3]) * z * (T(2) * zz - T(3) * xx - T(3) * yy) * k(12) +
                          T(kShC3[4]) * x * (T(4) * zz - xx - yy) * k(13) +
                          T(kShC3[5]) * z * (xx - yy) * k(14) +
                          T(kShC3[6]) * x * (xx - T(3) * yy) * k(15);
            }
        }
    }
    for (int c = 0; c < 3; ++c) {
        result[c] += T(0.5);
        if (result[c] < T(0)) {
            result[c] = T(0);
        }
    }
    return result;
}

/// Rows are the gradients of (u, v, t) = (fx x/z + cx, fy y/z + cy, |x|).
template <typename T>
Mat3T<T>
perspectiveJacobian(double fx, double fy, const Vec3T<T> &p) {
    using std::sqrt;
    const T  x = p[0], y = p[1], z = p[2];
    const T  dist = sqrt(x * x + y * y + z * z);
    Mat3T<T> j;
    j(0, 0) = T(fx) / z;
    j(0, 1) = T(0);
    j(0, 2) = -T(fx) * x / (z * z);
    j(1, 0) = T(0);
    j(1, 1) = T(fy) / z;
    j(1, 2) = -T(fy) * y / (z * z);
    j(2, 0) = x / dist;
    j(2, 1) = y / dist;
    j(2, 2) = z / dist;
    return j;
}

enum class ProjectStatus { Ok, BehindCamera, Degenerate };

template <typename T> struct ProjectedSplat {
    ProjectStatus status = ProjectStatus::Ok;
    T             u{}, v{}, z{}, t{};
    T             conicA{}, conicB{}, conicC{}; // [[A, B], [B, C]]
    T             q0{}, q1{};
    T             p0{}, p1{};
    Vec3T<T>      normal;
    Vec3T<T>      camCenter;
    Mat3T<T>      jacobian;
    Mat3T<T>      rayCov;
    Vec3T<T>      rgb;
};

template <typename T>
double
valueOf(const T &x) {
    if constexpr (std::is_arithmetic_v<T>) {
        return x;
    } else {
        return x.value();
    }
}

/// Full per-view projection of one splat: ray-space covariance
/// J W Sigma W^T J^T, alpha conic, ray-space plane vector q = -A^-1 b
/// (A = screen block, b = screen/t coupling), depth-plane vector p, camera
/// space normal J^T (-(q, 1)) and view-dependent color.
template <typename T>
ProjectedSplat<T>
projectSplat(const Camera &camera, const Vec3T<T> &center, const Mat3T<T> &rotation,
             const Vec3T<T> &scales, const Vec3T<T> &dc, const std::vector<Vec3> &shCoeffs,
             int shDegree) {
    using std::sqrt;
    ProjectedSplat<T> out;

    const Mat3T<T> w = camera.rotation.cast<T>();
    out.camCenter    = w * center + camera.translation.cast<T>();
    const T z        = out.camCenter[2];
    if (!(valueOf(z) > kNearPlane)) {
        out.status = ProjectStatus::BehindCamera;
        return out;
    }
    const T x = out.camCenter[0], y = out.camCenter[1];
    out.z     = z;
    out.t     = sqrt(x * x + y * y + z * z);
    out.u     = T(camera.fx) * x / z + T(camera.cx);
    out.v     = T(camera.fy) * y / z + T(camera.cy);

    out.jacobian          = perspectiveJacobian<T>(camera.fx, camera.fy, out.camCenter);
    const Mat3T<T> camCov = w * covariance<T>(rotation, scales) * w.transpose();
    out.rayCov            = out.jacobian * camCov * out.jacobian.transpose();

    const T a = out.rayCov(0, 0), b = out.rayCov(0, 1), c = out.rayCov(1, 1);
    const T det = a * c - b * b;
    // Eigenvalues of the 2x2 screen block for the conditioning cull.
    const double av = valueOf(a), bv = valueOf(b), cv = valueOf(c);
    const double mid = 0.5 * (av + cv);
    const double rad = std::sqrt(0.25 * (av - cv) * (av - cv) + bv * bv);
    const double lmin = mid - rad, lmax = mid + rad;
    if (!(lmin > 0.0) || lmax > kMaxConditionScreen * lmin || !(valueOf(det) > 0.0)) {
        out.status = ProjectStatus::Degenerate;
        return out;
    }

    const T bt0 = out.rayCov(0, 2), bt1 = out.rayCov(1, 2);
    out.q0      = -(c * bt0 - b * bt1) / det;
    out.q1      = -(a * bt1 - b * bt0) / det;
    const T ratio = z / out.t;
    out.p0        = ratio * out.q0;
    out.p1        = ratio * out.q1;

    const T da = a + T(kScreenDilation), dcv = c + T(kScreenDilation);
    const T ddet = da * dcv - b * b;
    out.conicA   = dcv / ddet;
    out.conicB   = -b / ddet;
    out.conicC   = da / ddet;

    Vec3T<T> rayNormal(-out.q0, -out.q1, T(-1));
    Vec3T<T> n     = out.jacobian.transpose() * rayNormal;
    const T  nnorm = sqrt(n.dot(n));
    n /= nnorm;
    if (valueOf(n.dot(out.camCenter)) > 0.0) {
        n = -n;
    }
    out.normal = n;

    const Vec3T<T> eye = camera.center().cast<T>();
    Vec3T<T>       dir = center - eye;
    dir /= sqrt(dir.dot(dir));
    out.rgb = evalSh<T>(dc, shCoeffs, shDegree, dir);
    return out;
}

} // namespace splatdepth::detail
