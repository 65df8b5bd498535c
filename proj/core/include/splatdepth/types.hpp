// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <vector>

namespace splatdepth {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

/// Spherical-harmonics color block in the 3DGS layout: coeffs[0] is the DC
/// term, followed by (degree+1)^2 - 1 higher-order coefficients, each rgb.
struct ShCoefficients {
    std::vector<Vec3> coeffs{Vec3::Zero()};

    /// Degree implied by the coefficient count; throws FormatError when the
    /// count is not 1, 4, 9 or 16.
    int degree() const;

    Vec3 &
    dc() {
        return coeffs.front();
    }
    const Vec3 &
    dc() const {
        return coeffs.front();
    }

    static ShCoefficients withDegree(int degree);
};

/// One splat in activated (not log/logit) parameterization.
struct Gaussian3D {
    Vec3           center   = Vec3::Zero();
    Quat           rotation = Quat::Identity(); // unit norm
    Vec3           scales   = Vec3::Ones();     // standard deviations, > 0
    double         opacity  = 0.5;              // in (0, 1)
    ShCoefficients color;
};

/// Pinhole camera. World to camera: x_cam = rotation * x_world + translation,
/// +z forward, +y down, pixel (col, row) is sampled at (col + 0.5, row + 0.5).
struct Camera {
    double fx = 1.0, fy = 1.0;
    double cx = 0.0, cy = 0.0;
    int    width = 1, height = 1;
    Mat3   rotation    = Mat3::Identity();
    Vec3   translation = Vec3::Zero();

    Vec3
    toCamera(const Vec3 &world) const {
        return rotation * world + translation;
    }

    /// Camera center o in world coordinates.
    Vec3
    center() const {
        return -rotation.transpose() * translation;
    }

    Vec2
    project(const Vec3 &cam) const {
        return {fx * cam.x() / cam.z() + cx, fy * cam.y() / cam.z() + cy};
    }

    /// Camera-space point on the ray through image coordinates (u, v) at the
    /// given z depth.
    Vec3
    backproject(double u, double v, double depth) const {
        return {(u - cx) / fx * depth, (v - cy) / fy * depth, depth};
    }

    std::size_t
    pixelCount() const {
        return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    }

    /// Throws InvalidArgument unless the intrinsics are positive and the
    /// rotation is orthonormal within `tolerance`.
    void validate(double tolerance = 1e-6) const;

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// maps to image -y.
    static Camera lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, int width,
                         int height, double focal);
};

/// Dense row-major H x W x C image of doubles.
class Image {
  public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0);

    int
    width() const noexcept {
        return mWidth;
    }
    int
    height() const noexcept {
        return mHeight;
    }
    int
    channels() const noexcept {
        return mChannels;
    }
    bool
    empty() const noexcept {
        return mData.empty();
    }
    std::size_t
    pixelCount() const noexcept {
        return static_cast<std::size_t>(mWidth) * static_cast<std::size_t>(mHeight);
    }

    double &
    at(int x, int y, int c = 0) {
        return mData[(static_cast<std::size_t>(y) * mWidth + x) * mChannels + c];
    }
    double
    at(int x, int y, int c = 0) const {
        return mData[(static_cast<std::size_t>(y) * mWidth + x) * mChannels + c];
    }

    Vec3
    vec3(int x, int y) const {
        const double *p = &mData[(static_cast<std::size_t>(y) * mWidth + x) * mChannels];
        return {p[0], p[1], p[2]};
    }
    void
    setVec3(int x, int y, const Vec3 &value) {
        double *p = &mData[(static_cast<std::size_t>(y) * mWidth + x) * mChannels];
        p[0]      = value.x();
        p[1]      = value.y();
        p[2]      = value.z();
    }

    std::vector<double> &
    data() noexcept {
        return mData;
    }
    const std::vector<double> &
    data() const noexcept {
        return mData;
    }

    bool sameShape(const Image &other) const noexcept;

    bool operator==(const Image &other) const = default;

  private:
    int                 mWidth = 0, mHeight = 0, mChannels = 0;
    std::vector<double> mData;
};

} // namespace splatdepth
