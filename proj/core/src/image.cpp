// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/error.hpp"
#include "splatdepth/types.hpp"

#include <cmath>

namespace splatdepth {

const char *
toString(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidPrimitive: return "invalid-primitive";
    case ErrorKind::DegenerateCovariance: return "degenerate-covariance";
    case ErrorKind::BehindCamera: return "behind-camera";
    case ErrorKind::DegenerateProjection: return "degenerate-projection";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Format: return "format";
    case ErrorKind::Data: return "data";
    case ErrorKind::Io: return "io";
    case ErrorKind::State: return "state";
    case ErrorKind::Divergence: return "divergence";
    }
    return "unknown";
}

void
raise(ErrorKind kind, const std::string &message) {
    throw Error(kind, message);
}

Image::Image(int width, int height, int channels, double fill)
    : mWidth(width), mHeight(height), mChannels(channels) {
    if (width < 0 || height < 0 || channels < 1) {
        raise(ErrorKind::InvalidArgument, "image dimensions must be non-negative");
    }
    mData.assign(pixelCount() * static_cast<std::size_t>(channels), fill);
}

bool
Image::sameShape(const Image &other) const noexcept {
    return mWidth == other.mWidth && mHeight == other.mHeight && mChannels == other.mChannels;
}

void
Camera::validate(double tolerance) const {
    if (!(fx > 0.0 && fy > 0.0)) {
        raise(ErrorKind::InvalidArgument, "camera focal lengths must be positive");
    }
    if (width < 1 || height < 1) {
        raise(ErrorKind::InvalidArgument, "camera image dimensions must be at least 1");
    }
    if (!rotation.allFinite() || !translation.allFinite() || !std::isfinite(cx) ||
        !std::isfinite(cy)) {
        raise(ErrorKind::InvalidArgument, "camera parameters must be finite");
    }
    const double deviation = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (deviation > tolerance) {
        raise(ErrorKind::InvalidArgument, "camera rotation is not orthonormal (deviation " +
                                              std::to_string(deviation) + ")");
    }
}

Camera
Camera::lookAt(const Vec3 &eye, const Vec3 &target, const Vec3 &up, int width, int height,
               double focal) {
    const Vec3 forward = (target - eye).normalized();
    Vec3       down    = -(up - up.dot(forward) * forward);
    if (down.norm() < 1e-12) {
        raise(ErrorKind::InvalidArgument, "lookAt up vector is parallel to the view direction");
    }
    down.normalize();
    const Vec3 right = down.cross(forward);

    Camera cam;
    cam.fx = cam.fy = focal;
    cam.width       = width;
    cam.height      = height;
    cam.cx          = 0.5 * width;
    cam.cy          = 0.5 * height;
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = forward.transpose();
    cam.translation     = -cam.rotation * eye;
    return cam;
}

} // namespace splatdepth
