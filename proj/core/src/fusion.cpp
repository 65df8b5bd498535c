// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/fusion.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/parallel.hpp"
#include "splatdepth/projection.hpp"

#include <algorithm>
#include <cmath>

namespace splatdepth {

TsdfVolume::TsdfVolume(const Vec3 &origin, double voxelSize, std::array<int, 3> dims,
                       double truncation)
    : mOrigin(origin), mVoxelSize(voxelSize), mDims(dims),
      mTruncation(truncation > 0.0 ? truncation : kDefaultTruncationVoxels * voxelSize) {
    if (!(voxelSize > 0.0)) {
        raise(ErrorKind::InvalidArgument, "voxel size must be positive");
    }
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1) {
        raise(ErrorKind::InvalidArgument, "volume dimensions must be positive");
    }
    if (mTruncation < voxelSize) {
        raise(ErrorKind::InvalidArgument, "truncation must be at least one voxel");
    }
    const std::size_t n = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    mTsdf.assign(n, 1.0);
    mWeight.assign(n, 0.0);
}

void
integrateDepth(TsdfVolume &volume, const Image &depth, const Camera &camera,
               const FusionOptions &opts) {
    if (depth.channels() != 1 || depth.width() != camera.width || depth.height() != camera.height) {
        raise(ErrorKind::InvalidArgument, "depth map does not match the camera");
    }
    const auto   dims  = volume.dims();
    const double trunc = volume.truncation();
    auto        &tsdf  = volume.tsdfData();
    auto        &wdata = volume.weightData();

    parallelFor(static_cast<std::size_t>(dims[2]), [&](std::size_t slab) {
        const int k = static_cast<int>(slab);
        for (int j = 0; j < dims[1]; ++j) {
            for (int i = 0; i < dims[0]; ++i) {
                const Vec3 p = camera.toCamera(volume.position(i, j, k));
                if (!(p.z() > kNearPlane)) {
                    continue;
                }
                const Vec2   uv  = camera.project(p);
                const double col = std::floor(uv.x()), row = std::floor(uv.y());
                if (col < 0.0 || row < 0.0 || col >= camera.width || row >= camera.height) {
                    continue;
                }
                const double d = depth.at(static_cast<int>(col), static_cast<int>(row));
                if (!(d > 0.0) || (opts.maxDepth > 0.0 && d > opts.maxDepth)) {
                    continue;
                }
                const double sdf = d - p.z();
                if (sdf <= -trunc) {
                    continue;
                }
                const double      sample = std::clamp(sdf / trunc, -1.0, 1.0);
                const std::size_t idx    = volume.index(i, j, k);
                const double      w      = wdata[idx];
                tsdf[idx]                = (tsdf[idx] * w + sample) / (w + 1.0);
                wdata[idx]               = w + 1.0;
            }
        }
    });
}

double
sceneExtent(std::span<const Gaussian3D> scene) {
    if (scene.empty()) {
        return 0.0;
    }
    Vec3 lo = scene.front().center, hi = lo;
    for (const auto &g : scene) {
        lo = lo.cwiseMin(g.center);
        hi = hi.cwiseMax(g.center);
    }
    return (hi - lo).maxCoeff();
}

TsdfVolume
volumeForScene(std::span<const Gaussian3D> scene, double voxelSize) {
    if (scene.empty()) {
        raise(ErrorKind::InvalidArgument, "cannot size a volume for an empty scene");
    }
    if (!(voxelSize > 0.0)) {
        raise(ErrorKind::InvalidArgument, "voxel size must be positive");
    }
    Vec3   lo = scene.front().center, hi = lo;
    double maxScale = 0.0;
    for (const auto &g : scene) {
        lo       = lo.cwiseMin(g.center);
        hi       = hi.cwiseMax(g.center);
        maxScale = std::max(maxScale, g.scales.maxCoeff());
    }
    lo -= Vec3::Constant(3.0 * maxScale);
    hi += Vec3::Constant(3.0 * maxScale);
    const Vec3 size  = hi - lo;
    double     voxel = voxelSize;
    if (size.maxCoeff() / voxel + 1.0 > kMaxVolumeSide) {
        voxel = size.maxCoeff() / (kMaxVolumeSide - 1);
    }
    std::array<int, 3> dims{};
    for (int a = 0; a < 3; ++a) {
        dims[a] = std::clamp(static_cast<int>(std::ceil(size[a] / voxel)) + 1, 2, kMaxVolumeSide);
    }
    return TsdfVolume(lo, voxel, dims);
}

} // namespace splatdepth
