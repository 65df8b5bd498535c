// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/types.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splatdepth {

/// Uniform grid of truncated signed distances (normalized to [-1, 1] by the
/// truncation distance) and integration weights. Voxel (i, j, k) sits at
/// origin + voxelSize * (i, j, k).
class TsdfVolume {
  public:
    TsdfVolume(const Vec3 &origin, double voxelSize, std::array<int, 3> dims,
               double truncation = 0.0);

    const Vec3 &
    origin() const noexcept {
        return mOrigin;
    }
    double
    voxelSize() const noexcept {
        return mVoxelSize;
    }
    const std::array<int, 3> &
    dims() const noexcept {
        return mDims;
    }
    double
    truncation() const noexcept {
        return mTruncation;
    }
    std::size_t
    voxelCount() const noexcept {
        return mTsdf.size();
    }

    std::size_t
    index(int i, int j, int k) const noexcept {
        return (static_cast<std::size_t>(k) * mDims[1] + j) * mDims[0] + i;
    }
    Vec3
    position(int i, int j, int k) const noexcept {
        return mOrigin + mVoxelSize * Vec3(i, j, k);
    }

    double &
    tsdf(int i, int j, int k) {
        return mTsdf[index(i, j, k)];
    }
    double
    tsdf(int i, int j, int k) const {
        return mTsdf[index(i, j, k)];
    }
    double &
    weight(int i, int j, int k) {
        return mWeight[index(i, j, k)];
    }
    double
    weight(int i, int j, int k) const {
        return mWeight[index(i, j, k)];
    }

    std::vector<double> &
    tsdfData() noexcept {
        return mTsdf;
    }
    const std::vector<double> &
    tsdfData() const noexcept {
        return mTsdf;
    }
    std::vector<double> &
    weightData() noexcept {
        return mWeight;
    }
    const std::vector<double> &
    weightData() const noexcept {
        return mWeight;
    }

    /// Overwrites every voxel with clamp(sdf(position) / truncation) and
    /// unit weight. Used to test extraction against analytic surfaces.
    template <typename Fn>
    void
    fillFromSdf(Fn &&sdf) {
        for (int k = 0; k < mDims[2]; ++k) {
            for (int j = 0; j < mDims[1]; ++j) {
                for (int i = 0; i < mDims[0]; ++i) {
                    const double v      = sdf(position(i, j, k)) / mTruncation;
                    mTsdf[index(i, j, k)]   = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
                    mWeight[index(i, j, k)] = 1.0;
                }
            }
        }
    }

  private:
    Vec3                mOrigin;
    double              mVoxelSize;
    std::array<int, 3>  mDims;
    double              mTruncation;
    std::vector<double> mTsdf;
    std::vector<double> mWeight;
};

inline constexpr double kDefaultTruncationVoxels = 4.0;
inline constexpr int    kMaxVolumeSide           = 256;

struct FusionOptions {
    /// Samples deeper than this are ignored; <= 0 disables the cap.
    double maxDepth = 0.0;
};

/// Folds one depth map (0 = hole) into the running weighted average.
void integrateDepth(TsdfVolume &volume, const Image &depth, const Camera &camera,
                    const FusionOptions &opts = {});

/// Volume covering the splat centers inflated by 3x the largest scale, with
/// the voxel size grown if needed so no side exceeds 256 voxels.
TsdfVolume volumeForScene(std::span<const Gaussian3D> scene, double voxelSize);

/// Largest extent of the splat-center bounding box.
double sceneExtent(std::span<const Gaussian3D> scene);

struct TriangleMesh {
    std::vector<Vec3>                         vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
    std::vector<Vec3>                         normals; // optional, per vertex

    bool
    empty() const noexcept {
        return triangles.empty();
    }
};

/// Marching cubes over the iso level with linear edge interpolation. Cells
/// touching a zero-weight voxel are skipped. Triangles are wound so their
/// normals point toward increasing tsdf.
TriangleMesh extractMesh(const TsdfVolume &volume, double iso = 0.0);

/// Drops connected components (sharing vertices) with fewer than
/// `minTriangles` triangles and the vertices only they used. Returns the
/// number of triangles removed.
std::size_t removeSmallComponents(TriangleMesh &mesh, std::size_t minTriangles);

/// Each case's triangles as triples of cube edge ids (0..11), built once.
/// Exposed for tests.
const std::array<std::vector<std::array<int, 3>>, 256> &marchingCubesCases();

} // namespace splatdepth
