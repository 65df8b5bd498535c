// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include "splatdepth/projection.hpp"
#include "splatdepth/types.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splatdepth {

/// Squared screen-space Mahalanobis radius of the 3-sigma footprint.
inline constexpr double kFootprintMahalanobis = 9.0;

struct RenderOptions {
    int    tileSize          = 16;
    double alphaCutoff       = 1.0 / 255.0; // 0 disables
    double transmittanceStop = 1e-4;        // 0 disables early exit
    double medianThreshold   = 0.5;
    bool   retainRecords     = false;

    /// Throws InvalidArgument when a field is out of range.
    void validate() const;
};

/// One blended (pixel, splat) pair, in front-to-back order within a pixel.
struct PixelBlendRecord {
    std::size_t splatIndex = 0;
    double      weight     = 0.0; // omega_i = alpha_i * prod_{j<i} (1 - alpha_j)
    double      depth      = 0.0; // rasterized per-pixel depth
    Vec3        normal     = Vec3::Zero();
    double      alpha      = 0.0;
};

struct FrameBuffers {
    int   width = 0, height = 0;
    Image color;          // 3 channels, linear rgb
    Image medianDepth;    // 0 where the median threshold is never crossed
    Image expectedDepth;  // sum(w d) / sum(w), 0 where no weight
    Image normal;         // 3 channels, camera space, zero where undefined
    Image accumOpacity;   // sum(w)
    Image transmittance;  // prod(1 - alpha) over blended splats
    std::vector<int> medianRank; // blend-order position of the median splat, -1 if none
    std::vector<std::vector<PixelBlendRecord>> records; // only with retainRecords

    bool
    hasRecords() const noexcept {
        return !records.empty();
    }
    std::size_t
    pixelIndex(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width) +
               static_cast<std::size_t>(x);
    }
};

/// Projects every splat for the view, dropping the ones that are behind the
/// near plane or degenerate. Output order follows the scene order.
std::vector<SplatProjection> projectScene(std::span<const Gaussian3D> scene,
                                          const Camera &camera);

/// Stable ascending order by z_c with ties broken by splat index. Returns
/// positions into `projections`.
std::vector<std::size_t> sortSplats(std::span<const SplatProjection> projections);

/// Tile-based front-to-back alpha blending of color, median/expected depth,
/// normal and opacity.
FrameBuffers render(std::span<const Gaussian3D> scene, const Camera &camera,
                    const RenderOptions &opts = {});

} // namespace splatdepth
