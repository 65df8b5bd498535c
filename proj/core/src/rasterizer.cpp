// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/rasterizer.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace splatdepth {

namespace {

constexpr double kWeightEpsilon = 1e-10;

struct PixelRange {
    int x0, x1, y0, y1; // inclusive; empty when x0 > x1 or y0 > y1
};

/// Pixels whose sample point falls inside the axis-aligned box of the
/// 3-sigma footprint ellipse.
PixelRange
footprintBox(const SplatProjection &proj, int width, int height) {
    const Mat2   cov = proj.conic.inverse();
    const double rx  = std::sqrt(kFootprintMahalanobis * cov(0, 0));
    const double ry  = std::sqrt(kFootprintMahalanobis * cov(1, 1));
    PixelRange   r;
    r.x0 = std::max(0, static_cast<int>(std::ceil(proj.uvCenter.x() - rx - 0.5)));
    r.x1 = std::min(width - 1, static_cast<int>(std::floor(proj.uvCenter.x() + rx - 0.5)));
    r.y0 = std::max(0, static_cast<int>(std::ceil(proj.uvCenter.y() - ry - 0.5)));
    r.y1 = std::min(height - 1, static_cast<int>(std::floor(proj.uvCenter.y() + ry - 0.5)));
    return r;
}

} // namespace

void
RenderOptions::validate() const {
    if (tileSize < 1) {
        raise(ErrorKind::InvalidArgument, "tile size must be at least 1");
    }
    if (!(alphaCutoff >= 0.0 && alphaCutoff < 1.0)) {
        raise(ErrorKind::InvalidArgument, "alpha cutoff must be in [0, 1)");
    }
    if (!(transmittanceStop >= 0.0 && transmittanceStop < 1.0)) {
        raise(ErrorKind::InvalidArgument, "transmittance stop must be in [0, 1)");
    }
    if (!(medianThreshold > 0.0 && medianThreshold < 1.0)) {
        raise(ErrorKind::InvalidArgument, "median threshold must be in (0, 1)");
    }
}

std::vector<SplatProjection>
projectScene(std::span<const Gaussian3D> scene, const Camera &camera) {
    std::vector<std::optional<SplatProjection>> slots(scene.size());
    constexpr std::size_t                       kChunk = 256;
    const std::size_t chunks = (scene.size() + kChunk - 1) / kChunk;
    parallelFor(chunks, [&](std::size_t c) {
        const std::size_t end = std::min(scene.size(), (c + 1) * kChunk);
        for (std::size_t i = c * kChunk; i < end; ++i) {
            slots[i] = tryProjectSplat(camera, scene[i], i);
        }
    });
    std::vector<SplatProjection> out;
    out.reserve(scene.size());
    for (auto &s : slots) {
        if (s) {
            out.push_back(std::move(*s));
        }
    }
    return out;
}

std::vector<std::size_t>
sortSplats(std::span<const SplatProjection> projections) {
    std::vector<std::size_t> order(projections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &pa = projections[a];
        const auto &pb = projections[b];
        if (pa.zc != pb.zc) {
            return pa.zc < pb.zc;
        }
        return pa.splatIndex < pb.splatIndex;
    });
    return order;
}

FrameBuffers
render(std::span<const Gaussian3D> scene, const Camera &camera, const RenderOptions &opts) {
    if (camera.width < 1 || camera.height < 1) {
        raise(ErrorKind::InvalidArgument, "render target must have non-zero dimensions");
    }
    opts.validate();

    const int    width  = camera.width;
    const int    height = camera.height;
    FrameBuffers fb;
    fb.width         = width;
    fb.height        = height;
    fb.color         = Image(width, height, 3);
    fb.medianDepth   = Image(width, height, 1);
    fb.expectedDepth = Image(width, height, 1);
    fb.normal        = Image(width, height, 3);
    fb.accumOpacity  = Image(width, height, 1);
    fb.transmittance = Image(width, height, 1, 1.0);
    fb.medianRank.assign(camera.pixelCount(), -1);
    if (opts.retainRecords) {
        fb.records.resize(camera.pixelCount());
    }

    const std::vector<SplatProjection> projections = projectScene(scene, camera);
    const std::vector<std::size_t>     order       = sortSplats(projections);

    const int tile   = opts.tileSize;
    const int tilesX = (width + tile - 1) / tile;
    const int tilesY = (height + tile - 1) / tile;
    std::vector<std::vector<std::uint32_t>> tileLists(static_cast<std::size_t>(tilesX) * tilesY);
    for (const std::size_t slot : order) {
        const PixelRange box = footprintBox(projections[slot], width, height);
        if (box.x0 > box.x1 || box.y0 > box.y1) {
            continue;
        }
        for (int ty = box.y0 / tile; ty <= box.y1 / tile; ++ty) {
            for (int tx = box.x0 / tile; tx <= box.x1 / tile; ++tx) {
                tileLists[static_cast<std::size_t>(ty) * tilesX + tx].push_back(
                    static_cast<std::uint32_t>(slot));
            }
        }
    }

    parallelFor(tileLists.size(), [&](std::size_t tileIndex) {
        const auto &list = tileLists[tileIndex];
        if (list.empty()) {
            return;
        }
        const int tx = static_cast<int>(tileIndex) % tilesX;
        const int ty = static_cast<int>(tileIndex) / tilesX;
        const int xEnd = std::min(width, (tx + 1) * tile);
        const int yEnd = std::min(height, (ty + 1) * tile);
        for (int y = ty * tile; y < yEnd; ++y) {
            for (int x = tx * tile; x < xEnd; ++x) {
                const Vec2  pixel(x + 0.5, y + 0.5);
                const auto  pix         = fb.pixelIndex(x, y);
                double      transmit    = 1.0;
                double      weightSum   = 0.0;
                double      depthSum    = 0.0;
                Vec3        colorSum    = Vec3::Zero();
                Vec3        normalSum   = Vec3::Zero();
                double      medianDepth = 0.0;
                int         medianRank  = -1;
                int         rank        = 0;
                auto       *records     = opts.retainRecords ? &fb.records[pix] : nullptr;
                for (const std::uint32_t slot : list) {
                    const SplatProjection &proj  = projections[slot];
                    const double           maha  = screenMahalanobis(proj, pixel);
                    if (maha > kFootprintMahalanobis) {
                        continue;
                    }
                    const double opacity = scene[proj.splatIndex].opacity;
                    const double alpha   = std::min(kMaxAlpha, opacity * std::exp(-maha));
                    if (alpha < opts.alphaCutoff) {
                        continue;
                    }
                    const double weight = alpha * transmit;
                    const double depth  = depthAt(proj, pixel);
                    colorSum += weight * proj.rgb;
                    normalSum += weight * proj.normal;
                    depthSum += weight * depth;
                    weightSum += weight;
                    transmit *= 1.0 - alpha;
                    if (medianRank < 0 && weightSum >= opts.medianThreshold) {
                        medianRank  = rank;
                        medianDepth = depth;
                    }
                    if (records) {
                        records->push_back({proj.splatIndex, weight, depth, proj.normal, alpha});
                    }
                    ++rank;
                    if (transmit < opts.transmittanceStop) {
                        break;
                    }
                }
                fb.color.setVec3(x, y, colorSum);
                fb.accumOpacity.at(x, y)  = weightSum;
                fb.transmittance.at(x, y) = transmit;
                fb.medianDepth.at(x, y)   = medianDepth;
                fb.medianRank[pix]        = medianRank;
                if (weightSum > kWeightEpsilon) {
                    fb.expectedDepth.at(x, y) = depthSum / weightSum;
                    const double len          = normalSum.norm();
                    if (len > kWeightEpsilon) {
                        fb.normal.setVec3(x, y, normalSum / len);
                    }
                }
            }
        }
    });
    return fb;
}

} // namespace splatdepth
