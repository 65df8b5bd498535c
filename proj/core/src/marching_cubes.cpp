// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// The 256-case triangulation table is derived at startup instead of being
// transcribed: on every cube face the sign changes are joined into directed
// segments (ambiguous faces always isolate the inside corners, a rule that
// depends only on the face itself, so neighbouring cells agree), and the
// segments chain into closed polygons that are fan-triangulated.
#include "splatdepth/fusion.hpp"

#include "splatdepth/parallel.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace splatdepth {

namespace {

constexpr double kCornerGap = 1e-3; // in units of the cell edge

struct CubeEdge {
    int a, b, axis;
};

/// Corner c sits at (c & 1, (c >> 1) & 1, (c >> 2) & 1).
std::array<CubeEdge, 12>
cubeEdges() {
    std::array<CubeEdge, 12> edges{};
    int                      e = 0;
    for (int axis = 0; axis < 3; ++axis) {
        for (int c = 0; c < 8; ++c) {
            if ((c >> axis) & 1) {
                continue;
            }
            edges[e++] = {c, c | (1 << axis), axis};
        }
    }
    return edges;
}

int
edgeBetween(const std::array<CubeEdge, 12> &edges, int c0, int c1) {
    for (int e = 0; e < 12; ++e) {
        if ((edges[e].a == c0 && edges[e].b == c1) || (edges[e].a == c1 && edges[e].b == c0)) {
            return e;
        }
    }
    return -1;
}

/// Face corners in counter-clockwise order seen from outside the cube.
std::array<std::array<int, 4>, 6>
cubeFaces() {
    std::array<std::array<int, 4>, 6> faces{};
    int                               f = 0;
    for (int axis = 0; axis < 3; ++axis) {
        const int b = (axis + 1) % 3, c = (axis + 2) % 3;
        for (int side = 0; side < 2; ++side) {
            const int base = side << axis;
            std::array<int, 4> ring = {base, base | (1 << b), base | (1 << b) | (1 << c),
                                       base | (1 << c)};
            if (side == 0) {
                std::reverse(ring.begin(), ring.end());
            }
            faces[f++] = ring;
        }
    }
    return faces;
}

std::vector<std::array<int, 3>>
triangulateCase(int mask, const std::array<CubeEdge, 12> &edges,
                const std::array<std::array<int, 4>, 6> &faces) {
    auto inside = [mask](int corner) { return ((mask >> corner) & 1) != 0; };
    std::array<int, 12> link;
    link.fill(-1);
    for (const auto &ring : faces) {
        std::array<int, 4> crossing; // edge id after corner k, or -1
        int                count = 0;
        for (int k = 0; k < 4; ++k) {
            const int c0 = ring[k], c1 = ring[(k + 1) % 4];
            crossing[k]  = inside(c0) != inside(c1) ? edgeBetween(edges, c0, c1) : -1;
            count += crossing[k] >= 0 ? 1 : 0;
        }
        for (int k = 0; k < 4; ++k) {
            if (crossing[k] < 0 || !inside(ring[k])) {
                continue; // segments start where the walk leaves the inside
            }
            int end = -1;
            if (count == 4) {
                end = crossing[(k + 3) % 4];
            } else {
                for (int j = 1; j < 4 && end < 0; ++j) {
                    const int kk = (k + j) % 4;
                    if (crossing[kk] >= 0) {
                        end = crossing[kk];
                    }
                }
            }
            link[crossing[k]] = end;
        }
    }

    std::vector<std::array<int, 3>> tris;
    std::array<bool, 12>            used{};
    for (int start = 0; start < 12; ++start) {
        if (link[start] < 0 || used[start]) {
            continue;
        }
        std::vector<int> loop;
        for (int e = start; !used[e]; e = link[e]) {
            used[e] = true;
            loop.push_back(e);
        }
        for (std::size_t i = 1; i + 1 < loop.size(); ++i) {
            tris.push_back({loop[0], loop[i], loop[i + 1]});
        }
    }
    return tris;
}

std::array<std::vector<std::array<int, 3>>, 256>
buildCases() {
    const auto edges = cubeEdges();
    const auto faces = cubeFaces();
    std::array<std::vector<std::array<int, 3>>, 256> cases;
    for (int mask = 0; mask < 256; ++mask) {
        cases[mask] = triangulateCase(mask, edges, faces);
    }
    // Orient so normals point away from the inside corners: with only corner 0
    // inside the normal must point toward (1, 1, 1).
    const auto &probe = cases[1].front();
    auto        mid   = [&](int e) {
        Vec3 p = Vec3::Zero();
        for (int c : {edges[e].a, edges[e].b}) {
            p += Vec3(c & 1, (c >> 1) & 1, (c >> 2) & 1);
        }
        return Vec3(0.5 * p);
    };
    const Vec3 n = (mid(probe[1]) - mid(probe[0])).cross(mid(probe[2]) - mid(probe[0]));
    if (n.dot(Vec3::Ones()) < 0.0) {
        for (auto &tris : cases) {
            for (auto &t : tris) {
                std::swap(t[1], t[2]);
            }
        }
    }
    return cases;
}

struct SlabOutput {
    std::vector<std::array<std::uint64_t, 3>>  triangles; // global edge keys
    std::unordered_map<std::uint64_t, Vec3>    positions;
};

} // namespace

const std::array<std::vector<std::array<int, 3>>, 256> &
marchingCubesCases() {
    static const auto cases = buildCases();
    return cases;
}

TriangleMesh
extractMesh(const TsdfVolume &volume, double iso) {
    const auto &cases = marchingCubesCases();
    static const auto edges = cubeEdges();
    const auto  dims  = volume.dims();
    TriangleMesh mesh;
    if (dims[0] < 2 || dims[1] < 2 || dims[2] < 2) {
        return mesh;
    }

    const int               slabs = dims[2] - 1;
    std::vector<SlabOutput> out(static_cast<std::size_t>(slabs));
    parallelFor(static_cast<std::size_t>(slabs), [&](std::size_t slab) {
        auto     &dst = out[slab];
        const int k   = static_cast<int>(slab);
        for (int j = 0; j + 1 < dims[1]; ++j) {
            for (int i = 0; i + 1 < dims[0]; ++i) {
                std::array<double, 8> value{};
                int                   mask = 0;
                bool                  valid = true;
                for (int c = 0; c < 8 && valid; ++c) {
                    const int ci = i + (c & 1), cj = j + ((c >> 1) & 1), ck = k + ((c >> 2) & 1);
                    if (!(volume.weight(ci, cj, ck) > 0.0)) {
                        valid = false;
                        break;
                    }
                    value[c] = volume.tsdf(ci, cj, ck);
                    if (value[c] < iso) {
                        mask |= 1 << c;
                    }
                }
                if (!valid || mask == 0 || mask == 255) {
                    continue;
                }
                for (const auto &tri : cases[mask]) {
                    std::array<std::uint64_t, 3> keys{};
                    for (int v = 0; v < 3; ++v) {
                        const CubeEdge &edge = edges[tri[v]];
                        const int       ai = i + (edge.a & 1), aj = j + ((edge.a >> 1) & 1),
                                  ak = k + ((edge.a >> 2) & 1);
                        const std::uint64_t key = volume.index(ai, aj, ak) * 3 + edge.axis;
                        keys[v]                 = key;
                        if (!dst.positions.contains(key)) {
                            const double va = value[edge.a], vb = value[edge.b];
                            // Keeping vertices off the corners stops a corner that sits
                            // on the iso level from collapsing triangles to zero area.
                            const double t =
                                std::clamp((iso - va) / (vb - va), kCornerGap, 1.0 - kCornerGap);
                            const int    bi = i + (edge.b & 1), bj = j + ((edge.b >> 1) & 1),
                                      bk = k + ((edge.b >> 2) & 1);
                            dst.positions.emplace(key, volume.position(ai, aj, ak) +
                                                           t * (volume.position(bi, bj, bk) -
                                                                volume.position(ai, aj, ak)));
                        }
                    }
                    dst.triangles.push_back(keys);
                }
            }
        }
    });

    std::unordered_map<std::uint64_t, std::uint32_t> ids;
    for (const auto &slab : out) {
        for (const auto &keys : slab.triangles) {
            std::array<std::uint32_t, 3> tri{};
            for (int v = 0; v < 3; ++v) {
                auto it = ids.find(keys[v]);
                if (it == ids.end()) {
                    it = ids.emplace(keys[v], static_cast<std::uint32_t>(mesh.vertices.size())).first;
                    mesh.vertices.push_back(slab.positions.at(keys[v]));
                }
                tri[v] = it->second;
            }
            const Vec3 &a = mesh.vertices[tri[0]], &b = mesh.vertices[tri[1]],
                       &c = mesh.vertices[tri[2]];
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] ||
                0.5 * (b - a).cross(c - a).norm() <= 1e-12) {
                continue;
            }
            mesh.triangles.push_back(tri);
        }
    }

    mesh.normals.assign(mesh.vertices.size(), Vec3::Zero());
    for (const auto &t : mesh.triangles) {
        const Vec3 n = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                           .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
        for (auto v : t) {
            mesh.normals[v] += n;
        }
    }
    for (auto &n : mesh.normals) {
        const double len = n.norm();
        if (len > 0.0) {
            n /= len;
        }
    }
    return mesh;
}

std::size_t
removeSmallComponents(TriangleMesh &mesh, std::size_t minTriangles) {
    // Union-find over vertices; triangles join their three corners.
    std::vector<std::uint32_t> parent(mesh.vertices.size());
    std::iota(parent.begin(), parent.end(), 0u);
    auto find = [&](std::uint32_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v         = parent[v];
        }
        return v;
    };
    for (const auto &t : mesh.triangles) {
        const std::uint32_t r0 = find(t[0]);
        for (int c = 1; c < 3; ++c) {
            const std::uint32_t rc = find(t[c]);
            if (rc != r0) {
                parent[std::max(rc, r0)] = std::min(rc, r0);
            }
        }
    }
    std::vector<std::size_t> size(mesh.vertices.size(), 0);
    for (const auto &t : mesh.triangles) {
        ++size[find(t[0])];
    }

    std::vector<std::array<std::uint32_t, 3>> kept;
    for (const auto &t : mesh.triangles) {
        if (size[find(t[0])] >= minTriangles) {
            kept.push_back(t);
        }
    }
    const std::size_t removed = mesh.triangles.size() - kept.size();

    // Compact the vertices still referenced, preserving their order.
    constexpr std::uint32_t  kUnused = ~0u;
    std::vector<std::uint32_t> remap(mesh.vertices.size(), kUnused);
    for (const auto &t : kept) {
        for (auto v : t) {
            remap[v] = 0;
        }
    }
    std::vector<Vec3> vertices, normals;
    const bool        hasNormals = mesh.normals.size() == mesh.vertices.size();
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
        if (remap[v] == kUnused) {
            continue;
        }
        remap[v] = static_cast<std::uint32_t>(vertices.size());
        vertices.push_back(mesh.vertices[v]);
        if (hasNormals) {
            normals.push_back(mesh.normals[v]);
        }
    }
    for (auto &t : kept) {
        for (auto &v : t) {
            v = remap[v];
        }
    }
    mesh.vertices  = std::move(vertices);
    mesh.normals   = std::move(normals);
    mesh.triangles = std::move(kept);
    return removed;
}

} // namespace splatdepth
