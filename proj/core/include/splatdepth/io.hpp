// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// File formats. All binary formats are little-endian and every writer emits a
// deterministic byte stream for identical inputs.
#pragma once

#include "splatdepth/fusion.hpp"
#include "splatdepth/types.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace splatdepth::io {

struct SceneFile {
    std::vector<Gaussian3D> splats;
    int                     shDegree = 0;
    std::string             sourcePath;
};

/// Community 3DGS layout: x y z, f_dc_0..2, f_rest_* (0, 9, 24 or 45 of
/// them), opacity (logit), scale_0..2 (log), rot_0..3 (w x y z).
SceneFile loadSplatPly(const std::filesystem::path &path);
void      saveSplatPly(std::span<const Gaussian3D> scene, const std::filesystem::path &path);

struct CameraView {
    std::string           id;
    Camera                camera;
    std::filesystem::path image; // empty when absent
    std::filesystem::path depth; // optional ground-truth depth PFM
};

struct CameraSet {
    std::vector<CameraView> views;
};

/// Array of {id, width, height, fx, fy, cx, cy, rotation[9] row-major,
/// translation[3], image?, depth?}, optionally wrapped as {"cameras": [...]}.
/// Relative image paths resolve against the JSON file's directory.
CameraSet loadCamerasJson(const std::filesystem::path &path);
void      saveCamerasJson(const CameraSet &cameras, const std::filesystem::path &path);

/// 8-bit sRGB PNG from a linear rgb image.
void  writeImagePng(const Image &rgb, const std::filesystem::path &path);
/// Linear rgb image from an 8-bit PNG.
Image readImagePng(const std::filesystem::path &path);

/// PFM with scale -1 (little-endian), 1 or 3 channels.
void  writePfm(const Image &image, const std::filesystem::path &path);
Image readPfm(const std::filesystem::path &path);

/// ASCII OBJ for ".obj", binary little-endian PLY otherwise.
void writeMesh(const TriangleMesh &mesh, const std::filesystem::path &path);

} // namespace splatdepth::io
