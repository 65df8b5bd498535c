// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <string>

namespace splatdepth::cli {

// Stable exit-code contract.
inline constexpr int kExitOk         = 0;
inline constexpr int kExitRuntime    = 1;
inline constexpr int kExitUsage      = 2;
inline constexpr int kExitValidation = 3;

struct Common {
    std::uint64_t seed    = 0;
    int           threads = 0; // 0 = hardware concurrency
};

struct RenderArgs {
    std::string scene, cameras, out;
    double      medianThreshold = 0.5;
};

struct ValidateArgs {
    std::string scene, cameras;
    long long   trials = 1000;
    std::string injectFault; // "" or "planarity"
};

struct FitArgs {
    std::string targets, init = "plane", initScene, out, trace;
    int         splats      = 16;
    int         itersPhase1 = 2000;
    int         itersPhase2 = 2000;
    double      depthWeight = 100.0, normalWeight = 5.0, ssimLambda = 0.2;
};

struct MeshArgs {
    std::string scene, cameras, out;
    double      voxelSize       = 0.02;
    double      medianThreshold = 0.5;
    int         minComponent    = 50; // triangles; 0 keeps everything
};

struct SynthArgs {
    std::string kind, out;
    int         size = 0, splats = 0, cameras = 0;
};

int runRender(const RenderArgs &args, const Common &common);
int runValidate(const ValidateArgs &args, const Common &common);
int runFit(const FitArgs &args, const Common &common);
int runMesh(const MeshArgs &args, const Common &common);
int runSynth(const SynthArgs &args, const Common &common);

} // namespace splatdepth::cli
