// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale two-phase fitting: photometric loss only, then the photometric
// loss plus the depth-distortion and normal-consistency regularizers.
#pragma once

#include "splatdepth/losses.hpp"
#include "splatdepth/rasterizer.hpp"
#include "splatdepth/types.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace splatdepth {

inline constexpr std::size_t kMaxFitSplats = 256;

struct TrainingView {
    Camera camera;
    Image  target; // linear rgb
    Image  depth;  // optional ground truth, 1 channel, 0 = unknown; empty when absent
};

/// Adam step sizes per parameter class. The center rate is multiplied by the
/// scene extent and decays log-linearly to 1% of itself over the run.
struct LearningRates {
    double center   = 1.6e-4;
    double scale    = 5e-3; // on log scales
    double rotation = 1e-3;
    double opacity  = 5e-2; // on logit opacity
    double color    = 2.5e-3;
};

struct FitSchedule {
    int           phase1Iterations = 2000;
    int           phase2Iterations = 2000;
    std::uint64_t seed             = 0;
    LearningRates rates;
    /// Scene extent used to scale the center rate; <= 0 derives it from the
    /// camera centers.
    double        extent = 0.0;
    RenderOptions render;
};

struct LossTraceEntry {
    int           iteration = 0;
    int           phase     = 1;
    std::size_t   view      = 0;
    LossBreakdown loss;
};

struct FitResult {
    std::vector<Gaussian3D>     scene;
    std::vector<LossTraceEntry> trace;
};

/// Each iteration picks one view uniformly at random from a generator seeded
/// with schedule.seed. Throws DivergenceError on a non-finite loss or
/// gradient and InvalidArgument for empty inputs or more than 256 splats.
FitResult fit(std::span<const Gaussian3D> initial, std::span<const TrainingView> views,
              const LossWeights &weights, const FitSchedule &schedule = {});

/// Radius of the camera centers around their mean, times 1.1; 1 for a single
/// view.
double cameraExtent(std::span<const TrainingView> views);

/// Mean |L1| of the rendered color against the view's target.
double viewL1(std::span<const Gaussian3D> scene, const TrainingView &view,
              const RenderOptions &opts = {});

/// Mean |median depth - ground truth| over pixels where both are defined.
/// Returns NaN when the view has no ground-truth depth or no overlap.
double viewDepthError(std::span<const Gaussian3D> scene, const TrainingView &view,
                      const RenderOptions &opts = {});

/// Columns: iteration,phase,view,L_c,L_d,L_n,total.
void writeLossTraceCsv(std::span<const LossTraceEntry> trace, const std::filesystem::path &path);

} // namespace splatdepth
