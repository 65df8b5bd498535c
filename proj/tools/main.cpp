// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// splatdepth: batch rendering, oracle validation, fitting and mesh
// extraction. Every subcommand prints its resolved configuration as one JSON
// line on stdout before doing any work.
#include "commands.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/parallel.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>

using namespace splatdepth;
using namespace splatdepth::cli;

namespace {

int
exitCodeFor(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Format:
    case ErrorKind::Data:
    case ErrorKind::Io:
    case ErrorKind::InvalidArgument: return kExitUsage;
    default: return kExitRuntime;
    }
}

void
addCommon(CLI::App *cmd, Common &common) {
    cmd->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    cmd->add_option("--threads", common.threads, "Worker threads, 0 = all cores")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
}

} // namespace

int
main(int argc, char **argv) {
    CLI::App app{"Gaussian splat depth/normal renderer, validator, fitter and mesher", "splatdepth"};
    app.require_subcommand(1);

    Common       common;
    RenderArgs   render;
    ValidateArgs validate;
    FitArgs      fit;
    MeshArgs     mesh;
    SynthArgs    synth;

    auto *renderCmd = app.add_subcommand("render", "Render color, depth, normal and opacity maps");
    renderCmd->add_option("--scene", render.scene, "Splat PLY")->required();
    renderCmd->add_option("--cameras", render.cameras, "Camera JSON")->required();
    renderCmd->add_option("--out", render.out, "Output directory")->required();
    renderCmd->add_option("--median-threshold", render.medianThreshold)->capture_default_str();
    addCommon(renderCmd, common);

    auto *validateCmd = app.add_subcommand("validate", "Check closed forms against the oracles");
    validateCmd->add_option("--scene", validate.scene, "Splat PLY")->required();
    validateCmd->add_option("--cameras", validate.cameras, "Camera JSON")->required();
    validateCmd->add_option("--trials", validate.trials)->capture_default_str();
    validateCmd->add_option("--inject-fault", validate.injectFault, "Test hook")
        ->check(CLI::IsMember({"planarity"}))
        ->group("");
    addCommon(validateCmd, common);

    auto *fitCmd = app.add_subcommand("fit", "Fit splats to target views");
    fitCmd->add_option("--targets", fit.targets, "Directory with cameras.json")->required();
    fitCmd->add_option("--init", fit.init)
        ->check(CLI::IsMember({"random", "plane", "file"}))
        ->capture_default_str();
    fitCmd->add_option("--init-scene", fit.initScene, "Splat PLY for --init file");
    fitCmd->add_option("--splats", fit.splats)->check(CLI::Range(1, 256))->capture_default_str();
    fitCmd->add_option("--iters-phase1", fit.itersPhase1)->check(CLI::NonNegativeNumber)->capture_default_str();
    fitCmd->add_option("--iters-phase2", fit.itersPhase2)->check(CLI::NonNegativeNumber)->capture_default_str();
    fitCmd->add_option("--depth-weight", fit.depthWeight)->check(CLI::NonNegativeNumber)->capture_default_str();
    fitCmd->add_option("--normal-weight", fit.normalWeight)->check(CLI::NonNegativeNumber)->capture_default_str();
    fitCmd->add_option("--ssim-lambda", fit.ssimLambda)->check(CLI::Range(0.0, 1.0))->capture_default_str();
    fitCmd->add_option("--out", fit.out, "Output PLY")->required();
    fitCmd->add_option("--trace", fit.trace, "Loss trace CSV (default: <out>.trace.csv)");
    addCommon(fitCmd, common);

    auto *meshCmd = app.add_subcommand("mesh", "Fuse median depth maps and extract a mesh");
    meshCmd->add_option("--scene", mesh.scene, "Splat PLY")->required();
    meshCmd->add_option("--cameras", mesh.cameras, "Camera JSON")->required();
    meshCmd->add_option("--voxel-size", mesh.voxelSize)->check(CLI::PositiveNumber)->capture_default_str();
    meshCmd->add_option("--median-threshold", mesh.medianThreshold)->capture_default_str();
    meshCmd->add_option("--min-component", mesh.minComponent,
                        "Drop connected components with fewer triangles")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    meshCmd->add_option("--out", mesh.out, "Mesh (.ply or .obj)")->required();
    addCommon(meshCmd, common);

    auto *synthCmd = app.add_subcommand("synth", "Write a synthetic fixture");
    synthCmd->add_option("kind", synth.kind)
        ->required()
        ->check(CLI::IsMember({"plane", "sphere", "random"}));
    synthCmd->add_option("--out", synth.out, "Output directory")->required();
    synthCmd->add_option("--size", synth.size, "Image side in pixels");
    synthCmd->add_option("--splats", synth.splats);
    synthCmd->add_option("--cameras", synth.cameras);
    addCommon(synthCmd, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kExitUsage;
    }

    nlohmann::ordered_json echo;
    if (*renderCmd) {
        echo = {{"command", "render"}, {"scene", render.scene}, {"cameras", render.cameras},
                {"out", render.out}, {"median_threshold", render.medianThreshold},
                {"seed", common.seed}, {"threads", common.threads}};
    } else if (*validateCmd) {
        echo = {{"command", "validate"}, {"scene", validate.scene}, {"cameras", validate.cameras},
                {"trials", validate.trials}, {"seed", common.seed}, {"threads", common.threads}};
        if (!validate.injectFault.empty()) {
            echo["inject_fault"] = validate.injectFault;
        }
    } else if (*fitCmd) {
        echo = {{"command", "fit"}, {"targets", fit.targets}, {"init", fit.init},
                {"init_scene", fit.initScene}, {"splats", fit.splats},
                {"iters_phase1", fit.itersPhase1}, {"iters_phase2", fit.itersPhase2},
                {"depth_weight", fit.depthWeight}, {"normal_weight", fit.normalWeight},
                {"ssim_lambda", fit.ssimLambda}, {"out", fit.out}, {"trace", fit.trace},
                {"seed", common.seed}, {"threads", common.threads}};
    } else if (*meshCmd) {
        echo = {{"command", "mesh"}, {"scene", mesh.scene}, {"cameras", mesh.cameras},
                {"voxel_size", mesh.voxelSize}, {"median_threshold", mesh.medianThreshold},
                {"min_component", mesh.minComponent},
                {"out", mesh.out}, {"seed", common.seed}, {"threads", common.threads}};
    } else {
        echo = {{"command", "synth"}, {"kind", synth.kind}, {"out", synth.out},
                {"size", synth.size}, {"splats", synth.splats}, {"cameras", synth.cameras},
                {"seed", common.seed}, {"threads", common.threads}};
    }
    std::cout << echo.dump() << std::endl;

    try {
        setThreadCount(common.threads);
        if (*renderCmd) return runRender(render, common);
        if (*validateCmd) return runValidate(validate, common);
        if (*fitCmd) return runFit(fit, common);
        if (*meshCmd) return runMesh(mesh, common);
        return runSynth(synth, common);
    } catch (const DivergenceError &e) {
        std::cerr << "error: diverged at iteration " << e.iteration() << ": " << e.what() << "\n";
        return kExitRuntime;
    } catch (const Error &e) {
        std::cerr << "error (" << toString(e.kind()) << "): " << e.what() << "\n";
        return exitCodeFor(e.kind());
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
