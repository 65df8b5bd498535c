// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "commands.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/fit.hpp"
#include "splatdepth/fusion.hpp"
#include "splatdepth/io.hpp"
#include "splatdepth/rasterizer.hpp"
#include "splatdepth/synthetic.hpp"
#include "splatdepth/validate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

namespace splatdepth::cli {

namespace fs = std::filesystem;

namespace {

std::vector<Camera>
camerasOf(const io::CameraSet &set) {
    std::vector<Camera> out;
    for (const auto &v : set.views) {
        out.push_back(v.camera);
    }
    return out;
}

void
makeDirectory(const fs::path &dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        raise(ErrorKind::Io, "cannot create directory " + dir.string() + ": " + ec.message());
    }
}

// File-name-safe version of a view id.
std::string
safeName(const std::string &id) {
    std::string out = id;
    for (char &c : out) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_')) {
            c = '_';
        }
    }
    return out;
}

std::vector<TrainingView>
loadViews(const fs::path &json) {
    const io::CameraSet       set = io::loadCamerasJson(json);
    std::vector<TrainingView> views;
    for (const auto &v : set.views) {
        if (v.image.empty()) {
            throw FormatError("view '" + v.id + "' in " + json.string() + " has no image", v.id);
        }
        TrainingView tv;
        tv.camera = v.camera;
        tv.target = io::readImagePng(v.image);
        if (tv.target.width() != v.camera.width || tv.target.height() != v.camera.height) {
            throw FormatError("image size of view '" + v.id + "' does not match its camera", v.id);
        }
        if (!v.depth.empty()) {
            tv.depth = io::readPfm(v.depth);
        }
        views.push_back(std::move(tv));
    }
    return views;
}

void
printMetric(const ValidationMetric &m) {
    if (m.skipped) {
        std::printf("%-22s skipped (no qualifying samples)\n", m.name.c_str());
        return;
    }
    std::printf("%-22s %.3e  threshold %.1e  samples %zu  %s\n", m.name.c_str(), m.value,
                m.threshold, m.samples, m.passed ? "PASS" : "FAIL");
}

} // namespace

int
runRender(const RenderArgs &args, const Common &) {
    RenderOptions opts;
    opts.medianThreshold = args.medianThreshold;
    opts.validate();
    const io::SceneFile scene   = io::loadSplatPly(args.scene);
    const io::CameraSet cameras = io::loadCamerasJson(args.cameras);
    const fs::path      out     = args.out;
    makeDirectory(out);
    for (const auto &view : cameras.views) {
        const FrameBuffers fb   = render(scene.splats, view.camera, opts);
        const std::string  stem = safeName(view.id);
        io::writeImagePng(fb.color, out / (stem + "_color.png"));
        io::writePfm(fb.medianDepth, out / (stem + "_depth.pfm"));
        io::writePfm(fb.normal, out / (stem + "_normal.pfm"));
        io::writePfm(fb.accumOpacity, out / (stem + "_opacity.pfm"));
    }
    std::printf("rendered %zu views of %zu splats into %s\n", cameras.views.size(),
                scene.splats.size(), out.string().c_str());
    return kExitOk;
}

int
runValidate(const ValidateArgs &args, const Common &common) {
    if (args.trials <= 0) {
        raise(ErrorKind::InvalidArgument, "--trials must be positive");
    }
    const io::SceneFile scene   = io::loadSplatPly(args.scene);
    const io::CameraSet cameras = io::loadCamerasJson(args.cameras);
    ValidationOptions   opts;
    opts.trials            = static_cast<std::size_t>(args.trials);
    opts.seed              = common.seed;
    opts.corruptDepthPlane = args.injectFault == "planarity";
    const auto report      = validateScene(scene.splats, camerasOf(cameras), opts);

    for (const auto &m : report.metrics) {
        printMetric(m);
    }
    const auto &q = report.affineGapQuantiles;
    if (q.size() == 3 && std::isfinite(q[0])) {
        std::printf("affine gap quantiles   p50 %.3e  p90 %.3e  p99 %.3e\n", q[0], q[1], q[2]);
    }
    for (const auto &c : report.gradients.classes) {
        std::printf("gradient %-13s %.3e  checked %zu  excluded %zu\n", toString(c.paramClass),
                    c.maxRelativeError, c.checked, c.excluded);
    }
    const auto failures = report.failures();
    if (!failures.empty()) {
        std::string names;
        for (const auto &f : failures) {
            names += (names.empty() ? "" : ", ") + f;
        }
        std::fprintf(stderr, "validation failed: %s\n", names.c_str());
        return kExitValidation;
    }
    std::printf("validation passed\n");
    return kExitOk;
}

int
runFit(const FitArgs &args, const Common &common) {
    const fs::path dir   = args.targets;
    const auto     views = loadViews(dir / "cameras.json");
    std::vector<Camera> cams;
    for (const auto &v : views) {
        cams.push_back(v.camera);
    }

    synth::Rng              rng(common.seed);
    std::vector<Gaussian3D> init;
    if (args.init == "file") {
        if (args.initScene.empty()) {
            raise(ErrorKind::InvalidArgument, "--init file needs --init-scene");
        }
        init = io::loadSplatPly(args.initScene).splats;
    } else if (args.init == "plane") {
        init = synth::planeInit(rng, cams, args.splats);
    } else {
        init = synth::randomInit(rng, cams, args.splats);
    }

    LossWeights weights;
    weights.depthWeight  = args.depthWeight;
    weights.normalWeight = args.normalWeight;
    weights.ssimLambda   = args.ssimLambda;
    FitSchedule schedule;
    schedule.phase1Iterations = args.itersPhase1;
    schedule.phase2Iterations = args.itersPhase2;
    schedule.seed             = common.seed;

    const FitResult result = fit(init, views, weights, schedule);
    io::saveSplatPly(result.scene, args.out);
    const fs::path trace = args.trace.empty() ? fs::path(args.out + ".trace.csv") : fs::path(args.trace);
    writeLossTraceCsv(result.trace, trace);

    double trainL1 = 0.0;
    for (const auto &v : views) {
        trainL1 += viewL1(result.scene, v);
    }
    std::printf("fit %zu splats, %zu iterations, train L1 %.6f\n", result.scene.size(),
                result.trace.size(), trainL1 / static_cast<double>(views.size()));

    if (!fs::exists(dir / "holdout.json")) {
        return kExitOk;
    }
    const auto heldOut = loadViews(dir / "holdout.json");
    double     l1      = 0.0;
    for (const auto &v : heldOut) {
        l1 += viewL1(result.scene, v);
    }
    l1 /= static_cast<double>(heldOut.size());
    std::printf("held-out L1 %.6f\n", l1);

    const fs::path fixture = dir / "fixture.json";
    if (fs::exists(fixture)) {
        std::ifstream in(fixture);
        const auto    doc = nlohmann::json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.contains("heldout_l1_threshold") ||
            !doc["heldout_l1_threshold"].is_number()) {
            throw FormatError("fixture.json needs a numeric heldout_l1_threshold",
                              "/heldout_l1_threshold");
        }
        const double threshold = doc["heldout_l1_threshold"].get<double>();
        if (!(l1 < threshold)) {
            std::fprintf(stderr, "held-out L1 %.6f is not below the fixture threshold %.4f\n", l1,
                         threshold);
            return kExitValidation;
        }
        std::printf("held-out L1 below fixture threshold %.4f\n", threshold);
    }
    return kExitOk;
}

int
runMesh(const MeshArgs &args, const Common &) {
    RenderOptions opts;
    opts.medianThreshold = args.medianThreshold;
    opts.validate();
    const io::SceneFile scene   = io::loadSplatPly(args.scene);
    const io::CameraSet cameras = io::loadCamerasJson(args.cameras);

    TriangleMesh mesh;
    if (!scene.splats.empty()) {
        TsdfVolume    volume = volumeForScene(scene.splats, args.voxelSize);
        FusionOptions fusion;
        // Samples far beyond the scene would only smear background into
        // the volume.
        double reach = sceneExtent(scene.splats);
        for (const auto &v : cameras.views) {
            for (const auto &g : scene.splats) {
                reach = std::max(reach, (v.camera.center() - g.center).norm());
            }
        }
        fusion.maxDepth = 10.0 * std::max(reach, 1e-6);
        for (const auto &v : cameras.views) {
            integrateDepth(volume, render(scene.splats, v.camera, opts).medianDepth, v.camera, fusion);
        }
        mesh = extractMesh(volume);
        const std::size_t removed =
            removeSmallComponents(mesh, static_cast<std::size_t>(args.minComponent));
        if (removed > 0) {
            std::printf("removed %zu triangles in components below %d triangles\n", removed,
                        args.minComponent);
        }
    }
    io::writeMesh(mesh, args.out);
    std::printf("vertices %zu triangles %zu\n", mesh.vertices.size(), mesh.triangles.size());
    if (mesh.empty()) {
        std::fprintf(stderr, "warning: no surface found; wrote an empty mesh\n");
    }
    return kExitOk;
}

int
runSynth(const SynthArgs &args, const Common &common) {
    const fs::path out = args.out;
    makeDirectory(out);
    synth::Rng rng(common.seed);

    if (args.kind == "plane") {
        const auto    fx = synth::texturedPlane(args.size > 0 ? args.size : 128);
        io::CameraSet train, held;
        auto          emit = [&](const TrainingView &v, const std::string &id, io::CameraSet &set) {
            io::writeImagePng(v.target, out / (id + ".png"));
            io::writePfm(v.depth, out / (id + "_depth.pfm"));
            set.views.push_back({id, v.camera, id + ".png", id + "_depth.pfm"});
        };
        for (std::size_t i = 0; i < fx.train.size(); ++i) {
            emit(fx.train[i], "view" + std::to_string(i), train);
        }
        emit(fx.heldOut, "holdout", held);
        io::saveCamerasJson(train, out / "cameras.json");
        io::saveCamerasJson(held, out / "holdout.json");
        io::saveSplatPly(fx.generator, out / "generator.ply");
        std::ofstream f(out / "fixture.json");
        f << R"({"heldout_l1_threshold": 0.02})" << "\n";
        std::printf("wrote plane fixture to %s\n", out.string().c_str());
        return kExitOk;
    }

    std::vector<Gaussian3D> scene;
    std::vector<Camera>     cams;
    const int               size = args.size > 0 ? args.size : (args.kind == "sphere" ? 256 : 64);
    if (args.kind == "sphere") {
        scene = synth::sphereOfSplats(args.splats > 0 ? args.splats : 2000, 1.0);
        cams  = synth::orbitCameras(args.cameras > 0 ? args.cameras : 20, 3.0, size, size, size);
    } else {
        const int nc = args.cameras > 0 ? args.cameras : 2;
        for (int c = 0; c < nc; ++c) {
            cams.push_back(synth::randomCamera(rng, size, size));
        }
        const int ns = args.splats > 0 ? args.splats : 32;
        for (int i = 0; i < ns; ++i) {
            scene.push_back(synth::randomSplat(rng, cams[static_cast<std::size_t>(i % nc)]));
        }
    }
    io::CameraSet set;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        set.views.push_back({"cam" + std::to_string(i), cams[i], {}, {}});
    }
    io::saveCamerasJson(set, out / "cameras.json");
    io::saveSplatPly(scene, out / "scene.ply");
    std::printf("wrote %s fixture (%zu splats, %zu cameras) to %s\n", args.kind.c_str(),
                scene.size(), cams.size(), out.string().c_str());
    return kExitOk;
}

} // namespace splatdepth::cli
