// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include "reference/oracles.hpp"

#include <splatdepth/backward.hpp>
#include <splatdepth/fit.hpp>
#include <splatdepth/fusion.hpp>
#include <splatdepth/grad_check.hpp>
#include <splatdepth/losses.hpp>
#include <splatdepth/oracle.hpp>
#include <splatdepth/rasterizer.hpp>
#include <splatdepth/synthetic.hpp>
#include <splatdepth/validate.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

namespace fs = std::filesystem;
using namespace splatdepth;
namespace orc = splatdepth::oracle;

namespace {

using Clock = std::chrono::steady_clock;

double
seconds(Clock::time_point since) {
    return std::chrono::duration<double>(Clock::now() - since).count();
}

double
uniform(synth::Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double
median(std::vector<double> v) {
    if (v.empty()) {
        return std::nan("");
    }
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid;
}

double
relErr(double got, double want) {
    return std::abs(got - want) / std::max(std::abs(want), 1e-300);
}

Camera
axisCamera(int width, int height, double focal) {
    Camera c;
    c.fx = c.fy = focal;
    c.cx        = 0.5 * width;
    c.cy        = 0.5 * height;
    c.width     = width;
    c.height    = height;
    return c;
}

// Pixel at normalized offset `unit` (inside the unit disc) of the 3-sigma
// ellipse of the alpha footprint.
Vec2
ellipsePoint(const SplatProjection &proj, const Vec2 &unit) {
    const Mat2 l = proj.conic.inverse().llt().matrixL();
    return proj.uvCenter + 3.0 * (l * unit);
}

Vec2
unitDiscPoint(synth::Rng &rng) {
    const double r   = std::sqrt(uniform(rng, 0.0, 1.0));
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return {r * std::cos(phi), r * std::sin(phi)};
}

double
footprintRadius(const SplatProjection &proj) {
    Eigen::SelfAdjointEigenSolver<Mat2> eig(proj.conic.inverse());
    return 3.0 * std::sqrt(eig.eigenvalues().maxCoeff());
}

double
offAxisDeg(const SplatProjection &proj) {
    return std::acos(std::clamp(proj.zc / proj.tc, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

struct Outcome {
    bool        passed = false;
    std::string detail;
};

Outcome
verdict(bool passed, const char *fmt, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return {passed, buf};
}

// 1. Every in-footprint pixel's ray-space intersection lies on the plane
// through the center with normal (q, 1).
Outcome
planarity() {
    const auto  start = Clock::now();
    synth::Rng  rng(1001);
    double      worst = 0.0;
    std::size_t n     = 0;
    while (n < 10000) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam, 0.02, 0.5, 60.0));
        for (int k = 0; k < 10; ++k, ++n) {
            const Vec2 px[] = {ellipsePoint(proj, unitDiscPoint(rng))};
            worst = std::max(worst, orc::planarityResidual(proj, px) / proj.tc);
        }
    }
    const double t = seconds(start);
    return verdict(worst <= 1e-9 && t < 10.0, "%zu triples, max residual/t_c %.3g (<= 1e-9), %.2f s",
                   n, worst, t);
}

// 2. The rasterized depth plane passes through z_c at the projected center.
Outcome
centerDepth() {
    synth::Rng rng(1002);
    double     worst = 0.0;
    for (int i = 0; i < 10000; ++i) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam, 0.02, 0.5, 60.0));
        worst             = std::max(worst, relErr(depthAt(proj, proj.uvCenter), proj.zc));
    }
    return verdict(worst <= 1e-12, "10000 splats, max relative error %.3g (<= 1e-12)", worst);
}

// 3. The closed-form intersection maximizes the Gaussian along the ray, for
// both the world-space primitive and its ray-space counterpart.
Outcome
closedFormMaximality() {
    const auto start = Clock::now();
    synth::Rng rng(1003);
    double     worstArg = 0.0, worstExcess = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Camera     cam  = synth::randomCamera(rng, 64, 64);
        const Gaussian3D g    = synth::randomSplat(rng, cam);
        const auto       proj = projectSplat(cam, g);
        const Vec2       px   = ellipsePoint(proj, unitDiscPoint(rng));
        const auto [lo, hi]   = orc::samplingWindow(proj.tc, g.scales.maxCoeff());

        const orc::Ray ray   = orc::worldRay(cam, px);
        const double   tStar = orc::intersectPerspective(g, ray);
        auto alongRay        = [&](double t) { return orc::gaussianAlongRay(g, ray, t); };
        const auto   s       = orc::maximizeBySampling(alongRay, lo, hi);
        const double peak    = alongRay(tStar);
        worstArg             = std::max(worstArg, relErr(s.t, tStar));
        worstExcess          = std::max(worstExcess, (s.gridBestVal - peak) / peak);

        const double rStar = orc::intersectRaySpace(proj, px);
        auto rayspace      = [&](double t) { return orc::rayspaceGaussianAlongRay(proj, px, t); };
        const auto   r     = orc::maximizeBySampling(rayspace, lo, hi);
        const double rPeak = rayspace(rStar);
        worstArg           = std::max(worstArg, relErr(r.t, rStar));
        worstExcess        = std::max(worstExcess, (r.gridBestVal - rPeak) / rPeak);
    }
    const double t = seconds(start);
    // A dense sample may only exceed the closed form by round-off.
    return verdict(worstArg <= 1e-6 && worstExcess <= 1e-12 && t < 30.0,
                   "1000 rays x 2 forms, argmax rel error %.3g (<= 1e-6), best sample above peak "
                   "by %.3g, %.2f s",
                   worstArg, worstExcess, t);
}

// 4. Rasterized depth against the ray-space oracle scaled by z_c / t_c.
Outcome
rasterVsRaySpace() {
    synth::Rng  rng(1004);
    double      worst = 0.0;
    std::size_t n     = 0;
    for (int i = 0; i < 2000; ++i) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam, 0.02, 0.5, 60.0));
        for (const Vec2 &px : orc::footprintPixels(proj, cam)) {
            const double oracleDepth = proj.zc / proj.tc * orc::intersectRaySpace(proj, px);
            worst = std::max(worst, relErr(depthAt(proj, px), oracleDepth));
            ++n;
        }
    }
    return verdict(worst <= 1e-12 && n > 0, "%zu footprint pixels, max relative error %.3g (<= 1e-12)",
                   n, worst);
}

// 5. Gap between the affine depth plane and the exact perspective
// intersection, on splats of at most 10 px radius within 30 degrees of the
// axis, and its response to halving every scale.
Outcome
affineGap() {
    synth::Rng          rng(1005);
    std::vector<double> gaps;
    std::size_t         pairs = 0, shrinking = 0;
    while (pairs < 1000) {
        const Camera cam = synth::randomCamera(rng, 64, 64);
        Gaussian3D   g   = synth::randomSplat(rng, cam, 0.02, 0.3, 30.0);
        const auto   full = projectSplat(cam, g);
        if (footprintRadius(full) > thresholds::kMaxFootprintPx ||
            offAxisDeg(full) > thresholds::kMaxOffAxisDeg) {
            continue;
        }
        std::vector<Vec2> unit(16);
        for (auto &u : unit) {
            u = unitDiscPoint(rng);
        }
        auto medianGap = [&](const Gaussian3D &splat, std::vector<double> *keep) {
            const auto        proj = projectSplat(cam, splat);
            std::vector<Vec2> px;
            for (const Vec2 &u : unit) {
                px.push_back(ellipsePoint(proj, u));
            }
            const auto g = orc::affineVsPerspectiveGap(splat, cam, px);
            if (keep) {
                keep->insert(keep->end(), g.begin(), g.end());
            }
            return median(g);
        };
        const double before = medianGap(g, &gaps);
        g.scales *= 0.5;
        const double after = medianGap(g, nullptr);
        ++pairs;
        shrinking += after < before ? 1 : 0;
    }
    const double med      = median(gaps);
    const double fraction = static_cast<double>(shrinking) / static_cast<double>(pairs);
    return verdict(med <= thresholds::kAffineGapMedian && fraction >= 0.95,
                   "%zu splats, median gap %.3g (<= 1e-2), gap shrank on halving in %.1f%% of pairs "
                   "(>= 95%%)",
                   pairs, med, 100.0 * fraction);
}

// 6. A flat disc on the optical axis, tilted 20 degrees: rasterized normals
// against normals differentiated from the rendered depth map. The depth map
// is affine in pixels while a tilted plane's depth is not, so the angle grows
// with tilt and footprint (2.9 degrees at 35 degrees tilt).
Outcome
normalDepthConsistency() {
    const Camera cam   = axisCamera(96, 96, 96);
    const Vec3   axis  = Vec3(std::sin(20.0 * std::numbers::pi / 180.0), 0.0,
                              -std::cos(20.0 * std::numbers::pi / 180.0));
    const Gaussian3D disc = synth::flatSplat(Vec3(0, 0, 3), axis, 0.4, 1e-3, 0.95, Vec3(0.6, 0.5, 0.4));
    const std::vector<Gaussian3D> scene{disc};
    const auto  fb   = render(scene, cam);
    const Image fromDepth = normalFromDepth(fb.medianDepth, cam);
    const auto  proj = projectSplat(cam, disc);

    double      worst = 0.0;
    std::size_t n     = 0;
    for (int y = 0; y < cam.height; ++y) {
        for (int x = 0; x < cam.width; ++x) {
            // Interior: within 2 sigma, and the finite-difference stencil
            // saw the disc at all three taps.
            const Vec2 d = Vec2(x + 0.5, y + 0.5) - proj.uvCenter;
            const Vec3 nd = fromDepth.vec3(x, y);
            if (d.dot(proj.conic * d) > 4.0 || nd.squaredNorm() == 0.0) {
                continue;
            }
            const Vec3   nr  = fb.normal.vec3(x, y).normalized();
            const double deg = std::acos(std::clamp(nr.dot(nd), -1.0, 1.0)) * 180.0 / std::numbers::pi;
            worst            = std::max(worst, deg);
            ++n;
        }
    }
    return verdict(n > 100 && worst <= 2.0, "%zu interior pixels, max angle %.3g deg (<= 2)", n, worst);
}

// 7. Weights plus final transmittance sum to one, and the tiled renderer
// matches the per-pixel reference on every buffer.
Outcome
blending() {
    synth::Rng   rng(1007);
    const Camera cam   = synth::randomCamera(rng, 64, 64);
    const auto   scene = synth::randomScene(rng, cam, 64);
    RenderOptions o;
    o.transmittanceStop = 0.0; // the reference has no early exit
    const auto fb = render(scene, cam, o);
    double sumErr = 0.0;
    for (std::size_t i = 0; i < fb.accumOpacity.data().size(); ++i) {
        sumErr = std::max(sumErr, std::abs(fb.accumOpacity.data()[i] + fb.transmittance.data()[i] - 1.0));
    }
    const auto ref  = reference::bruteForceRender(scene, cam, o.alphaCutoff);
    const double diff = std::max({reference::maxAbsDiff(fb.color, ref.color),
                                  reference::maxAbsDiff(fb.medianDepth, ref.medianDepth),
                                  reference::maxAbsDiff(fb.expectedDepth, ref.expectedDepth),
                                  reference::maxAbsDiff(fb.normal, ref.normal),
                                  reference::maxAbsDiff(fb.accumOpacity, ref.accumOpacity),
                                  reference::maxAbsDiff(fb.transmittance, ref.transmittance)});
    return verdict(sumErr <= 1e-6 && diff <= 1e-6,
                   "64 splats at 64x64, max |sum w + T - 1| %.3g, max |tiled - reference| %.3g (<= 1e-6)",
                   sumErr, diff);
}

std::vector<PixelBlendRecord>
randomRecords(synth::Rng &rng, std::size_t n) {
    std::vector<PixelBlendRecord> rec(n);
    for (auto &r : rec) {
        r.weight = uniform(rng, 0.0, 1.0 / static_cast<double>(n));
        r.depth  = uniform(rng, 0.5, 10.0);
        r.normal = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
    }
    return rec;
}

// 8. L_d one-pass against the double sum, zero on equal depths, and the
// [0, 2 sum w] bounds of L_n.
Outcome
lossIdentities() {
    synth::Rng rng(1008);
    double     onePass = 0.0, equal = 0.0;
    for (std::size_t n : {2u, 3u, 10u, 100u, 1000u}) {
        for (int trial = 0; trial < 20; ++trial) {
            auto rec = randomRecords(rng, n);
            onePass  = std::max(onePass, relErr(depthDistortion(rec), reference::depthDistortionDoubleSum(rec)));
            for (auto &r : rec) {
                r.depth = 4.25;
            }
            equal = std::max(equal, std::abs(depthDistortion(rec)));
        }
    }
    std::size_t violations = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const auto rec = randomRecords(rng, 1 + rng() % 32);
        const Vec3 target =
            Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)).normalized();
        double sumW = 0.0;
        for (const auto &r : rec) {
            sumW += r.weight;
        }
        const double ln = normalConsistency(rec, target);
        violations += (ln < -1e-15 || ln > 2.0 * sumW + 1e-15) ? 1 : 0;
    }
    return verdict(onePass <= 1e-12 && equal == 0.0 && violations == 0,
                   "one-pass vs double sum %.3g (<= 1e-12), equal depths %.3g, %zu of 10000 L_n bound "
                   "violations",
                   onePass, equal, violations);
}

// 9. Analytic gradients against central differences, and no opacity
// gradient from L_d through the detached weights.
Outcome
gradients() {
    const auto  start   = Clock::now();
    double      worst   = 0.0, opacityLd = 0.0;
    std::size_t checked = 0, excluded = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        synth::Rng   rng(2000 + seed);
        const int    count = 1 + static_cast<int>(seed % 8);
        const Camera cam   = synth::randomCamera(rng, 32, 32);
        const auto   scene = synth::randomScene(rng, cam, count, 0.05, 0.3);
        auto         moved = scene;
        std::normal_distribution<double> noise(0.0, 0.3);
        for (auto &g : moved) {
            g.color.dc() += Vec3(noise(rng), noise(rng), noise(rng));
            g.center += 0.02 * Vec3(noise(rng), noise(rng), noise(rng));
        }
        const Image target = render(moved, cam).color;
        const auto  report = gradCheck(scene, cam, target, LossWeights{});
        worst              = std::max(worst, report.worst());
        for (const auto &c : report.classes) {
            checked += c.checked;
            excluded += c.excluded;
        }

        RenderOptions o;
        o.retainRecords = true;
        const auto fb   = render(scene, cam, o);
        LossSeeds  onlyDepth;
        onlyDepth.depthCoeff = 1.0;
        for (const auto &s : backward(scene, cam, fb, onlyDepth).splats) {
            opacityLd = std::max(opacityLd, std::abs(s.opacity));
        }
    }
    const double t = seconds(start);
    return verdict(worst <= thresholds::kGradient && opacityLd == 0.0 && checked > 0 && t < 300.0,
                   "20 scenes, worst relative error %.3g (<= 1e-3) over %zu parameters (%zu excluded), "
                   "max |dL_d/d opacity| %.3g, %.1f s",
                   worst, checked, excluded, opacityLd, t);
}

// 10. Depth fusion of a splatted unit sphere, with the same settings as the
// mesh command.
Outcome
sphereReconstruction() {
    const auto  start   = Clock::now();
    const auto  scene   = synth::sphereOfSplats(2000, 1.0);
    const auto  cameras = synth::orbitCameras(20, 3.0, 256, 256, 256);
    TsdfVolume  volume  = volumeForScene(scene, 0.02);
    FusionOptions fusion;
    double        reach = sceneExtent(scene);
    for (const auto &c : cameras) {
        for (const auto &g : scene) {
            reach = std::max(reach, (c.center() - g.center).norm());
        }
    }
    fusion.maxDepth = 10.0 * reach;
    for (const auto &c : cameras) {
        integrateDepth(volume, render(scene, c).medianDepth, c, fusion);
    }
    TriangleMesh mesh    = extractMesh(volume);
    const auto   removed = removeSmallComponents(mesh, 50);
    double       sum = 0.0, worst = 0.0;
    for (const Vec3 &v : mesh.vertices) {
        const double e = std::abs(v.norm() - 1.0);
        sum += e;
        worst = std::max(worst, e);
    }
    const double mean = mesh.vertices.empty() ? std::nan("") : sum / static_cast<double>(mesh.vertices.size());
    const double t    = seconds(start);
    return verdict(!mesh.empty() && mean <= 0.04 && worst <= 0.1,
                   "%zu vertices (%zu triangles in small components dropped), mean distance %.4g "
                   "(<= 0.04), max %.4g (<= 0.1), %.1f s",
                   mesh.vertices.size(), removed, mean, worst, t);
}

// 11. Desk-scale plane fit with and without the depth and normal terms.
Outcome
planeFit() {
    const auto start = Clock::now();
    const auto fx    = synth::texturedPlane(128);
    std::vector<Camera> cams;
    for (const auto &v : fx.train) {
        cams.push_back(v.camera);
    }
    synth::Rng rng(0);
    const auto init = synth::planeInit(rng, cams, 16);
    FitSchedule schedule;
    schedule.phase1Iterations = 2000;
    schedule.phase2Iterations = 2000;

    struct Run {
        double heldOutL1 = 0.0, depthError = 0.0;
    };
    auto run = [&](const LossWeights &w) {
        const auto result = fit(init, fx.train, w, schedule);
        Run        r;
        r.heldOutL1 = viewL1(result.scene, fx.heldOut);
        for (const auto &v : fx.train) {
            r.depthError += viewDepthError(result.scene, v);
        }
        r.depthError = (r.depthError + viewDepthError(result.scene, fx.heldOut)) /
                       static_cast<double>(fx.train.size() + 1);
        return r;
    };
    LossWeights plain;
    plain.depthWeight  = 0.0;
    plain.normalWeight = 0.0;
    LossWeights regularized; // w_d = 100, w_n = 5
    const Run   off = run(plain);
    const Run   on  = run(regularized);
    const double t  = seconds(start);
    return verdict(off.heldOutL1 < 0.02 && on.depthError <= off.depthError && t < 900.0,
                   "held-out L1 %.4f without depth/normal terms (< 0.02), %.4f with them; mean depth "
                   "error %.4f with vs %.4f without (must not be worse), %.0f s",
                   off.heldOutL1, on.heldOutL1, on.depthError, off.depthError, t);
}

std::string
slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Relative path -> contents for every regular file under `root`.
std::vector<std::pair<std::string, std::string>>
snapshot(const fs::path &root) {
    std::vector<std::pair<std::string, std::string>> files;
    for (const auto &e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) {
            files.emplace_back(fs::relative(e.path(), root).string(), slurp(e.path()));
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

// 12. Render and fit through the CLI: two runs per thread count, thread
// counts 1 and 8, every output byte-identical.
Outcome
determinism() {
#ifndef SPLATDEPTH_CLI_PATH
    return {false, "CLI not built"};
#else
    const fs::path work = fs::absolute("acceptance_determinism");
    fs::remove_all(work);
    fs::create_directories(work);
    auto cli = [&](const std::string &args) {
        const std::string cmd = "cd '" + work.string() + "' && '" SPLATDEPTH_CLI_PATH "' " + args +
                                " > /dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    if (cli("synth random --out random --seed 7 --splats 64 --size 64") != 0 ||
        cli("synth plane --out plane --size 32") != 0) {
        return {false, "could not generate the fixtures"};
    }
    std::vector<std::vector<std::pair<std::string, std::string>>> outputs;
    for (int threads : {1, 8}) {
        for (int rep = 0; rep < 2; ++rep) {
            const std::string tag = "run_" + std::to_string(threads) + "_" + std::to_string(rep);
            const std::string t   = " --threads " + std::to_string(threads) + " --seed 3";
            fs::create_directories(work / tag);
            // A fit this short misses the fixture's held-out threshold, which
            // the CLI reports with exit code 3 after writing its outputs.
            const int rendered = cli("render --scene random/scene.ply --cameras random/cameras.json --out " +
                                     tag + "/render" + t);
            const int fitted = cli("fit --targets plane --init plane --splats 9 --iters-phase1 25 "
                                   "--iters-phase2 25 --out " + tag + "/fit.ply" + t);
            if (rendered != 0 || (fitted != 0 && fitted != 3)) {
                return {false, "CLI run failed for " + tag};
            }
            outputs.push_back(snapshot(work / tag));
        }
    }
    bool same = true;
    for (const auto &o : outputs) {
        same = same && o == outputs.front();
    }
    return verdict(same && outputs.front().size() >= 3,
                   "render + fit, threads {1, 8} x 2 runs, %zu files each, %s", outputs.front().size(),
                   same ? "byte-identical" : "outputs differ");
#endif
}

} // namespace

// Arguments, if any, pick which criterion numbers to run.
int
main(int argc, char **argv) {
    struct Criterion {
        int                      id;
        const char              *name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "planarity", planarity},
        {2, "center depth", centerDepth},
        {3, "closed-form maximality", closedFormMaximality},
        {4, "raster vs ray space", rasterVsRaySpace},
        {5, "affine gap", affineGap},
        {6, "normal/depth consistency", normalDepthConsistency},
        {7, "blending identity", blending},
        {8, "loss identities", lossIdentities},
        {9, "gradients", gradients},
        {10, "sphere reconstruction", sphereReconstruction},
        {11, "plane fit", planeFit},
        {12, "determinism", determinism},
    };
    std::vector<int> only;
    for (int i = 1; i < argc; ++i) {
        only.push_back(std::atoi(argv[i]));
    }
    int failed = 0;
    for (const auto &c : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) {
            continue;
        }
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception &e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += o.passed ? 0 : 1;
        std::printf("criterion %2d %s: %s (%s)\n", c.id, o.passed ? "PASS" : "FAIL", c.name, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
