// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/synthetic.hpp"

#include "splatdepth/error.hpp"
#include "splatdepth/rasterizer.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace splatdepth::synth {

namespace {

// Degree-0 SH basis constant of the 3DGS convention.
constexpr double kSh0 = 0.28209479177387814;

double
uniform(Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3
fibonacciDirection(int i, int count) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    const double y      = 1.0 - 2.0 * (i + 0.5) / count;
    const double r      = std::sqrt(std::max(0.0, 1.0 - y * y));
    const double phi    = golden * i;
    return {r * std::cos(phi), y, r * std::sin(phi)};
}

Vec3
upFor(const Vec3 &forward) {
    return std::abs(forward.normalized().dot(Vec3::UnitY())) > 0.95 ? Vec3::UnitX() : Vec3::UnitY();
}

} // namespace

Vec3
dcForColor(const Vec3 &rgb) {
    return (rgb - Vec3::Constant(0.5)) / kSh0;
}

Quat
randomRotation(Rng &rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec4                             q(n(rng), n(rng), n(rng), n(rng));
    while (q.norm() < 1e-6) {
        q = Vec4(n(rng), n(rng), n(rng), n(rng));
    }
    q.normalize();
    return Quat(q[0], q[1], q[2], q[3]);
}

Camera
randomCamera(Rng &rng, int width, int height) {
    const Vec3   dir    = Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    const Vec3   unit   = dir.norm() > 1e-3 ? dir.normalized() : Vec3(0, 0, -1);
    const double dist   = uniform(rng, 2.0, 4.0);
    const Vec3   target = Vec3(uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2), uniform(rng, -0.2, 0.2));
    const Vec3   eye    = target + dist * unit;
    Camera       cam    = Camera::lookAt(eye, target, upFor(target - eye), width, height, width);
    cam.cx += uniform(rng, -0.05, 0.05) * width;
    cam.cy += uniform(rng, -0.05, 0.05) * height;
    return cam;
}

Gaussian3D
randomSplat(Rng &rng, const Camera &camera, double minScale, double maxScale, double maxOffAxisDeg) {
    const double maxAngle = maxOffAxisDeg * std::numbers::pi / 180.0;
    const double theta    = std::acos(uniform(rng, std::cos(maxAngle), 1.0));
    const double phi      = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec3   dirCam(std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta));
    const double depth = uniform(rng, 1.5, 4.0);
    const Vec3   cam   = dirCam / dirCam.z() * depth;

    Gaussian3D g;
    g.center   = camera.rotation.transpose() * (cam - camera.translation);
    g.rotation = randomRotation(rng);
    const double base = std::exp(uniform(rng, std::log(minScale), std::log(maxScale)));
    for (int a = 0; a < 3; ++a) {
        g.scales[a] = std::clamp(base * std::exp(uniform(rng, -1.1, 1.1)), base / 3.2, base * 3.2);
    }
    g.opacity    = uniform(rng, 0.2, 0.95);
    g.color.dc() = dcForColor(Vec3(uniform(rng, 0, 1), uniform(rng, 0, 1), uniform(rng, 0, 1)));
    return g;
}

std::vector<Gaussian3D>
randomScene(Rng &rng, const Camera &camera, int count, double minScale, double maxScale) {
    std::vector<Gaussian3D> scene;
    scene.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        scene.push_back(randomSplat(rng, camera, minScale, maxScale));
    }
    return scene;
}

Gaussian3D
flatSplat(const Vec3 &center, const Vec3 &normal, double radius, double flatness, double opacity,
          const Vec3 &rgb) {
    Gaussian3D g;
    g.center     = center;
    g.rotation   = Quat::FromTwoVectors(Vec3::UnitZ(), normal.normalized());
    g.scales     = Vec3(radius, radius, radius * flatness);
    g.opacity    = opacity;
    g.color.dc() = dcForColor(rgb);
    return g;
}

std::vector<Gaussian3D>
sphereOfSplats(int count, double radius) {
    std::vector<Gaussian3D> scene;
    scene.reserve(static_cast<std::size_t>(count));
    // In-plane sigma about the lattice spacing so neighbours overlap.
    const double spacing = radius * std::sqrt(4.0 * std::numbers::pi / count);
    for (int i = 0; i < count; ++i) {
        const Vec3 n   = fibonacciDirection(i, count);
        const Vec3 rgb = 0.5 * (n + Vec3::Ones());
        scene.push_back(flatSplat(radius * n, n, 0.7 * spacing, 1e-3, 0.95, rgb));
    }
    return scene;
}

std::vector<Camera>
orbitCameras(int count, double radius, int width, int height, double focal) {
    std::vector<Camera> cams;
    for (int i = 0; i < count; ++i) {
        const Vec3 eye = radius * fibonacciDirection(i, count);
        cams.push_back(Camera::lookAt(eye, Vec3::Zero(), upFor(-eye), width, height, focal));
    }
    return cams;
}

Image
planeDepth(const Camera &camera) {
    Image      depth(camera.width, camera.height, 1);
    const Mat3 rt = camera.rotation.transpose();
    const Vec3 o  = camera.center();
    for (int y = 0; y < camera.height; ++y) {
        for (int x = 0; x < camera.width; ++x) {
            const Vec3   dirCam = camera.backproject(x + 0.5, y + 0.5, 1.0); // z = 1
            const Vec3   dir    = rt * dirCam;
            if (std::abs(dir.z()) < 1e-12) {
                continue;
            }
            const double s = -o.z() / dir.z();
            if (s > 0.0) {
                depth.at(x, y) = s; // z-depth since dirCam.z == 1
            }
        }
    }
    return depth;
}

PlaneFixture
texturedPlane(int size, double tiltDeg) {
    PlaneFixture fx;
    // Colors chosen to give the 4x4 grid a visible texture.
    const double spacing = 0.55;
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            const Vec3 c((i - 1.5) * spacing, (j - 1.5) * spacing, 0.0);
            const Vec3 rgb(0.15 + 0.23 * i, 0.15 + 0.23 * j, 0.85 - 0.11 * (i + j));
            fx.generator.push_back(flatSplat(c, Vec3::UnitZ(), 0.42, 1e-2, 0.97, rgb));
        }
    }
    const double focal = 1.1 * size;
    auto         view  = [&](double azimuthDeg, double elevationDeg) {
        const double az = azimuthDeg * std::numbers::pi / 180.0;
        const double el = elevationDeg * std::numbers::pi / 180.0;
        const Vec3   eye(2.6 * std::sin(el) * std::cos(az), 2.6 * std::sin(el) * std::sin(az),
                         2.6 * std::cos(el));
        TrainingView v;
        v.camera = Camera::lookAt(eye, Vec3::Zero(), Vec3(0, 1, 0), size, size, focal);
        v.target = render(fx.generator, v.camera).color;
        v.depth  = planeDepth(v.camera);
        return v;
    };
    for (double az : {0.0, 90.0, 180.0, 270.0}) {
        fx.train.push_back(view(az, tiltDeg));
    }
    fx.heldOut = view(45.0, 0.6 * tiltDeg);
    return fx;
}

Vec3
convergencePoint(std::span<const Camera> cameras) {
    if (cameras.empty()) {
        raise(ErrorKind::InvalidArgument, "convergencePoint needs at least one camera");
    }
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (const auto &c : cameras) {
        const Vec3 d = c.rotation.row(2).transpose();
        const Mat3 p = Mat3::Identity() - d * d.transpose();
        a += p;
        b += p * c.center();
    }
    if (cameras.size() == 1 || std::abs(a.determinant()) < 1e-9) {
        // Parallel axes: a point 2.5 units in front of the first camera.
        const Camera &c = cameras.front();
        return c.center() + 2.5 * c.rotation.row(2).transpose();
    }
    return a.ldlt().solve(b);
}

std::vector<Gaussian3D>
planeInit(Rng &rng, std::span<const Camera> cameras, int count) {
    const Vec3 target = convergencePoint(cameras);
    Vec3       normal = Vec3::Zero();
    for (const auto &c : cameras) {
        normal -= c.rotation.row(2).transpose();
    }
    normal = normal.norm() > 1e-9 ? normal.normalized() : Vec3(0, 0, 1);
    const Camera &first    = cameras.front();
    const double  distance = (first.center() - target).norm();
    const double  half     = 0.5 * distance * first.width / first.fx;

    const Vec3 e1 = normal.unitOrthogonal();
    const Vec3 e2 = normal.cross(e1);
    const int  side = std::max(1, static_cast<int>(std::ceil(std::sqrt(count))));
    const double step = 2.0 * half / side;

    std::vector<Gaussian3D> scene;
    for (int k = 0; k < count; ++k) {
        const int    i  = k % side, j = k / side;
        const double a  = -half + (i + 0.5) * step + uniform(rng, -0.1, 0.1) * step;
        const double b  = -half + (j + 0.5) * step + uniform(rng, -0.1, 0.1) * step;
        const Vec3   c  = target + a * e1 + b * e2 + uniform(rng, -0.05, 0.05) * step * normal;
        scene.push_back(flatSplat(c, normal, 0.6 * step, 0.1, 0.5, Vec3::Constant(0.5)));
    }
    return scene;
}

std::vector<Gaussian3D>
randomInit(Rng &rng, std::span<const Camera> cameras, int count) {
    const Vec3    target   = convergencePoint(cameras);
    const Camera &first    = cameras.front();
    const double  distance = (first.center() - target).norm();
    const double  half     = 0.5 * distance * first.width / first.fx;
    std::vector<Gaussian3D> scene;
    for (int k = 0; k < count; ++k) {
        Gaussian3D g;
        g.center   = target + half * Vec3(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
        g.rotation = randomRotation(rng);
        g.scales   = Vec3::Constant(half / std::max(2.0, std::sqrt(count)));
        g.opacity  = 0.5;
        g.color.dc() = dcForColor(Vec3::Constant(0.5));
        scene.push_back(g);
    }
    return scene;
}

} // namespace splatdepth::synth
