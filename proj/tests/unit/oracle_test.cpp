// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "unit/support.hpp"

#include <splatdepth/gaussian.hpp>
#include <splatdepth/oracle.hpp>

#include <algorithm>

namespace splatdepth {
namespace {

using test::relErr;
using test::uniform;
namespace orc = oracle;

double
median(std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
    return v[v.size() / 2];
}

TEST(IntersectPerspective, IsotropicIsPerpendicularFoot) {
    synth::Rng rng(31);
    for (int i = 0; i < 100; ++i) {
        Gaussian3D g;
        g.center   = Vec3::Random() * 3;
        g.rotation = synth::randomRotation(rng);
        g.scales   = Vec3::Constant(uniform(rng, 0.1, 2));
        orc::Ray ray{Vec3::Random(), (synth::randomRotation(rng) * Vec3::UnitZ())};
        EXPECT_LE(relErr(orc::intersectPerspective(g, ray), ray.direction.dot(g.center - ray.origin)),
                  1e-12);
    }
}

TEST(IntersectPerspective, RayThroughCenterPeaksAtCenter) {
    synth::Rng rng(32);
    for (int i = 0; i < 100; ++i) {
        Gaussian3D g;
        g.center   = Vec3::Random() * 3 + Vec3(0, 0, 5);
        g.rotation = synth::randomRotation(rng);
        g.scales   = Vec3(0.1, 0.5, 1.2);
        orc::Ray     ray{Vec3::Zero(), g.center.normalized()};
        const double t = orc::intersectPerspective(g, ray);
        EXPECT_LE(relErr(t, g.center.norm()), 1e-12);
        EXPECT_NEAR(orc::gaussianAlongRay(g, ray, t), 1.0, 1e-12);
    }
}

TEST(IntersectPerspective, AgreesWithSamplingMaximizer) {
    synth::Rng rng(33);
    for (int i = 0; i < 40; ++i) {
        const Camera     cam  = synth::randomCamera(rng, 64, 64);
        const Gaussian3D g    = synth::randomSplat(rng, cam);
        const auto       proj = projectSplat(cam, g);
        const auto       px   = orc::footprintPixels(proj, cam);
        ASSERT_FALSE(px.empty());
        const Vec2     pixel = px[rng() % px.size()];
        const orc::Ray ray   = orc::worldRay(cam, pixel);
        const double   t     = orc::intersectPerspective(g, ray);
        const auto [lo, hi]  = orc::samplingWindow(proj.tc, g.scales.maxCoeff());
        const auto s = orc::maximizeBySampling([&](double x) { return orc::gaussianAlongRay(g, ray, x); },
                                               lo, hi);
        EXPECT_LE(relErr(s.t, t), 1e-6);
        EXPECT_GE(orc::gaussianAlongRay(g, ray, t), s.gridBestVal - 1e-15);
    }
}

TEST(IntersectPerspective, SingularCovarianceIsAnError) {
    Gaussian3D g;
    g.scales = Vec3(1, 0, 1);
    EXPECT_EQ(test::thrownKind([&] { orc::intersectPerspective(g, orc::Ray{}); }),
              ErrorKind::DegenerateCovariance);
}

TEST(IntersectRaySpace, CenterPixelGivesCenterDistance) {
    synth::Rng rng(34);
    for (int i = 0; i < 200; ++i) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam));
        EXPECT_LE(relErr(orc::intersectRaySpace(proj, proj.uvCenter), proj.tc), 1e-13);
    }
}

TEST(IntersectRaySpace, ScaledByCosineEqualsRasterDepth) {
    synth::Rng rng(35);
    for (int i = 0; i < 200; ++i) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam));
        for (const Vec2 &px : orc::footprintPixels(proj, cam)) {
            const double t = orc::intersectRaySpace(proj, px);
            EXPECT_LE(relErr(proj.zc / proj.tc * t, depthAt(proj, px)), 1e-12);
        }
    }
}

TEST(IntersectRaySpace, AgreesWithRaySpaceSampling) {
    synth::Rng rng(36);
    for (int i = 0; i < 40; ++i) {
        const Camera     cam  = synth::randomCamera(rng, 64, 64);
        const Gaussian3D g    = synth::randomSplat(rng, cam);
        const auto       proj = projectSplat(cam, g);
        const auto       px   = orc::footprintPixels(proj, cam);
        const Vec2       pixel = px[rng() % px.size()];
        const auto [lo, hi]    = orc::samplingWindow(proj.tc, g.scales.maxCoeff());
        const auto s           = orc::maximizeBySampling(
            [&](double t) { return orc::rayspaceGaussianAlongRay(proj, pixel, t); }, lo, hi);
        EXPECT_LE(relErr(s.t, orc::intersectRaySpace(proj, pixel)), 1e-6);
        EXPECT_LE(s.gridMaxGap, 1e-12);
    }
}

TEST(PlanarityResidual, ZeroAtCenterAndTinyInsideFootprint) {
    synth::Rng rng(37);
    for (int i = 0; i < 200; ++i) {
        const Camera cam  = synth::randomCamera(rng, 64, 64);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam));
        const Vec2   center[] = {proj.uvCenter};
        EXPECT_LE(orc::planarityResidual(proj, center), 1e-12 * proj.tc);
        EXPECT_LE(orc::planarityResidual(proj, orc::footprintPixels(proj, cam)), 1e-9 * proj.tc);
    }
}

TEST(PlanarityResidual, OffsetAlongTRaisesResidualByOffset) {
    synth::Rng   rng(38);
    const Camera cam  = synth::randomCamera(rng, 64, 64);
    const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam));
    const Vec2   px   = orc::footprintPixels(proj, cam).front();
    const double t    = orc::intersectRaySpace(proj, px);
    for (double delta : {1e-3, 0.1, -0.25}) {
        const Vec3 u(px.x(), px.y(), t + delta);
        EXPECT_NEAR(proj.qHat().dot(u - proj.uCenter()), delta, 1e-9);
    }
}

TEST(AffineGap, ZeroAtCenterOfOnAxisIsotropicSplat) {
    const Camera cam = test::axisCamera(64, 64, 64);
    Gaussian3D   g;
    g.center = Vec3(0, 0, 3);
    g.scales = Vec3::Constant(0.2);
    const Vec2 px[] = {Vec2(32, 32)};
    EXPECT_LT(orc::affineVsPerspectiveGap(g, cam, px)[0], 1e-15);
}

TEST(AffineGap, VanishesAsTheSplatShrinks) {
    synth::Rng   rng(39);
    const Camera cam = synth::randomCamera(rng, 64, 64);
    Gaussian3D   g   = synth::randomSplat(rng, cam, 0.1, 0.3);
    const auto   pixels = orc::footprintPixels(projectSplat(cam, g), cam);
    // Fixed pixel offsets in units of the footprint, so the comparison
    // follows the splat as it shrinks.
    const Vec2 c0 = projectSplat(cam, g).uvCenter;
    std::vector<Vec2> offsets;
    for (const Vec2 &p : pixels) {
        offsets.push_back(p - c0);
    }
    double previous = 1e300, first = 0.0;
    for (int step = 0; step < 6; ++step) {
        const auto        proj = projectSplat(cam, g);
        std::vector<Vec2> px;
        const double      shrink = std::pow(0.5, step);
        for (const Vec2 &o : offsets) {
            px.push_back(proj.uvCenter + shrink * o);
        }
        const double gap = median(orc::affineVsPerspectiveGap(g, cam, px));
        EXPECT_LT(gap, previous);
        if (step == 0) {
            first = gap;
        }
        previous = gap;
        g.scales *= 0.5;
    }
    EXPECT_LT(previous, 0.1 * first);
}

TEST(SamplingMaximizer, FindsKnownPeak) {
    const auto s = orc::maximizeBySampling([](double t) { return std::exp(-4.0 * (t - 1.2345) * (t - 1.2345)); },
                                           0.0, 3.0, 1001);
    EXPECT_NEAR(s.t, 1.2345, 1e-7);
    EXPECT_LE(s.gridMaxGap, 0.0);
    EXPECT_NEAR(s.gridBestT, 1.2345, 3.0 / 1000);
}

TEST(SamplingWindow, ClampsAtZero) {
    const auto [lo, hi] = orc::samplingWindow(2.0, 0.5);
    EXPECT_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 11.0);
    const auto [lo2, hi2] = orc::samplingWindow(20.0, 0.1);
    EXPECT_DOUBLE_EQ(lo2, 18.2);
    EXPECT_DOUBLE_EQ(hi2, 21.8);
}

TEST(FootprintPixels, InsideImageAndEllipse) {
    synth::Rng rng(40);
    for (int i = 0; i < 50; ++i) {
        const Camera cam  = synth::randomCamera(rng, 40, 30);
        const auto   proj = projectSplat(cam, synth::randomSplat(rng, cam));
        const auto   px   = orc::footprintPixels(proj, cam);
        std::size_t  brute = 0;
        for (int y = 0; y < cam.height; ++y) {
            for (int x = 0; x < cam.width; ++x) {
                brute += screenMahalanobis(proj, Vec2(x + 0.5, y + 0.5)) <= 9.0 ? 1 : 0;
            }
        }
        EXPECT_EQ(px.size(), brute);
    }
}

TEST(Rays, WorldRayMatchesCameraRay) {
    synth::Rng   rng(41);
    const Camera cam = synth::randomCamera(rng, 32, 32);
    const auto   w   = orc::worldRay(cam, Vec2(3.5, 20.5));
    const auto   c   = orc::cameraRay(cam, Vec2(3.5, 20.5));
    EXPECT_NEAR(w.direction.norm(), 1.0, 1e-12);
    EXPECT_TRUE(w.origin.isApprox(cam.center(), 1e-12));
    EXPECT_TRUE((cam.rotation * w.direction).isApprox(c.direction, 1e-12));
    const Vec2 back = cam.project(cam.toCamera(w.origin + 2.0 * w.direction));
    EXPECT_TRUE(back.isApprox(Vec2(3.5, 20.5), 1e-10));
}

} // namespace
} // namespace splatdepth
