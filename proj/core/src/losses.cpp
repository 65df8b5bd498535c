// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/losses.hpp"

#include "splatdepth/error.hpp"

#include <array>
#include <cmath>

namespace splatdepth {

namespace {

constexpr int    kWindow     = 11;
constexpr int    kHalfWindow = kWindow / 2;
constexpr double kSsimSigma  = 1.5;
constexpr double kC1         = 0.01 * 0.01;
constexpr double kC2         = 0.03 * 0.03;

std::array<double, kWindow>
gaussianTaps() {
    std::array<double, kWindow> taps{};
    double                      sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kHalfWindow;
        taps[i]        = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
        sum += taps[i];
    }
    for (double &t : taps) {
        t /= sum;
    }
    return taps;
}

/// Separable zero-padded "same" convolution of a single-channel plane.
std::vector<double>
blur(const std::vector<double> &plane, int width, int height) {
    static const auto   taps = gaussianTaps();
    std::vector<double> tmp(plane.size(), 0.0), out(plane.size(), 0.0);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -kHalfWindow; k <= kHalfWindow; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < width) {
                    acc += taps[k + kHalfWindow] * plane[static_cast<std::size_t>(y) * width + xx];
                }
            }
            tmp[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            double acc = 0.0;
            for (int k = -kHalfWindow; k <= kHalfWindow; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < height) {
                    acc += taps[k + kHalfWindow] * tmp[static_cast<std::size_t>(yy) * width + x];
                }
            }
            out[static_cast<std::size_t>(y) * width + x] = acc;
        }
    }
    return out;
}

std::vector<double>
channelPlane(const Image &img, int c) {
    std::vector<double> plane(img.pixelCount());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            plane[static_cast<std::size_t>(y) * img.width() + x] = img.at(x, y, c);
        }
    }
    return plane;
}

struct SsimStats {
    std::vector<double> muA, muB, aa, bb, ab; // blurred moments
};

SsimStats
ssimStats(const std::vector<double> &a, const std::vector<double> &b, int width, int height) {
    std::vector<double> a2(a.size()), b2(a.size()), ab(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a2[i] = a[i] * a[i];
        b2[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    return {blur(a, width, height), blur(b, width, height), blur(a2, width, height),
            blur(b2, width, height), blur(ab, width, height)};
}

void
requireSameShape(const Image &a, const Image &b, const char *what) {
    if (!a.sameShape(b) || a.empty()) {
        raise(ErrorKind::InvalidArgument, std::string(what) + ": image shapes differ or are empty");
    }
}

} // namespace

void
LossWeights::validate() const {
    if (!(depthWeight >= 0.0 && normalWeight >= 0.0 && ssimLambda >= 0.0 && ssimLambda <= 1.0)) {
        raise(ErrorKind::InvalidArgument, "loss weights must be non-negative and ssim lambda <= 1");
    }
}

double
depthDistortion(std::span<const PixelBlendRecord> records) {
    // The sum is invariant to a common depth shift; measuring depths from the
    // first record keeps A*D2 - D^2 from cancelling when depths are far from 0.
    if (records.empty()) {
        return 0.0;
    }
    const double origin = records.front().depth;
    double       a = 0.0, d = 0.0, d2 = 0.0;
    for (const auto &r : records) {
        const double z = r.depth - origin;
        a += r.weight;
        d += r.weight * z;
        d2 += r.weight * z * z;
    }
    return 2.0 * (a * d2 - d * d);
}

double
normalConsistency(std::span<const PixelBlendRecord> records, const Vec3 &target) {
    double sum = 0.0;
    for (const auto &r : records) {
        sum += r.weight * (1.0 - r.normal.dot(target));
    }
    return sum;
}

Image
normalFromDepth(const Image &depth, const Camera &camera) {
    if (depth.channels() != 1) {
        raise(ErrorKind::InvalidArgument, "normalFromDepth expects a single-channel depth map");
    }
    const int w = depth.width(), h = depth.height();
    Image     out(w, h, 3);
    for (int y = 0; y + 1 < h; ++y) {
        for (int x = 0; x + 1 < w; ++x) {
            const double d = depth.at(x, y), dr = depth.at(x + 1, y), dd = depth.at(x, y + 1);
            if (!(d > 0.0 && dr > 0.0 && dd > 0.0)) {
                continue;
            }
            const Vec3 p    = camera.backproject(x + 0.5, y + 0.5, d);
            const Vec3 pr   = camera.backproject(x + 1.5, y + 0.5, dr);
            const Vec3 pd   = camera.backproject(x + 0.5, y + 1.5, dd);
            Vec3       n    = (pr - p).cross(pd - p);
            const double len = n.norm();
            if (!(len > 0.0)) {
                continue;
            }
            n /= len;
            if (n.dot(p) > 0.0) {
                n = -n;
            }
            out.setVec3(x, y, n);
        }
    }
    return out;
}

double
ssim(const Image &a, const Image &b) {
    requireSameShape(a, b, "ssim");
    const int w = a.width(), h = a.height();
    double    sum = 0.0;
    for (int c = 0; c < a.channels(); ++c) {
        const auto s = ssimStats(channelPlane(a, c), channelPlane(b, c), w, h);
        for (std::size_t i = 0; i < s.muA.size(); ++i) {
            const double ma = s.muA[i], mb = s.muB[i];
            const double va = s.aa[i] - ma * ma, vb = s.bb[i] - mb * mb, cov = s.ab[i] - ma * mb;
            sum += ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                   ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        }
    }
    return sum / static_cast<double>(a.pixelCount() * a.channels());
}

Image
ssimGradient(const Image &a, const Image &b) {
    requireSameShape(a, b, "ssimGradient");
    const int    w = a.width(), h = a.height();
    const double scale = 1.0 / static_cast<double>(a.pixelCount() * a.channels());
    Image        grad(w, h, a.channels());
    for (int c = 0; c < a.channels(); ++c) {
        const auto          pa = channelPlane(a, c);
        const auto          pb = channelPlane(b, c);
        const auto          s  = ssimStats(pa, pb, w, h);
        std::vector<double> dMu(pa.size()), dAA(pa.size()), dAB(pa.size());
        for (std::size_t i = 0; i < pa.size(); ++i) {
            const double ma = s.muA[i], mb = s.muB[i];
            const double va = s.aa[i] - ma * ma, vb = s.bb[i] - mb * mb, cov = s.ab[i] - ma * mb;
            const double n1 = 2.0 * ma * mb + kC1, n2 = 2.0 * cov + kC2;
            const double d1 = ma * ma + mb * mb + kC1, d2 = va + vb + kC2;
            const double value = (n1 * n2) / (d1 * d2);
            // S(mu_a, E[a^2], E[ab]) with var_a = E[a^2] - mu_a^2, cov = E[ab] - mu_a mu_b.
            dMu[i] = scale * ((2.0 * mb * n2 - 2.0 * mb * n1) / (d1 * d2) -
                              value * (2.0 * ma / d1 - 2.0 * ma / d2));
            dAA[i] = scale * (-value / d2);
            dAB[i] = scale * (2.0 * n1 / (d1 * d2));
        }
        const auto bMu = blur(dMu, w, h);
        const auto bAA = blur(dAA, w, h);
        const auto bAB = blur(dAB, w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                grad.at(x, y, c)    = bMu[i] + 2.0 * pa[i] * bAA[i] + pb[i] * bAB[i];
            }
        }
    }
    return grad;
}

double
photometricLoss(const Image &rendered, const Image &target, double ssimLambda) {
    requireSameShape(rendered, target, "photometricLoss");
    double l1 = 0.0;
    for (std::size_t i = 0; i < rendered.data().size(); ++i) {
        l1 += std::abs(rendered.data()[i] - target.data()[i]);
    }
    l1 /= static_cast<double>(rendered.data().size());
    if (ssimLambda == 0.0) {
        return l1;
    }
    return (1.0 - ssimLambda) * l1 + ssimLambda * (1.0 - ssim(rendered, target));
}

Image
photometricLossGradient(const Image &rendered, const Image &target, double ssimLambda) {
    requireSameShape(rendered, target, "photometricLossGradient");
    Image        grad(rendered.width(), rendered.height(), rendered.channels());
    const double l1Scale = (1.0 - ssimLambda) / static_cast<double>(rendered.data().size());
    for (std::size_t i = 0; i < rendered.data().size(); ++i) {
        const double diff = rendered.data()[i] - target.data()[i];
        grad.data()[i]    = diff > 0.0 ? l1Scale : (diff < 0.0 ? -l1Scale : 0.0);
    }
    if (ssimLambda != 0.0) {
        const Image gs = ssimGradient(rendered, target);
        for (std::size_t i = 0; i < grad.data().size(); ++i) {
            grad.data()[i] -= ssimLambda * gs.data()[i];
        }
    }
    return grad;
}

Image
consistencyTargetNormals(const FrameBuffers &buffers, const Camera &camera) {
    return normalFromDepth(buffers.expectedDepth, camera);
}

LossBreakdown
totalLoss(const FrameBuffers &buffers, const Camera &camera, const Image &target,
          const LossWeights &weights) {
    return totalLoss(buffers, consistencyTargetNormals(buffers, camera), target, weights);
}

LossBreakdown
totalLoss(const FrameBuffers &buffers, const Image &normalTarget, const Image &target,
          const LossWeights &weights) {
    weights.validate();
    if (!buffers.hasRecords()) {
        raise(ErrorKind::State, "total loss requires buffers rendered with retainRecords");
    }
    LossBreakdown out;
    out.photometric = photometricLoss(buffers.color, target, weights.ssimLambda);
    double ld = 0.0, ln = 0.0;
    for (int y = 0; y < buffers.height; ++y) {
        for (int x = 0; x < buffers.width; ++x) {
            const auto &rec = buffers.records[buffers.pixelIndex(x, y)];
            ld += depthDistortion(rec);
            const Vec3 n = normalTarget.vec3(x, y);
            if (n.squaredNorm() > 0.0) {
                ln += normalConsistency(rec, n);
            }
        }
    }
    const double pixels     = static_cast<double>(buffers.width) * buffers.height;
    out.depthDistortion   = ld / pixels;
    out.normalConsistency = ln / pixels;
    out.total = out.photometric + weights.depthWeight * out.depthDistortion +
                weights.normalWeight * out.normalConsistency;
    return out;
}

} // namespace splatdepth
