// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/gaussian.hpp"

#include "splatdepth/detail/projection_impl.hpp"
#include "splatdepth/error.hpp"

#include <cmath>
#include <sstream>

namespace splatdepth {

int
ShCoefficients::degree() const {
    switch (coeffs.size()) {
    case 1: return 0;
    case 4: return 1;
    case 9: return 2;
    case 16: return 3;
    default: break;
    }
    throw FormatError("unsupported spherical-harmonics block of " +
                      std::to_string(coeffs.size()) + " coefficients");
}

ShCoefficients
ShCoefficients::withDegree(int degree) {
    if (degree < 0 || degree > 3) {
        throw FormatError("spherical-harmonics degree must be in [0, 3]");
    }
    ShCoefficients sh;
    sh.coeffs.assign(static_cast<std::size_t>((degree + 1) * (degree + 1)), Vec3::Zero());
    return sh;
}

Mat3
covarianceFrom(const Quat &rotation, const Vec3 &scales) {
    if (!(scales.array() > 0.0).all()) {
        raise(ErrorKind::InvalidPrimitive, "covariance requires strictly positive scales");
    }
    const Mat3 r = detail::rotationMatrix<double>(rotation.w(), rotation.x(), rotation.y(),
                                                  rotation.z());
    return detail::covariance<double>(r, scales);
}

double
evalGaussian(const Gaussian3D &g, const Vec3 &x) {
    if (!(g.scales.array() > kMinScale).all()) {
        raise(ErrorKind::DegenerateCovariance, "gaussian scale below the singularity threshold");
    }
    // Sigma^-1 = R S^-2 R^T, so the exponent is |S^-1 R^T (x - c)|^2.
    const Mat3 r = detail::rotationMatrix<double>(g.rotation.w(), g.rotation.x(), g.rotation.y(),
                                                  g.rotation.z());
    const Vec3 local = (r.transpose() * (x - g.center)).cwiseQuotient(g.scales);
    return std::exp(-local.squaredNorm());
}

Vec3
evalSh(const ShCoefficients &color, const Vec3 &viewDir) {
    return detail::evalSh<double>(color.dc(), color.coeffs, color.degree(), viewDir);
}

void
validateGaussian(const Gaussian3D &g) {
    std::ostringstream why;
    if (!g.center.allFinite()) {
        why << "non-finite center";
    } else if (std::abs(g.rotation.norm() - 1.0) > 1e-6) {
        why << "rotation quaternion norm " << g.rotation.norm() << " is not 1";
    } else if (!(g.scales.array() > 0.0).all() || !g.scales.allFinite()) {
        why << "scales must be finite and strictly positive";
    } else if (!(g.opacity > 0.0 && g.opacity < 1.0)) {
        why << "opacity " << g.opacity << " outside (0, 1)";
    } else {
        (void)g.color.degree();
        return;
    }
    raise(ErrorKind::InvalidPrimitive, why.str());
}

} // namespace splatdepth
