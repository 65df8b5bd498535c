// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <splatdepth/error.hpp>
#include <splatdepth/synthetic.hpp>
#include <splatdepth/types.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <optional>
#include <random>
#include <string>

namespace splatdepth::test {

inline double
relErr(double a, double b) {
    const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
    return std::abs(a - b) / scale;
}

inline double
uniform(synth::Rng &rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

/// Fresh empty directory under the system temp dir, unique per test.
inline std::filesystem::path
scratchDir() {
    const auto *info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = std::filesystem::temp_directory_path() / "splatdepth_tests" /
               (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

/// Camera at the world origin looking down +z.
inline Camera
axisCamera(int width, int height, double focal) {
    Camera c;
    c.fx = c.fy = focal;
    c.cx       = 0.5 * width;
    c.cy       = 0.5 * height;
    c.width    = width;
    c.height   = height;
    return c;
}

/// Runs `fn` and returns the kind of the splatdepth::Error it throws.
template <typename Fn>
std::optional<ErrorKind>
thrownKind(Fn &&fn) {
    try {
        fn();
    } catch (const Error &e) {
        return e.kind();
    }
    return std::nullopt;
}

} // namespace splatdepth::test
