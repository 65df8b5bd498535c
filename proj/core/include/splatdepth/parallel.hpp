// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstddef>
#include <functional>

namespace splatdepth {

/// Worker count used by every parallel loop in the library. Zero selects the
/// hardware concurrency. Results never depend on this value.
void setThreadCount(int threads);
int  threadCount();

/// Runs body(i) for i in [0, count), dynamically scheduled. Each index must
/// write only to state it owns.
void parallelFor(std::size_t count, const std::function<void(std::size_t)> &body);

} // namespace splatdepth
