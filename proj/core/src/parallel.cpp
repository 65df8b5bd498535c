// Copyright Contributors to the splatdepth project
// SPDX-License-Identifier: Apache-2.0
//
#include "splatdepth/parallel.hpp"

#include <omp.h>

#include <atomic>
#include <exception>
#include <mutex>

namespace splatdepth {

namespace {
std::atomic<int> gThreads{0};
}

void
setThreadCount(int threads) {
    gThreads.store(threads < 0 ? 0 : threads);
}

int
threadCount() {
    const int t = gThreads.load();
    return t > 0 ? t : omp_get_num_procs();
}

void
parallelFor(std::size_t count, const std::function<void(std::size_t)> &body) {
    const int threads = threadCount();
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) {
            body(i);
        }
        return;
    }
    std::exception_ptr failure;
    std::mutex         failureMutex;
    const auto         n = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long long i = 0; i < n; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(failureMutex);
            if (!failure) {
                failure = std::current_exception();
            }
        }
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace splatdepth
