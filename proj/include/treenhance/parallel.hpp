#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace trenh {

/// Runs fn(i) for i in [0, n) on up to `workers` threads. Work is assigned
/// statically (worker k takes i = k, k + workers, ...) so results written to
/// per-index slots do not depend on scheduling. The first exception thrown
/// is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    workers = std::min(workers, n);
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t k = 0; k < workers; ++k) {
        pool.emplace_back([&, k] {
            for (std::size_t i = k; i < n; i += workers) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    }
    pool.clear();
    if (error) std::rethrow_exception(error);
}

}  // namespace trenh
