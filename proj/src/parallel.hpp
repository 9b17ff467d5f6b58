#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace grouprank::detail {

/// Runs fn(i) for i in [0, n) on at most `max_in_flight` threads. After the
/// first exception no new items start; that exception is rethrown once every
/// worker has joined. Returns the indices that completed without throwing.
template <typename Fn>
std::vector<bool> bounded_parallel_for(std::size_t n, std::size_t max_in_flight, Fn&& fn) {
    std::vector<bool> done(n, false);
    if (n == 0) return done;
    const std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, n);
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex mu;

    auto work = [&] {
        for (;;) {
            if (stop.load()) return;
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
                std::lock_guard lock(mu);
                done[i] = true;
            } catch (...) {
                std::lock_guard lock(mu);
                if (!first_error) first_error = std::current_exception();
                stop.store(true);
            }
        }
    };

    if (workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    }
    if (first_error) std::rethrow_exception(first_error);
    return done;
}

}  // namespace grouprank::detail
