#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace vchat {

/// Runs fn(i) for i in [0, count) on at most `bound` threads. The first
/// exception thrown by any task is rethrown after all workers stop; tasks not
/// yet started are skipped once a failure is seen.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t bound, Fn&& fn) {
    if (count == 0) return;
    bound = std::clamp<std::size_t>(bound, 1, count);
    if (bound == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= count || failed.load()) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                failed = true;
            }
        }
    };

    std::vector<std::jthread> threads;
    threads.reserve(bound);
    for (std::size_t t = 0; t < bound; ++t) threads.emplace_back(worker);
    threads.clear();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace vchat
