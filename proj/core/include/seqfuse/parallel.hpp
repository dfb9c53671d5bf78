#pragma once

#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace seqfuse {

/// Runs job(0..count-1) over a fixed worker count with strided assignment.
/// Jobs must write only to their own output slots; results are then identical
/// at any worker count. The first exception thrown by a job is rethrown on
/// the calling thread after all workers drain.
inline void for_each_index(std::size_t count, int num_workers,
                           const std::function<void(std::size_t)>& job) {
    if (num_workers <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    const auto workers = static_cast<std::size_t>(num_workers);
    std::mutex mutex;
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < count; i += workers) {
                    if (failed.load(std::memory_order_relaxed)) return;
                    job(i);
                }
            } catch (...) {
                const std::scoped_lock lock(mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        });
    }
    for (auto& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace seqfuse
