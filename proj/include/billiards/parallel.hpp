#pragma once

#include <atomic>
#include <cstddef>
#include <thread>
#include <vector>

namespace billiards {

inline unsigned default_workers() {
    unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1u : n;
}

/// Runs fn(i) for i in [0, count). Tasks must be independent; results should
/// be written to preallocated slots indexed by i so the outcome does not
/// depend on scheduling.
template <class Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    if (count == 0) return;
    if (workers <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= count) return;
            fn(i);
        }
    };
    std::vector<std::thread> pool;
    unsigned n = workers < count ? workers : static_cast<unsigned>(count);
    pool.reserve(n - 1);
    for (unsigned t = 0; t + 1 < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
}

} // namespace billiards
