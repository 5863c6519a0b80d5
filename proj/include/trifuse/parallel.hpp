#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace trifuse {

/// Worker cap from TRIFUSE_THREADS, falling back to hardware concurrency.
inline std::size_t env_thread_cap() {
    if (const char* s = std::getenv("TRIFUSE_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(s, &end, 10);
        if (end != s && v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : hc;
}

/// Runs run_chunk(begin, end) over static contiguous chunks in index order.
/// Chunking depends only on (n, workers), so results written to per-index
/// slots are identical for any worker count.
inline void parallel_for(std::size_t n, std::size_t workers,
                         const std::function<void(std::size_t, std::size_t)>& run_chunk) {
    if (n == 0) return;
    workers = std::min(workers == 0 ? std::size_t{1} : workers, n);
    if (workers <= 1) {
        run_chunk(0, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t base = n / workers, rem = n % workers;
    std::size_t begin = 0;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t len = base + (w < rem ? 1 : 0);
        pool.emplace_back(run_chunk, begin, begin + len);
        begin += len;
    }
    for (auto& t : pool) t.join();
}

}  // namespace trifuse
