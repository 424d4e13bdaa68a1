#pragma once

// Chunked parallel map-reduce whose result is independent of the thread
// count: work is split into fixed chunks, each chunk owns its RNG substream,
// and partial results are combined in chunk order.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace mlsa {

inline int effective_threads(int requested) {
    if (requested > 0) return requested;
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(chunk_index, begin, end) over [0, total) split into num_chunks
// ranges. Bodies must only touch their own chunk's state.
inline void parallel_chunks(std::int64_t total, int num_chunks, int threads,
                            const std::function<void(int, std::int64_t, std::int64_t)>& body) {
    if (total <= 0 || num_chunks <= 0) return;
    num_chunks = static_cast<int>(std::min<std::int64_t>(num_chunks, total));
    std::vector<std::pair<std::int64_t, std::int64_t>> ranges(num_chunks);
    std::int64_t base = total / num_chunks, rem = total % num_chunks, at = 0;
    for (int c = 0; c < num_chunks; ++c) {
        std::int64_t len = base + (c < rem ? 1 : 0);
        ranges[c] = {at, at + len};
        at += len;
    }
    threads = std::min(effective_threads(threads), num_chunks);
    if (threads <= 1) {
        for (int c = 0; c < num_chunks; ++c) body(c, ranges[c].first, ranges[c].second);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (int c = t; c < num_chunks; c += threads) body(c, ranges[c].first, ranges[c].second);
        });
    }
    for (auto& th : pool) th.join();
}

}  // namespace mlsa
