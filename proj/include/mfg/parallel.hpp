#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace mfg {

/// Work is cut into chunks of this many particles regardless of the worker
/// count, so every chunk is computed identically for any `threads`.
inline constexpr std::ptrdiff_t kChunkSize = 1024;

inline std::ptrdiff_t chunk_count(std::ptrdiff_t n) { return (n + kChunkSize - 1) / kChunkSize; }

/// Calls fn(chunk, begin, end) for every chunk of [0, n). Chunks are
/// distributed round-robin over `threads` workers.
template <class Fn>
void parallel_chunks(std::ptrdiff_t n, int threads, Fn&& fn) {
    const std::ptrdiff_t chunks = chunk_count(n);
    auto work = [&](std::ptrdiff_t first, std::ptrdiff_t stride) {
        for (std::ptrdiff_t c = first; c < chunks; c += stride)
            fn(c, c * kChunkSize, std::min(n, (c + 1) * kChunkSize));
    };
    const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(std::max(threads, 1), chunks);
    if (workers <= 1) {
        work(0, 1);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers - 1));
    for (std::ptrdiff_t w = 1; w < workers; ++w) pool.emplace_back(work, w, workers);
    work(0, workers);
    for (auto& t : pool) t.join();
}

/// Pairwise tree reduction in index order; `parts` is consumed.
template <class T>
T pairwise_sum(std::vector<T> parts) {
    if (parts.empty()) return T{};
    while (parts.size() > 1) {
        std::vector<T> next;
        next.reserve((parts.size() + 1) / 2);
        for (size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(parts[i] + parts[i + 1]);
        if (parts.size() % 2 == 1) next.push_back(parts.back());
        parts = std::move(next);
    }
    return parts.front();
}

} // namespace mfg
