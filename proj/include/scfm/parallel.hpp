#pragma once

#include <algorithm>
#include <cstdlib>
#include <cstddef>
#include <thread>
#include <vector>

namespace scfm {

// Worker cap: SCFM_THREADS if set, otherwise machine parallelism.
inline std::size_t worker_count() {
    static const std::size_t cached = [] {
        if (const char* env = std::getenv("SCFM_THREADS")) {
            long v = std::strtol(env, nullptr, 10);
            if (v >= 1)
                return static_cast<std::size_t>(v);
        }
        unsigned hw = std::thread::hardware_concurrency();
        return static_cast<std::size_t>(hw == 0 ? 1 : hw);
    }();
    return cached;
}

// Runs fn(begin, end) over a fixed partition of [0, n). The partition depends
// only on n, never on the worker count, and each range is disjoint, so any
// output written per-index is bit-identical however many threads run.
template <typename Fn>
void parallel_ranges(std::size_t n, Fn&& fn) {
    const std::size_t workers = std::min(worker_count(), n == 0 ? std::size_t{1} : n);
    if (workers <= 1 || n < 2048) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = std::min(n, w * chunk);
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e)
            break;
        pool.emplace_back([&fn, b, e] { fn(b, e); });
    }
    for (auto& t : pool)
        t.join();
}

// Deterministic parallel reduction: work is cut into fixed-size chunks whose
// boundaries depend only on n, partials are computed per chunk (possibly on
// different threads) and combined sequentially in chunk-index order. The
// result is therefore independent of the worker count.
template <typename Partial, typename ChunkFn, typename CombineFn>
Partial chunked_reduce(std::size_t n, std::size_t chunk_size, Partial init,
                       ChunkFn&& chunk_fn, CombineFn&& combine) {
    if (n == 0)
        return init;
    const std::size_t n_chunks = (n + chunk_size - 1) / chunk_size;
    std::vector<Partial> partials(n_chunks);
    parallel_ranges(n_chunks, [&](std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
            const std::size_t b = c * chunk_size;
            const std::size_t e = std::min(n, b + chunk_size);
            partials[c] = chunk_fn(c, b, e);
        }
    });
    Partial acc = std::move(init);
    for (std::size_t c = 0; c < n_chunks; ++c)
        acc = combine(std::move(acc), std::move(partials[c]));
    return acc;
}

} // namespace scfm
