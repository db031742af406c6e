#pragma once

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "tisc/common.hpp"

namespace tisc {

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned h = std::thread::hardware_concurrency();
    return h != 0 ? h : 1;
}

// Runs fn(block_index, begin, end, worker) over [0, count) split into blocks
// of block_size. Blocks are a fixed function of count, never of the worker
// pool, so callers can reduce per-block results in block order and obtain
// results independent of the thread count.
template <class Fn>
inline void parallel_blocks(std::size_t count, std::size_t block_size, unsigned threads,
                            Fn&& fn) {
    if (count == 0) return;
    if (block_size == 0) block_size = 1;
    const std::size_t n_blocks = (count + block_size - 1) / block_size;
    const unsigned workers =
        std::min<std::size_t>(resolve_threads(threads), n_blocks) > 1
            ? unsigned(std::min<std::size_t>(resolve_threads(threads), n_blocks))
            : 1;

    if (workers == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b) {
            fn(b, b * block_size, std::min(count, (b + 1) * block_size), 0u);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto body = [&](unsigned worker) {
        try {
            for (;;) {
                const std::size_t b = next.fetch_add(1);
                if (b >= n_blocks) break;
                fn(b, b * block_size, std::min(count, (b + 1) * block_size), worker);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lock(err_mutex);
            if (!first_error) first_error = std::current_exception();
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(body, w);
    body(0);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

inline std::size_t block_count(std::size_t count, std::size_t block_size) {
    return count == 0 ? 0 : (count + block_size - 1) / block_size;
}

}  // namespace tisc
