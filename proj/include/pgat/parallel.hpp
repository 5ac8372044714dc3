#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace pgat {

// Static partition of [0, n) into contiguous chunks, one per worker. Workers
// must write to disjoint outputs; callers reduce partials in worker order so
// results do not depend on scheduling.
inline void parallel_chunks(int n, int workers,
                            const std::function<void(int worker, int begin, int end)>& fn) {
    workers = std::max(1, std::min(workers, n));
    if (workers == 1) {
        fn(0, 0, n);
        return;
    }
    const int chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(workers);
    for (int w = 0; w < workers; ++w) {
        const int begin = w * chunk;
        const int end = std::min(n, begin + chunk);
        if (begin >= end) break;
        threads.emplace_back([&, w, begin, end] {
            try {
                fn(w, begin, end);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

} // namespace pgat
