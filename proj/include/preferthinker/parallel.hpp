#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace preferthinker {

// Runs fn(0..n-1) across at most `jobs` worker threads. Callers guarantee
// determinism themselves by fixing per-index seeds up front and writing into
// per-index slots; the first exception wins and drains remaining work.
inline void run_indexed(int n, int jobs, const std::function<void(int)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> workers;
    int n_workers = std::min(jobs, n);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n_workers));
    workers.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&, w] {
            try {
                for (;;) {
                    int i = next.fetch_add(1);
                    if (i >= n) return;
                    fn(i);
                }
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
                next.store(n);  // drain remaining work
            }
        });
    }
    for (auto& t : workers) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

}  // namespace preferthinker
