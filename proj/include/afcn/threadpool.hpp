#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace afcn {

// Worker count for fan-out over independent items: hardware concurrency,
// capped by the AFCN_THREADS environment variable when set.
inline std::size_t worker_count(std::size_t tasks) {
    std::size_t hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("AFCN_THREADS")) {
        char* end = nullptr;
        unsigned long cap = std::strtoul(env, &end, 10);
        if (end != env && cap > 0 && cap < hw) hw = cap;
    }
    return std::min(hw, std::max<std::size_t>(tasks, 1));
}

// Runs f(i) for i in [0, n). Each index is processed exactly once; callers
// keep determinism by writing only to slot i and reducing in index order
// afterwards. Executes inline when one worker suffices.
template <typename F>
void parallel_for(std::size_t n, F f) {
    std::size_t workers = worker_count(n);
    if (workers <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        threads.emplace_back([=] {
            for (std::size_t i = w; i < n; i += workers) f(i);
        });
    }
    for (auto& t : threads) t.join();
}

} // namespace afcn
