#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace fluctsim {

// Worker count: explicit request first, then the FLUCTSIM_WORKERS
// environment variable, default 1.
inline int resolve_workers(int requested) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("FLUCTSIM_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    return 1;
}

// Runs fn(shard) for shard = 0 .. n_shards-1 on up to n_workers threads.
// Each shard must seed its own generator and write results into a dedicated
// slot; callers reduce the slots in shard order afterwards, so the outcome
// is identical for any worker count. fn must not throw.
inline void parallel_for_shards(int n_shards, int n_workers, const std::function<void(int)>& fn) {
    n_workers = std::clamp(n_workers, 1, std::max(n_shards, 1));
    if (n_workers <= 1) {
        for (int s = 0; s < n_shards; ++s) fn(s);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                int s = next.fetch_add(1);
                if (s >= n_shards) return;
                fn(s);
            }
        });
    for (auto& t : pool) t.join();
}

}  // namespace fluctsim
