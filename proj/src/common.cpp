#include "spectlv/common.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace spectlv {

int worker_count() {
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw < 1) hw = 1;
    if (const char* env = std::getenv("SPECTLV_THREADS")) {
        int cap = std::atoi(env);
        if (cap >= 1) hw = std::min(hw, cap);
    }
    return hw;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0) return;
    int workers = std::min<std::int64_t>(worker_count(), n);
    if (workers <= 1) {
        fn(0, n);
        return;
    }
    std::vector<std::thread> threads;
    threads.reserve(workers - 1);
    std::int64_t chunk = (n + workers - 1) / workers;
    for (int t = 1; t < workers; ++t) {
        std::int64_t b = t * chunk;
        std::int64_t e = std::min<std::int64_t>(b + chunk, n);
        if (b >= e) break;
        threads.emplace_back(fn, b, e);
    }
    fn(0, std::min<std::int64_t>(chunk, n));
    for (auto& th : threads) th.join();
}

}  // namespace spectlv
