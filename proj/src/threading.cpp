#include "odm/threading.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace odm {

static int initial_cap() {
    if (const char* env = std::getenv("ODM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    return 1;
}

static std::atomic<int> g_cap{0};

void set_thread_cap(int n) { g_cap.store(n < 1 ? 1 : n); }

int thread_cap() {
    int v = g_cap.load();
    if (v == 0) {
        v = initial_cap();
        g_cap.store(v);
    }
    return v;
}

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int cap = thread_cap();
    if (cap <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int workers = cap < n ? cap : n;
    const int chunk = (n + workers - 1) / workers;
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        const int lo = w * chunk;
        const int hi = lo + chunk < n ? lo + chunk : n;
        if (lo >= hi) break;
        threads.emplace_back([lo, hi, &fn] {
            for (int i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

}  // namespace odm
