#pragma once

#include <functional>

namespace odm {

// Global cap on worker threads used by parallel_for. 1 disables threading.
// Initial value comes from the ODM_THREADS environment variable (default 1).
void set_thread_cap(int n);
int thread_cap();

// Runs fn(i) for i in [0, n). Work is split into contiguous chunks across at
// most thread_cap() threads. Each index is computed by exactly one thread and
// per-index results must not depend on the split, so output is identical at
// any cap.
void parallel_for(int n, const std::function<void(int)>& fn);

}  // namespace odm
