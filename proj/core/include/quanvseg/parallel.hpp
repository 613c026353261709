#pragma once

#include <cstddef>
#include <cstdint>

namespace quanvseg {

// Number of worker threads used by the parallel kernels. Initialised from
// QUANVSEG_THREADS when set to a positive integer, otherwise from the number
// of available cores. Every kernel partitions work so that each output
// element is produced by exactly one worker in a fixed order, so results do
// not depend on this value.
int thread_count();
void set_thread_count(int n);

// Runs body(i) for i in [0, n). body must only write state owned by index i.
template <typename Body>
void parallel_for(std::size_t n, Body&& body) {
    const auto count = static_cast<std::int64_t>(n);
    const int threads = thread_count();
    if (threads <= 1 || count < 2) {
        for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
        return;
    }
#pragma omp parallel for schedule(static) num_threads(threads)
    for (std::int64_t i = 0; i < count; ++i) body(static_cast<std::size_t>(i));
}

}  // namespace quanvseg
