#include "quanvseg/parallel.hpp"

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

namespace quanvseg {
namespace {

int initial_thread_count() {
    if (const char* env = std::getenv("QUANVSEG_THREADS")) {
        int value = 0;
        const char* end = env + std::strlen(env);
        auto [ptr, ec] = std::from_chars(env, end, value);
        if (ec == std::errc() && ptr == end && value > 0) return value;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::atomic<int>& thread_setting() {
    static std::atomic<int> setting{initial_thread_count()};
    return setting;
}

}  // namespace

int thread_count() { return thread_setting().load(std::memory_order_relaxed); }

void set_thread_count(int n) { thread_setting().store(n < 1 ? 1 : n, std::memory_order_relaxed); }

}  // namespace quanvseg
