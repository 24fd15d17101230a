#include "mobgen/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <malloc.h>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace mobgen {

namespace {

std::size_t initial_threads() {
    if (const char* env = std::getenv("MOBGEN_THREADS")) {
        try {
            const auto v = std::stoul(env);
            if (v > 0) return v;
        } catch (...) {
        }
    }
    return 1;
}

std::atomic<std::size_t>& threads_setting() {
    static std::atomic<std::size_t> value{initial_threads()};
    return value;
}

}  // namespace

std::size_t thread_count() {
    return threads_setting().load();
}

void set_thread_count(std::size_t n) {
    threads_setting().store(std::max<std::size_t>(1, n));
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(thread_count(), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, begin, end] {
            try {
                for (std::size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void configure_allocator() {
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

}  // namespace mobgen
