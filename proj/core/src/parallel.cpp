#include "geoscore/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace geoscore {

std::size_t worker_count() {
    std::size_t n = std::thread::hardware_concurrency();
    if (n == 0) n = 1;
    if (const char* env = std::getenv("GEOSCORE_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1 && static_cast<std::size_t>(cap) < n) n = static_cast<std::size_t>(cap);
    }
    return n;
}

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = worker_count();
    if (n == 0) return;
    if (workers == 1 || n == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t spawn = workers < n ? workers : n;
    pool.reserve(spawn);
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    std::atomic_flag error_latch = ATOMIC_FLAG_INIT;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n || failed.load()) break;
            try {
                fn(i);
            } catch (...) {
                if (!error_latch.test_and_set()) error = std::current_exception();
                failed.store(true);
                break;
            }
        }
    };
    for (std::size_t w = 0; w < spawn; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

} // namespace geoscore
