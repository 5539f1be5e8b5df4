#include "bsvie/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace bsvie::parallel {

namespace {
std::atomic<int> g_threads{1};
}

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void set_thread_count(int n) { g_threads.store(std::max(1, n), std::memory_order_relaxed); }

void for_each_task(std::size_t count, const std::function<void(std::size_t)>& task) {
    const int workers = static_cast<int>(std::min<std::size_t>(thread_count(), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                if (failed.load(std::memory_order_relaxed)) return;
                const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
                if (i >= count) return;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    failed.store(true, std::memory_order_relaxed);
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void for_each_chunk(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
    for_each_task(blocks, [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        fn(begin, std::min(n, begin + kBlockSize));
    });
}

double block_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& partial) {
    const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
    std::vector<double> parts(blocks, 0.0);
    for_each_task(blocks, [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        parts[b] = partial(begin, std::min(n, begin + kBlockSize));
    });
    double total = 0.0;
    for (double p : parts) total += p;
    return total;
}

void block_sum_vec(std::size_t n, std::size_t width,
                   const std::function<void(std::size_t, std::size_t, double*)>& partial,
                   double* out) {
    const std::size_t blocks = (n + kBlockSize - 1) / kBlockSize;
    std::vector<double> parts(blocks * width, 0.0);
    for_each_task(blocks, [&](std::size_t b) {
        const std::size_t begin = b * kBlockSize;
        partial(begin, std::min(n, begin + kBlockSize), parts.data() + b * width);
    });
    for (std::size_t j = 0; j < width; ++j) out[j] = 0.0;
    for (std::size_t b = 0; b < blocks; ++b) {
        const double* p = parts.data() + b * width;
        for (std::size_t j = 0; j < width; ++j) out[j] += p[j];
    }
}

} // namespace bsvie::parallel
