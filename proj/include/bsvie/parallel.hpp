#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace bsvie::parallel {

// Process-wide worker count used by the engine. Defaults to 1.
int thread_count();
void set_thread_count(int n);

// Fixed block size used for all reductions. Results must not depend on the
// worker count, so partial results are always formed per block of this size
// and combined in block order.
inline constexpr std::size_t kBlockSize = 4096;

// Runs fn(begin, end) over consecutive chunks of [0, n). Chunks are disjoint,
// so any write pattern keyed on the index is deterministic.
void for_each_chunk(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// Runs task(i) for i in [0, count); tasks must write to disjoint locations.
void for_each_task(std::size_t count, const std::function<void(std::size_t)>& task);

// Deterministic blocked sum: partial(b, e) returns the sum over [b, e); the
// per-block partials are combined in increasing block order.
double block_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& partial);

// Same contract for vector-valued accumulations: partial(b, e, acc) adds the
// block's contribution into acc (zero-initialized, one per block).
void block_sum_vec(std::size_t n, std::size_t width,
                   const std::function<void(std::size_t, std::size_t, double*)>& partial,
                   double* out);

} // namespace bsvie::parallel
