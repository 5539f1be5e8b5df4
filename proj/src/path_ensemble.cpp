#include "bsvie/path_ensemble.hpp"

#include <cmath>
#include <random>

#include "bsvie/errors.hpp"
#include "bsvie/parallel.hpp"

namespace bsvie {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Substream seed for path m: two mixing rounds decorrelate consecutive paths.
std::uint64_t path_stream_seed(std::uint64_t seed, int m) {
    return splitmix64(splitmix64(seed) + static_cast<std::uint64_t>(m));
}

void validate_shape(int paths, int dim) {
    if (paths < 1) throw ValidationError("path ensemble: paths must be >= 1");
    if (dim < 1) throw ValidationError("path ensemble: dim must be >= 1");
}

} // namespace

PathEnsemble::PathEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed)
    : grid_(grid), paths_(paths), dim_(dim), seed_(seed) {
    validate_shape(paths, dim);
    const std::size_t per_slice = static_cast<std::size_t>(paths_) * dim_;
    increments_.resize(per_slice * grid_.steps());
    states_.resize(per_slice * (grid_.steps() + 1));
}

PathEnsemble::PathEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed,
                           const std::vector<double>& increments)
    : PathEnsemble(grid, paths, dim, seed) {
    const std::size_t expected =
        static_cast<std::size_t>(paths_) * grid_.steps() * dim_;
    if (increments.size() != expected)
        throw ValidationError("path ensemble: increments size must be paths*steps*dim");
    for (double v : increments)
        if (!std::isfinite(v)) throw ValidationError("path ensemble: increments must be finite");
    const int n = grid_.steps();
    for (int m = 0; m < paths_; ++m)
        for (int i = 0; i < n; ++i)
            for (int k = 0; k < dim_; ++k)
                increments_[slice_offset(i) + static_cast<std::size_t>(m) * dim_ + k] =
                    increments[(static_cast<std::size_t>(m) * n + i) * dim_ + k];
    rebuild_states();
}

PathEnsemble PathEnsemble::sample(const TimeGrid& grid, int paths, int dim, std::uint64_t seed) {
    PathEnsemble out(grid, paths, dim, seed);
    const int n = grid.steps();
    const double sd = std::sqrt(grid.dt());
    parallel::for_each_chunk(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
        for (std::size_t m = begin; m < end; ++m) {
            std::mt19937_64 rng(path_stream_seed(seed, static_cast<int>(m)));
            std::normal_distribution<double> normal(0.0, sd);
            for (int i = 0; i < n; ++i)
                for (int k = 0; k < dim; ++k)
                    out.increments_[out.slice_offset(i) + m * dim + k] = normal(rng);
        }
    });
    out.rebuild_states();
    return out;
}

void PathEnsemble::rebuild_states() {
    const int n = grid_.steps();
    parallel::for_each_chunk(static_cast<std::size_t>(paths_), [&](std::size_t begin, std::size_t end) {
        for (std::size_t m = begin; m < end; ++m) {
            for (int k = 0; k < dim_; ++k) states_[m * dim_ + k] = 0.0;
            for (int i = 0; i < n; ++i) {
                const std::size_t cur = slice_offset(i) + m * dim_;
                const std::size_t nxt = slice_offset(i + 1) + m * dim_;
                for (int k = 0; k < dim_; ++k)
                    states_[nxt + k] = states_[cur + k] + increments_[cur + k];
            }
        }
    });
}

PathEnsemble sample_paths(const TimeGrid& grid, int paths, int dim, std::uint64_t seed) {
    return PathEnsemble::sample(grid, paths, dim, seed);
}

} // namespace bsvie
