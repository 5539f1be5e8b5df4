#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "bsvie/time_grid.hpp"

namespace bsvie {

// Brownian increments and states for M paths on a TimeGrid. Increments
// dW[m][i][k] ~ N(0, dt) are drawn from a per-path substream derived from
// (seed, m), so regeneration with the same (seed, M, N, d) is bit-identical
// regardless of the worker count. States satisfy
//   W[m][i+1][k] == W[m][i][k] + dW[m][i][k]
// exactly (each state is the stored floating-point sum). Immutable once built.
class PathEnsemble {
public:
    // Wraps externally supplied increments, laid out path-major [m][i][k].
    PathEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed,
                 const std::vector<double>& increments);

    static PathEnsemble sample(const TimeGrid& grid, int paths, int dim, std::uint64_t seed);

    const TimeGrid& grid() const noexcept { return grid_; }
    int paths() const noexcept { return paths_; }
    int dim() const noexcept { return dim_; }
    int steps() const noexcept { return grid_.steps(); }
    std::uint64_t seed() const noexcept { return seed_; }

    // i in [0, N) for increments, [0, N] for states; k in [0, dim).
    double increment(int m, int i, int k) const noexcept {
        return increments_[slice_offset(i) + static_cast<std::size_t>(m) * dim_ + k];
    }
    double state(int m, int i, int k) const noexcept {
        return states_[slice_offset(i) + static_cast<std::size_t>(m) * dim_ + k];
    }

    // Contiguous [m][k] cross-section of one time slice.
    std::span<const double> increment_slice(int i) const noexcept {
        return {increments_.data() + slice_offset(i), static_cast<std::size_t>(paths_) * dim_};
    }
    std::span<const double> state_slice(int i) const noexcept {
        return {states_.data() + slice_offset(i), static_cast<std::size_t>(paths_) * dim_};
    }

private:
    PathEnsemble(const TimeGrid& grid, int paths, int dim, std::uint64_t seed);
    void rebuild_states();
    std::size_t slice_offset(int i) const noexcept {
        return static_cast<std::size_t>(i) * paths_ * dim_;
    }

    TimeGrid grid_;
    int paths_;
    int dim_;
    std::uint64_t seed_;
    std::vector<double> increments_; // slice-major [i][m][k], i in [0, N)
    std::vector<double> states_;     // slice-major [i][m][k], i in [0, N]
};

PathEnsemble sample_paths(const TimeGrid& grid, int paths, int dim, std::uint64_t seed);

} // namespace bsvie
