#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bsvie {

// Per-path, per-slice scalar process Y[m][i], i in [0, N]. Slice-major storage
// so one time slice is a contiguous cross-section over paths.
class AdaptedGrid {
public:
    AdaptedGrid(int paths, int slices)
        : paths_(paths), slices_(slices),
          data_(static_cast<std::size_t>(paths) * slices, 0.0) {}

    int paths() const noexcept { return paths_; }
    int slices() const noexcept { return slices_; }

    double value(int m, int i) const noexcept { return data_[offset(i) + m]; }
    double& value(int m, int i) noexcept { return data_[offset(i) + m]; }

    std::span<double> slice(int i) noexcept { return {data_.data() + offset(i), static_cast<std::size_t>(paths_)}; }
    std::span<const double> slice(int i) const noexcept {
        return {data_.data() + offset(i), static_cast<std::size_t>(paths_)};
    }

private:
    std::size_t offset(int i) const noexcept { return static_cast<std::size_t>(i) * paths_; }
    int paths_;
    int slices_;
    std::vector<double> data_;
};

// Two-time integrand field Z[m][i][j][k]: row i in [0, N] is the t-slice,
// column j in [0, N) indexes the integrand over [t_j, t_{j+1}), k the Brownian
// component. Cell-major storage: one (i, j) cell is contiguous over [m][k].
class TwoTimeField {
public:
    TwoTimeField(int paths, int steps, int dim)
        : paths_(paths), steps_(steps), dim_(dim),
          data_(static_cast<std::size_t>(paths) * (steps + 1) * steps * dim, 0.0) {}

    int paths() const noexcept { return paths_; }
    int rows() const noexcept { return steps_ + 1; }
    int cols() const noexcept { return steps_; }
    int dim() const noexcept { return dim_; }

    double value(int m, int i, int j, int k) const noexcept {
        return data_[offset(i, j) + static_cast<std::size_t>(m) * dim_ + k];
    }
    double& value(int m, int i, int j, int k) noexcept {
        return data_[offset(i, j) + static_cast<std::size_t>(m) * dim_ + k];
    }

    std::span<double> cell(int i, int j) noexcept {
        return {data_.data() + offset(i, j), static_cast<std::size_t>(paths_) * dim_};
    }
    std::span<const double> cell(int i, int j) const noexcept {
        return {data_.data() + offset(i, j), static_cast<std::size_t>(paths_) * dim_};
    }

private:
    std::size_t offset(int i, int j) const noexcept {
        return (static_cast<std::size_t>(i) * steps_ + j) * paths_ * dim_;
    }
    int paths_;
    int steps_;
    int dim_;
    std::vector<double> data_;
};

} // namespace bsvie
