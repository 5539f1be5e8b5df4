#pragma once

#include <vector>

namespace bsvie {

// Uniform partition 0 = t_0 < t_1 < ... < t_N = T with t_i = i*T/N.
class TimeGrid {
public:
    TimeGrid(double horizon, int steps);

    double horizon() const noexcept { return horizon_; }
    int steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double time(int i) const noexcept { return horizon_ * static_cast<double>(i) / static_cast<double>(steps_); }
    std::vector<double> times() const;

private:
    double horizon_;
    int steps_;
    double dt_;
};

TimeGrid build_time_grid(double horizon, int steps);

} // namespace bsvie
