#include "bsvie/time_grid.hpp"

#include <cmath>

#include "bsvie/errors.hpp"

namespace bsvie {

TimeGrid::TimeGrid(double horizon, int steps) : horizon_(horizon), steps_(steps), dt_(horizon / steps) {
    if (!std::isfinite(horizon) || horizon <= 0.0)
        throw ValidationError("time grid: horizon must be finite and > 0");
    if (steps < 2) throw ValidationError("time grid: steps must be >= 2");
}

std::vector<double> TimeGrid::times() const {
    std::vector<double> out(static_cast<std::size_t>(steps_) + 1);
    for (int i = 0; i <= steps_; ++i) out[static_cast<std::size_t>(i)] = time(i);
    return out;
}

TimeGrid build_time_grid(double horizon, int steps) { return TimeGrid(horizon, steps); }

} // namespace bsvie
