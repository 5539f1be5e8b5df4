#include "bsvie/bvie.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "bsvie/errors.hpp"

namespace bsvie {

KernelSpec KernelSpec::constant(double r) {
    KernelSpec spec;
    spec.tag = Tag::Constant;
    spec.r = r;
    spec.eval = [r](double, double) { return r; };
    return spec;
}

KernelSpec KernelSpec::time_only(std::function<double(double)> r_of_s) {
    if (!r_of_s) throw ValidationError("time_only kernel requires a callable");
    KernelSpec spec;
    spec.tag = Tag::TimeOnly;
    spec.eval = [fn = std::move(r_of_s)](double, double s) { return fn(s); };
    return spec;
}

KernelSpec KernelSpec::general(std::function<double(double, double)> fn) {
    if (!fn) throw ValidationError("general kernel requires a callable");
    KernelSpec spec;
    spec.tag = Tag::General;
    spec.eval = std::move(fn);
    return spec;
}

std::vector<double> solve_bvie(const KernelSpec& kernel, double c, const TimeGrid& grid,
                               double tol, int max_iter) {
    if (!kernel.eval) throw ValidationError("kernel has no callable");
    if (!(tol > 0.0)) throw ValidationError("tol must be positive");
    if (max_iter < 1) throw ValidationError("max_iter must be at least 1");

    const int n = grid.steps();
    const double dt = grid.dt();

    // Kernel values on the closed upper-triangular grid; the iteration reuses
    // them every sweep.
    std::vector<double> lv(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
    for (int i = 0; i <= n; ++i) {
        const double ti = grid.time(i);
        for (int j = i; j <= n; ++j) {
            const double v = kernel(ti, grid.time(j));
            if (!std::isfinite(v))
                throw ValidationError("kernel value is not finite at t=" + std::to_string(ti) +
                                      ", s=" + std::to_string(grid.time(j)));
            lv[static_cast<std::size_t>(i) * (n + 1) + j] = v;
        }
    }

    std::vector<double> y(static_cast<std::size_t>(n) + 1, 0.0);
    std::vector<double> next(y.size(), 0.0);

    for (int iter = 0; iter < max_iter; ++iter) {
        double diff = 0.0;
        for (int i = 0; i <= n; ++i) {
            const double* row = lv.data() + static_cast<std::size_t>(i) * (n + 1);
            // Trapezoid over [t_i, T]: half weights at both endpoints.
            double acc = 0.0;
            if (i < n) {
                acc += 0.5 * row[i] * y[i];
                for (int j = i + 1; j < n; ++j) acc += row[j] * y[j];
                acc += 0.5 * row[n] * y[n];
            }
            const double v = -c + dt * acc;
            diff = std::max(diff, std::abs(v - y[i]));
            next[i] = v;
        }
        y.swap(next);
        if (diff <= tol) return y;
    }
    throw DivergenceError("deterministic Volterra iteration did not reach tol " +
                          std::to_string(tol) + " in " + std::to_string(max_iter) +
                          " sweeps; the kernel may be too large for this horizon");
}

double closed_form_translation(const std::function<double(double)>& r, double c, double t,
                               double horizon, int steps) {
    if (!r) throw ValidationError("closed_form_translation requires a rate callable");
    if (steps < 1) throw ValidationError("steps must be at least 1");
    if (!(horizon >= t)) throw ValidationError("horizon must be >= t");
    const double h = (horizon - t) / steps;
    double acc = 0.5 * (r(t) + r(horizon));
    for (int k = 1; k < steps; ++k) acc += r(t + h * k);
    return -c * std::exp(h * acc);
}

} // namespace bsvie
