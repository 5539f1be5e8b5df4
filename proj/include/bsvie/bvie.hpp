#pragma once

#include <functional>
#include <vector>

#include "bsvie/time_grid.hpp"

namespace bsvie {

// Deterministic Volterra kernel l(t, s) for the backward equation
//   Y(t) = -c + int_t^T l(t, s) Y(s) ds.
struct KernelSpec {
    enum class Tag { Constant, TimeOnly, General };
    Tag tag = Tag::Constant;
    double r = 0.0;
    std::function<double(double, double)> eval;

    static KernelSpec constant(double r);
    // l(t, s) = r(s)
    static KernelSpec time_only(std::function<double(double)> r_of_s);
    static KernelSpec general(std::function<double(double, double)> fn);

    double operator()(double t, double s) const { return eval(t, s); }
};

// Fixed-point iteration Y_{k+1}(t_i) = -c + trapezoid_{j>=i} l(t_i, t_j) Y_k(t_j)
// from Y_0 = 0, stopping when the sup-norm update is <= tol. Returns the table
// Y(t_i), i = 0..N.
std::vector<double> solve_bvie(const KernelSpec& kernel, double c, const TimeGrid& grid,
                               double tol = 1e-12, int max_iter = 200);

// -c * exp(int_t^T r(u) du) with the integral by trapezoid on `steps`
// subintervals of [t, T]: the closed-form solution when the kernel depends on
// s only.
double closed_form_translation(const std::function<double(double)>& r, double c, double t,
                               double horizon, int steps = 256);

} // namespace bsvie
