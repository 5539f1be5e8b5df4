#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "bsvie/path_ensemble.hpp"

namespace bsvie {

// Polynomial regression basis: all monomials in the d state components up to
// the given total degree, ridge penalty applied to every non-constant
// coefficient. The unpenalized constant keeps deterministic targets exact.
struct BasisSpec {
    int degree = 2;
    double ridge = 1e-8;
};

std::size_t polynomial_basis_size(int dim, int degree);

// Cross-sectional estimate of E[target | W(t_i)]: fitted values per path plus
// the basis coefficients. Values are a function of the slice states only.
struct ConditionalEstimate {
    std::vector<double> values;       // per path
    std::vector<double> coefficients; // per basis function
    int slice = 0;
};

// Estimate of E[target * dW_k(t_j) | W(t_j)] / dt per component k: the
// regression read of the integrand against the j-th increment.
struct MartingaleEstimate {
    std::vector<double> values;       // [m][k], row-major over paths
    std::vector<double> coefficients; // [p][k]
    int slice = 0;
    int dim = 1;
};

// Precomputed per-slice design matrices and normal-equation factorizations for
// one (ensemble, basis) pair. The Gram accumulation uses a fixed blocked
// reduction order, so results do not depend on the worker count.
class RegressionPlan {
public:
    RegressionPlan(const PathEnsemble& ensemble, const BasisSpec& basis);
    ~RegressionPlan();
    RegressionPlan(RegressionPlan&&) noexcept;
    RegressionPlan& operator=(RegressionPlan&&) noexcept;

    const PathEnsemble& ensemble() const noexcept;
    const BasisSpec& basis() const noexcept;
    std::size_t basis_size() const noexcept;

    // Fitted conditional expectation at slice i; slice 0 is the plain sample
    // mean. values may alias the targets memory.
    void project_into(std::span<const double> targets, int slice, std::span<double> values,
                      std::vector<double>* coefficients = nullptr) const;
    ConditionalEstimate project(std::span<const double> targets, int slice) const;

    // Fitted E[target * dW_k | W(t_j)] / dt for each component, slice j < N.
    void martingale_into(std::span<const double> targets, int slice, std::span<double> values,
                         std::vector<double>* coefficients = nullptr) const;
    MartingaleEstimate martingale(std::span<const double> targets, int slice) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

ConditionalEstimate regress_conditional(std::span<const double> targets, const PathEnsemble& ensemble,
                                        int slice, const BasisSpec& basis);
MartingaleEstimate martingale_coefficient(std::span<const double> targets, const PathEnsemble& ensemble,
                                          int slice, const BasisSpec& basis);

// Accuracy yardstick on the ensemble itself: regress the terminal state back
// onto every slice (true answer W(t_i)) and read its increment loadings (true
// answer 1). The pooled errors calibrate tolerances used by property checks.
struct CalibrationResult {
    double rmse_y = 0.0;
    double rmse_z = 0.0;
};
CalibrationResult martingale_calibration(const PathEnsemble& ensemble, const BasisSpec& basis);

} // namespace bsvie
