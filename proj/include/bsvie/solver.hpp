#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "bsvie/generator.hpp"
#include "bsvie/grids.hpp"
#include "bsvie/path_ensemble.hpp"
#include "bsvie/regression.hpp"

namespace bsvie {

// Sampled Lipschitz diagnostic: finite-difference ratios of the generator in y
// and z at random slice pairs, paths and perturbations, compared against the
// declared bounds, plus a quadrature estimate of the squared time integral of
// the base term g(t, s, 0, 0).
struct LipschitzReport {
    bool checked = false;
    double declared_y = 0.0;
    double declared_z = 0.0;
    double max_ratio_y = 0.0;
    double max_ratio_z = 0.0;
    bool within_y = true;
    bool within_z = true;
    double base_term_estimate = 0.0;
    double base_term_coarse = 0.0;
    bool finite = true;
    int samples = 0;
};

LipschitzReport check_lipschitz(const GeneratorSpec& generator, const PathEnsemble& ensemble,
                                int sample_count);

struct SolverReport {
    int iterations = 0;
    std::vector<double> successive_norms;
    std::vector<double> contraction_ratios; // norms[k] / norms[k-1]
    double beta_used = 0.0;
    bool converged = false;
    LipschitzReport lipschitz;
};

// Adapted solution estimate: Y on the slice grid and the two-time integrand
// field Z on the full square. Rows j >= i of column i hold the values the
// generator consumes; entries j < i of row i reconstruct Y(t_i) from its own
// increments back to time 0.
struct MSolutionEstimate {
    AdaptedGrid y;
    TwoTimeField z;
    TimeGrid grid;
    SolverReport report;
};

enum class InitialIterate { Zero, TerminalPropagated };

struct PicardOptions {
    std::optional<double> beta; // default: 8 * max(Ly^2, Lz, 1)
    double tol = 1e-4;
    int max_iter = 25;
    InitialIterate init = InitialIterate::Zero;
    // When > 0, run exactly this many sweeps and skip the tolerance test;
    // comparative property checks use it so that paired solves share the
    // identical arithmetic path.
    int forced_iterations = 0;
    int lipschitz_samples = 256;
};

double default_beta(const GeneratorSpec& generator);

// One sweep of the frozen-coefficient map: accumulate per slice i
//   A_i = psi(t_i, W(T)) + sum_{j >= i} g(t_i, t_j, y[j], z[j][i], W(t_j)) dt
// (left endpoints; the generator consumes column i of the frozen field, the
// values that extend Z below the diagonal), then project A_i onto the slice-i
// cross-section for Y and read its increment loadings for Z on j >= i. Slice N
// copies the terminal samples verbatim.
std::pair<AdaptedGrid, TwoTimeField> freeze_step(const GeneratorSpec& generator,
                                                 const TerminalSpec& terminal,
                                                 const AdaptedGrid& frozen_y,
                                                 const TwoTimeField& frozen_z,
                                                 const PathEnsemble& ensemble,
                                                 const RegressionPlan& plan);

// Fills rows below the diagonal: Z[i][j] for j < i reads the increment
// loadings of Y(t_i) itself, realizing Y(t_i) = E Y(t_i) + int_0^{t_i} Z dW.
void m_extend(const AdaptedGrid& y, const RegressionPlan& plan, TwoTimeField& z);

// Discrete weighted norm:
//   sqrt( mean_m [ sum_{i<N} e^{b t_i} y[m][i]^2 dt
//                 + sum_{i<N} e^{b t_i} sum_{j>=i} |z[m][i][j]|^2 dt^2 ] ).
double beta_norm(const AdaptedGrid& y, const TwoTimeField& z, double beta, const TimeGrid& grid);

MSolutionEstimate picard_solve(const GeneratorSpec& generator, const TerminalSpec& terminal,
                               const PathEnsemble& ensemble, const BasisSpec& basis,
                               const PicardOptions& options = {});

// Per-slice mean squared defect of the reconstruction
//   Y[m][i] - mean(Y[:,i]) - sum_{j<i} z[m][i][j] . dW[m][j].
std::vector<double> m_condition_residuals(const MSolutionEstimate& estimate,
                                          const PathEnsemble& ensemble);

} // namespace bsvie
