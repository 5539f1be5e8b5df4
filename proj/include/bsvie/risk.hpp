#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "bsvie/generator.hpp"
#include "bsvie/path_ensemble.hpp"
#include "bsvie/regression.hpp"
#include "bsvie/solver.hpp"

namespace bsvie {

// Driver of a dynamic risk measure rho(t; claim) = Y(t), where (Y, Z) solves
// the backward equation with terminal data -claim. The structural flags tell
// the property checks what the driver guarantees.
struct RiskGenerator {
    GeneratorSpec generator;
    std::string name = "custom";
    // The claim -> Y map is linear; additivity and homogeneity hold exactly.
    bool linear = false;
    // dg/dy is a nonrandom kernel of (t, s); the translation curve then solves
    // a deterministic Volterra equation with that kernel.
    bool y_coefficient_deterministic = false;
    std::function<double(double, double)> y_kernel;

    // g = l1*y + l2*sum_k z_k
    static RiskGenerator linear_form(double l1, double l2);
    // g = r1*y + kappa*|z|, coherent for kappa >= 0
    static RiskGenerator rate_form(double r1, double kappa);
    // g = a*(sum_k z_k)^2: negative control, breaks positive homogeneity
    static RiskGenerator quadratic_form(double a);
    static RiskGenerator custom(GeneratorSpec generator, std::string name);
};

// g(t, s, y, z) = sin(sum_k W(s)[k]) * y. The coefficient is random, so even a
// deterministic claim yields genuinely random intermediate risk values.
GeneratorSpec sin_state_coefficient();

// Solve for the risk values of the claim on the ensemble.
MSolutionEstimate rho(const RiskGenerator& risk, const TerminalSpec& claim,
                      const PathEnsemble& ensemble, const BasisSpec& basis,
                      const PicardOptions& options = {});

// 3 * pooled conditional-expectation rmse measured on the ensemble itself: the
// yardstick for the tolerance-based property checks below.
double default_axiom_tolerance(const PathEnsemble& ensemble, const BasisSpec& basis);

struct AxiomCheck {
    std::string axiom;
    bool pass = false;
    double statistic = 0.0; // worst measured violation or mismatch
    double tolerance = 0.0;
    std::string detail;
};

// Every comparative check below runs its solves with a shared forced sweep
// count (options.forced_iterations, defaulting to 8 when unset) so that paired
// runs follow the identical arithmetic path and exact relations survive in
// floating point.

// Claims agreeing on slices >= from_slice must give bit-identical risk values
// and integrand rows there. Tolerance is zero by construction.
AxiomCheck check_past_independence(const RiskGenerator& risk, const TerminalSpec& claim_a,
                                   const TerminalSpec& claim_b, int from_slice,
                                   const PathEnsemble& ensemble, const BasisSpec& basis,
                                   PicardOptions options = {});

// claim_low <= claim_high pathwise (verified on the ensemble, else a
// ValidationError) must give rho(claim_low) >= rho(claim_high) pathwise up to
// the tolerance.
AxiomCheck check_monotonicity(const RiskGenerator& risk, const TerminalSpec& claim_low,
                              const TerminalSpec& claim_high, const PathEnsemble& ensemble,
                              const BasisSpec& basis, double tolerance,
                              PicardOptions options = {});

// rho(lambda * claim) = lambda * rho(claim) for lambda > 0.
AxiomCheck check_positive_homogeneity(const RiskGenerator& risk, const TerminalSpec& claim,
                                      double lambda, const PathEnsemble& ensemble,
                                      const BasisSpec& basis, double tolerance,
                                      PicardOptions options = {});

// rho(claim_a + claim_b) <= rho(claim_a) + rho(claim_b), compared on per-slice
// cross-path means up to the tolerance.
AxiomCheck check_subadditivity(const RiskGenerator& risk, const TerminalSpec& claim_a,
                               const TerminalSpec& claim_b, const PathEnsemble& ensemble,
                               const BasisSpec& basis, double tolerance,
                               PicardOptions options = {});

struct TranslationCheck {
    AxiomCheck check;
    std::vector<double> shift_curve; // D(t_i): cross-path mean of the rho shift
    std::vector<double> reference;   // deterministic Volterra curve, when available
    // Worst per-slice rms spread of the per-path shift around its slice mean; a
    // nonrandom shift leaves only regression noise here.
    double max_cross_path_rms = 0.0;
    bool compared_to_kernel = false;
};

// Shifting the claim by a constant moves rho by a nonrandom curve D(t); when
// the driver's y-coefficient is a deterministic kernel, D solves the Volterra
// equation with that kernel and the measured curve is compared against it.
TranslationCheck check_translation(const RiskGenerator& risk, const TerminalSpec& claim,
                                   double shift, const PathEnsemble& ensemble,
                                   const BasisSpec& basis, double tolerance,
                                   PicardOptions options = {});

// The shift curve D must not depend on the claim it is measured from.
AxiomCheck check_translation_claim_independence(const RiskGenerator& risk,
                                                const TerminalSpec& claim_a,
                                                const TerminalSpec& claim_b, double shift,
                                                const PathEnsemble& ensemble,
                                                const BasisSpec& basis, double tolerance,
                                                PicardOptions options = {});

struct BatteryConfig {
    double claim_scale = 1.0;
    double shift = 0.7;
    double lambda = 2.0;
    int forced_iterations = 8;
    double tolerance_multiplier = 3.0;
    std::optional<double> tolerance_override;
    int from_slice = -1; // past-independence boundary; default N/2
};

struct CoherenceReport {
    std::string generator_name;
    std::vector<AxiomCheck> checks;
    TranslationCheck translation;
    double tolerance = 0.0;
    double rmse_y = 0.0;
    double rmse_z = 0.0;
    bool all_pass = false;
};

// Standard battery over fixed option-style claims: past independence,
// monotonicity, positive homogeneity, subadditivity, translation.
CoherenceReport coherence_report(const RiskGenerator& risk, const PathEnsemble& ensemble,
                                 const BasisSpec& basis, const BatteryConfig& config = {});

struct CounterexampleReport {
    std::vector<double> mean;           // per slice
    std::vector<double> variance;       // per slice, cross-path
    std::vector<double> standard_error; // of each variance estimate
    double mid_variance = 0.0;
    double mid_standard_error = 0.0;
    bool random_at_mid = false;  // variance > 5 * SE at the middle slice
    bool certain_at_mid = false; // variance <= 2 * SE at the middle slice
    double z_proxy = 0.0;        // sum_{i, j<i} mean |Z(i,j)|^2 dt^2
    double claim_level = 0.0;
    SolverReport solver;
};

// Risk of the deterministic claim c under the sin-modulated driver. For c != 0
// the intermediate values are random (the certainty a naive translation
// argument would predict fails); for c = 0 they vanish identically.
CounterexampleReport sin_counterexample(double claim_level, const PathEnsemble& ensemble,
                                        const BasisSpec& basis, PicardOptions options = {});

} // namespace bsvie
