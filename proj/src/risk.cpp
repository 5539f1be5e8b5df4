#include "bsvie/risk.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsvie/bvie.hpp"
#include "bsvie/errors.hpp"

namespace bsvie {
namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Comparative checks share one forced sweep count so paired solves follow the
// identical arithmetic path.
PicardOptions paired(PicardOptions options) {
    if (options.forced_iterations <= 0) options.forced_iterations = 8;
    return options;
}

void require_claim(const TerminalSpec& claim, const char* who) {
    if (!claim.eval) throw ValidationError(std::string(who) + ": claim has no callable");
}

void require_tolerance(double tolerance, const char* who) {
    if (!std::isfinite(tolerance) || tolerance < 0.0)
        throw ValidationError(std::string(who) + ": tolerance must be finite and >= 0");
}

} // namespace

RiskGenerator RiskGenerator::linear_form(double l1, double l2) {
    RiskGenerator r;
    r.generator = GeneratorSpec::linear(l1, l2);
    r.name = "linear_form";
    r.linear = true;
    r.y_coefficient_deterministic = true;
    r.y_kernel = [l1](double, double) { return l1; };
    return r;
}

RiskGenerator RiskGenerator::rate_form(double r1, double kappa) {
    RiskGenerator r;
    r.generator = GeneratorSpec::custom(
        [r1, kappa](double, double, double y, std::span<const double> z,
                    std::span<const double>) {
            double sq = 0.0;
            for (double v : z) sq += v * v;
            return r1 * y + kappa * std::sqrt(sq);
        },
        std::abs(r1), std::abs(kappa));
    r.name = "rate_form";
    r.linear = false;
    r.y_coefficient_deterministic = true;
    r.y_kernel = [r1](double, double) { return r1; };
    return r;
}

RiskGenerator RiskGenerator::quadratic_form(double a) {
    RiskGenerator r;
    // Declared z bound is the local slope at unit scale; the driver is not
    // globally Lipschitz, which is the point of the control.
    r.generator = GeneratorSpec::custom(
        [a](double, double, double, std::span<const double> z, std::span<const double>) {
            double zsum = 0.0;
            for (double v : z) zsum += v;
            return a * zsum * zsum;
        },
        0.0, 2.0 * std::abs(a));
    r.name = "quadratic_form";
    r.linear = false;
    r.y_coefficient_deterministic = true;
    r.y_kernel = [](double, double) { return 0.0; };
    return r;
}

RiskGenerator RiskGenerator::custom(GeneratorSpec generator, std::string name) {
    RiskGenerator r;
    r.generator = std::move(generator);
    r.name = std::move(name);
    return r;
}

GeneratorSpec sin_state_coefficient() {
    return GeneratorSpec::custom(
        [](double, double, double y, std::span<const double>, std::span<const double> state) {
            return std::sin(detail::state_sum(state)) * y;
        },
        1.0, 0.0);
}

MSolutionEstimate rho(const RiskGenerator& risk, const TerminalSpec& claim,
                      const PathEnsemble& ensemble, const BasisSpec& basis,
                      const PicardOptions& options) {
    require_claim(claim, "risk");
    return picard_solve(risk.generator, claim.negated(), ensemble, basis, options);
}

double default_axiom_tolerance(const PathEnsemble& ensemble, const BasisSpec& basis) {
    return 3.0 * martingale_calibration(ensemble, basis).rmse_y;
}

AxiomCheck check_past_independence(const RiskGenerator& risk, const TerminalSpec& claim_a,
                                   const TerminalSpec& claim_b, int from_slice,
                                   const PathEnsemble& ensemble, const BasisSpec& basis,
                                   PicardOptions options) {
    const int n = ensemble.steps();
    if (from_slice < 0 || from_slice > n)
        throw ValidationError("past independence: from_slice out of [0, steps]");
    const PicardOptions opt = paired(options);
    const MSolutionEstimate ra = rho(risk, claim_a, ensemble, basis, opt);
    const MSolutionEstimate rb = rho(risk, claim_b, ensemble, basis, opt);

    double worst = 0.0;
    for (int i = from_slice; i <= n; ++i) {
        const auto ya = ra.y.slice(i);
        const auto yb = rb.y.slice(i);
        for (std::size_t m = 0; m < ya.size(); ++m)
            worst = std::max(worst, std::abs(ya[m] - yb[m]));
        for (int j = 0; j < n; ++j) {
            const auto za = ra.z.cell(i, j);
            const auto zb = rb.z.cell(i, j);
            for (std::size_t m = 0; m < za.size(); ++m)
                worst = std::max(worst, std::abs(za[m] - zb[m]));
        }
    }

    AxiomCheck out;
    out.axiom = "past_independence";
    out.statistic = worst;
    out.tolerance = 0.0;
    out.pass = worst == 0.0;
    out.detail = out.pass ? "values and integrand rows bit-identical from slice " +
                                std::to_string(from_slice)
                          : "max |difference| " + fmt(worst) + " from slice " +
                                std::to_string(from_slice);
    return out;
}

AxiomCheck check_monotonicity(const RiskGenerator& risk, const TerminalSpec& claim_low,
                              const TerminalSpec& claim_high, const PathEnsemble& ensemble,
                              const BasisSpec& basis, double tolerance, PicardOptions options) {
    require_claim(claim_low, "monotonicity");
    require_claim(claim_high, "monotonicity");
    require_tolerance(tolerance, "monotonicity");

    const int n = ensemble.steps();
    const int paths = ensemble.paths();
    const int d = ensemble.dim();
    const auto wn = ensemble.state_slice(n);
    for (int i = 0; i <= n; ++i) {
        const double t = ensemble.grid().time(i);
        for (int m = 0; m < paths; ++m) {
            const auto w = wn.subspan(static_cast<std::size_t>(m) * d, d);
            if (!(claim_low(t, w) <= claim_high(t, w)))
                throw ValidationError("monotonicity: claims are not ordered at slice " +
                                      std::to_string(i) + ", path " + std::to_string(m));
        }
    }

    const PicardOptions opt = paired(options);
    const MSolutionEstimate rl = rho(risk, claim_low, ensemble, basis, opt);
    const MSolutionEstimate rh = rho(risk, claim_high, ensemble, basis, opt);

    // Larger claims must not carry larger risk: rho(high) <= rho(low).
    double worst = -std::numeric_limits<double>::infinity();
    int worst_slice = 0;
    for (int i = 0; i <= n; ++i) {
        const auto yl = rl.y.slice(i);
        const auto yh = rh.y.slice(i);
        for (std::size_t m = 0; m < yl.size(); ++m) {
            const double v = yh[m] - yl[m];
            if (v > worst) {
                worst = v;
                worst_slice = i;
            }
        }
    }

    AxiomCheck out;
    out.axiom = "monotonicity";
    out.statistic = worst;
    out.tolerance = tolerance;
    out.pass = worst <= tolerance;
    out.detail = "worst rho(high) - rho(low) = " + fmt(worst) + " at slice " +
                 std::to_string(worst_slice);
    return out;
}

AxiomCheck check_positive_homogeneity(const RiskGenerator& risk, const TerminalSpec& claim,
                                      double lambda, const PathEnsemble& ensemble,
                                      const BasisSpec& basis, double tolerance,
                                      PicardOptions options) {
    require_claim(claim, "homogeneity");
    require_tolerance(tolerance, "homogeneity");
    if (!(lambda > 0.0) || !std::isfinite(lambda))
        throw ValidationError("homogeneity: lambda must be finite and > 0");

    const PicardOptions opt = paired(options);
    const MSolutionEstimate ra = rho(risk, claim, ensemble, basis, opt);
    const MSolutionEstimate rb = rho(risk, claim.scaled(lambda), ensemble, basis, opt);

    const int n = ensemble.steps();
    double worst = 0.0;
    int worst_slice = 0;
    for (int i = 0; i <= n; ++i) {
        const auto ya = ra.y.slice(i);
        const auto yb = rb.y.slice(i);
        for (std::size_t m = 0; m < ya.size(); ++m) {
            const double v = std::abs(yb[m] - lambda * ya[m]);
            if (v > worst) {
                worst = v;
                worst_slice = i;
            }
        }
    }

    AxiomCheck out;
    out.axiom = "positive_homogeneity";
    out.statistic = worst;
    out.tolerance = tolerance;
    out.pass = worst <= tolerance;
    out.detail = "max |rho(lambda claim) - lambda rho(claim)| = " + fmt(worst) + " at slice " +
                 std::to_string(worst_slice) + ", lambda = " + fmt(lambda);
    return out;
}

AxiomCheck check_subadditivity(const RiskGenerator& risk, const TerminalSpec& claim_a,
                               const TerminalSpec& claim_b, const PathEnsemble& ensemble,
                               const BasisSpec& basis, double tolerance, PicardOptions options) {
    require_claim(claim_a, "subadditivity");
    require_claim(claim_b, "subadditivity");
    require_tolerance(tolerance, "subadditivity");

    const PicardOptions opt = paired(options);
    const MSolutionEstimate ra = rho(risk, claim_a, ensemble, basis, opt);
    const MSolutionEstimate rb = rho(risk, claim_b, ensemble, basis, opt);
    const MSolutionEstimate rs = rho(risk, TerminalSpec::sum(claim_a, claim_b), ensemble, basis, opt);

    // Compared on slice means: the pathwise gap carries basis-approximation
    // bias in the tails (the three claims have different value-function
    // shapes), which the rmse-based tolerance does not calibrate.
    const int n = ensemble.steps();
    double worst = -std::numeric_limits<double>::infinity();
    double worst_abs = 0.0;
    int worst_slice = 0;
    for (int i = 0; i <= n; ++i) {
        const auto ya = ra.y.slice(i);
        const auto yb = rb.y.slice(i);
        const auto ys = rs.y.slice(i);
        double mean = 0.0;
        for (std::size_t m = 0; m < ya.size(); ++m) mean += ys[m] - ya[m] - yb[m];
        mean /= static_cast<double>(ya.size());
        if (mean > worst) {
            worst = mean;
            worst_slice = i;
        }
        worst_abs = std::max(worst_abs, std::abs(mean));
    }

    AxiomCheck out;
    out.axiom = "subadditivity";
    out.statistic = worst;
    out.tolerance = tolerance;
    out.pass = worst <= tolerance;
    out.detail = "worst slice mean of rho(a+b) - rho(a) - rho(b) = " + fmt(worst) +
                 " at slice " + std::to_string(worst_slice);
    if (risk.linear) out.detail += "; max |gap| " + fmt(worst_abs) + " (additive driver)";
    return out;
}

namespace {

// Cross-path mean of rho(claim + shift) - rho(claim) per slice, plus the worst
// per-slice rms spread of the per-path shift around that mean.
std::vector<double> shift_curve_of(const RiskGenerator& risk, const TerminalSpec& claim,
                                   double shift, const PathEnsemble& ensemble,
                                   const BasisSpec& basis, const PicardOptions& opt,
                                   double* max_rms) {
    const MSolutionEstimate base = rho(risk, claim, ensemble, basis, opt);
    const MSolutionEstimate moved = rho(risk, claim.shifted(shift), ensemble, basis, opt);

    const int n = ensemble.steps();
    std::vector<double> curve(static_cast<std::size_t>(n) + 1, 0.0);
    double rms = 0.0;
    for (int i = 0; i <= n; ++i) {
        const auto yb = base.y.slice(i);
        const auto ym = moved.y.slice(i);
        double mean = 0.0;
        for (std::size_t m = 0; m < yb.size(); ++m) mean += ym[m] - yb[m];
        mean /= static_cast<double>(yb.size());
        curve[i] = mean;
        double ss = 0.0;
        for (std::size_t m = 0; m < yb.size(); ++m) {
            const double d = ym[m] - yb[m] - mean;
            ss += d * d;
        }
        rms = std::max(rms, std::sqrt(ss / static_cast<double>(yb.size())));
    }
    if (max_rms) *max_rms = rms;
    return curve;
}

} // namespace

TranslationCheck check_translation(const RiskGenerator& risk, const TerminalSpec& claim,
                                   double shift, const PathEnsemble& ensemble,
                                   const BasisSpec& basis, double tolerance,
                                   PicardOptions options) {
    require_claim(claim, "translation");
    require_tolerance(tolerance, "translation");
    if (!std::isfinite(shift)) throw ValidationError("translation: shift must be finite");

    const PicardOptions opt = paired(options);
    TranslationCheck tc;
    tc.shift_curve =
        shift_curve_of(risk, claim, shift, ensemble, basis, opt, &tc.max_cross_path_rms);

    double worst = tc.max_cross_path_rms;
    std::string mode;
    if (risk.y_coefficient_deterministic && risk.y_kernel) {
        tc.compared_to_kernel = true;
        tc.reference = solve_bvie(KernelSpec::general(risk.y_kernel), shift, ensemble.grid());
        double mismatch = 0.0;
        for (std::size_t i = 0; i < tc.shift_curve.size(); ++i)
            mismatch = std::max(mismatch, std::abs(tc.shift_curve[i] - tc.reference[i]));
        worst = std::max(worst, mismatch);
        mode = "curve vs deterministic Volterra solve: max mismatch " + fmt(mismatch) +
               ", cross-path rms " + fmt(tc.max_cross_path_rms);
    } else {
        mode = "no deterministic y-kernel: require a nonrandom shift; cross-path rms " +
               fmt(tc.max_cross_path_rms);
    }

    tc.check.axiom = "translation";
    tc.check.statistic = worst;
    tc.check.tolerance = tolerance;
    tc.check.pass = worst <= tolerance;
    tc.check.detail = mode;
    return tc;
}

AxiomCheck check_translation_claim_independence(const RiskGenerator& risk,
                                                const TerminalSpec& claim_a,
                                                const TerminalSpec& claim_b, double shift,
                                                const PathEnsemble& ensemble,
                                                const BasisSpec& basis, double tolerance,
                                                PicardOptions options) {
    require_claim(claim_a, "translation independence");
    require_claim(claim_b, "translation independence");
    require_tolerance(tolerance, "translation independence");
    if (!std::isfinite(shift)) throw ValidationError("translation independence: shift must be finite");

    const PicardOptions opt = paired(options);
    const std::vector<double> da = shift_curve_of(risk, claim_a, shift, ensemble, basis, opt, nullptr);
    const std::vector<double> db = shift_curve_of(risk, claim_b, shift, ensemble, basis, opt, nullptr);

    double worst = 0.0;
    int worst_slice = 0;
    for (std::size_t i = 0; i < da.size(); ++i) {
        const double v = std::abs(da[i] - db[i]);
        if (v > worst) {
            worst = v;
            worst_slice = static_cast<int>(i);
        }
    }

    AxiomCheck out;
    out.axiom = "translation_claim_independence";
    out.statistic = worst;
    out.tolerance = tolerance;
    out.pass = worst <= tolerance;
    out.detail = "max |D_a(t) - D_b(t)| = " + fmt(worst) + " at slice " + std::to_string(worst_slice);
    return out;
}

CoherenceReport coherence_report(const RiskGenerator& risk, const PathEnsemble& ensemble,
                                 const BasisSpec& basis, const BatteryConfig& config) {
    if (!(config.claim_scale > 0.0) || !std::isfinite(config.claim_scale))
        throw ValidationError("battery: claim_scale must be finite and > 0");
    if (!(config.lambda > 0.0) || !std::isfinite(config.lambda))
        throw ValidationError("battery: lambda must be finite and > 0");
    if (!std::isfinite(config.shift)) throw ValidationError("battery: shift must be finite");
    if (config.forced_iterations < 1)
        throw ValidationError("battery: forced_iterations must be >= 1");

    const int n = ensemble.steps();
    const int from = config.from_slice >= 0 ? config.from_slice : n / 2;
    if (from > n) throw ValidationError("battery: from_slice out of [0, steps]");

    const CalibrationResult cal = martingale_calibration(ensemble, basis);
    const double tol =
        config.tolerance_override.value_or(config.tolerance_multiplier * cal.rmse_y);
    require_tolerance(tol, "battery");

    PicardOptions opt;
    opt.forced_iterations = config.forced_iterations;

    const double s = config.claim_scale;
    const TerminalSpec base = TerminalSpec::call_on_w(0.0).scaled(s);

    CoherenceReport report;
    report.generator_name = risk.name;
    report.tolerance = tol;
    report.rmse_y = cal.rmse_y;
    report.rmse_z = cal.rmse_z;

    // Perturb the claim strictly before the gate time; the values from the
    // gate on are untouched, so the risk there must not move at all.
    const double gate = ensemble.grid().time(from);
    const TerminalSpec gated = TerminalSpec::custom(
        [inner = base.eval, gate, s](double t, std::span<const double> w) {
            if (t < gate) return inner(t, w) + s * (0.4 + 0.2 * detail::state_sum(w));
            return inner(t, w);
        });
    report.checks.push_back(
        check_past_independence(risk, base, gated, from, ensemble, basis, opt));

    // max(w, 0) + 0.2 dominates max(w - 0.3, 0) with a gap of at least 0.2, so
    // the pathwise order survives regression noise in the tails.
    report.checks.push_back(check_monotonicity(risk, TerminalSpec::call_on_w(0.3).scaled(s),
                                               TerminalSpec::call_on_w(0.0).shifted(0.2).scaled(s),
                                               ensemble, basis, tol, opt));

    report.checks.push_back(
        check_positive_homogeneity(risk, base, config.lambda, ensemble, basis, tol, opt));

    report.checks.push_back(check_subadditivity(risk, base, TerminalSpec::put_on_w(0.0).scaled(s),
                                                ensemble, basis, tol, opt));

    report.translation =
        check_translation(risk, base, config.shift * s, ensemble, basis, tol, opt);
    report.checks.push_back(report.translation.check);

    report.all_pass = true;
    for (const AxiomCheck& c : report.checks) report.all_pass = report.all_pass && c.pass;
    return report;
}

CounterexampleReport sin_counterexample(double claim_level, const PathEnsemble& ensemble,
                                        const BasisSpec& basis, PicardOptions options) {
    if (!std::isfinite(claim_level))
        throw ValidationError("counterexample: claim level must be finite");
    if (ensemble.paths() < 2) throw ValidationError("counterexample: need at least 2 paths");

    const RiskGenerator risk = RiskGenerator::custom(sin_state_coefficient(), "sin_modulated");
    const MSolutionEstimate est =
        rho(risk, TerminalSpec::constant(claim_level), ensemble, basis, options);

    const int n = ensemble.steps();
    const int paths = ensemble.paths();
    const double dt = ensemble.grid().dt();

    CounterexampleReport report;
    report.claim_level = claim_level;
    report.solver = est.report;
    report.mean.resize(static_cast<std::size_t>(n) + 1);
    report.variance.resize(static_cast<std::size_t>(n) + 1);
    report.standard_error.resize(static_cast<std::size_t>(n) + 1);

    for (int i = 0; i <= n; ++i) {
        const auto y = est.y.slice(i);
        double mean = 0.0;
        for (double v : y) mean += v;
        mean /= static_cast<double>(paths);
        double m2 = 0.0;
        double m4 = 0.0;
        for (double v : y) {
            const double d = v - mean;
            const double d2 = d * d;
            m2 += d2;
            m4 += d2 * d2;
        }
        m2 /= static_cast<double>(paths);
        m4 /= static_cast<double>(paths);
        const double variance = m2 * static_cast<double>(paths) / (paths - 1);
        // Large-sample standard error of the sample variance.
        const double se2 =
            (m4 - m2 * m2 * static_cast<double>(paths - 3) / (paths - 1)) / paths;
        report.mean[i] = mean;
        report.variance[i] = variance;
        report.standard_error[i] = std::sqrt(std::max(se2, 0.0));
    }

    const int mid = n / 2;
    report.mid_variance = report.variance[mid];
    report.mid_standard_error = report.standard_error[mid];
    report.random_at_mid = report.mid_variance > 5.0 * report.mid_standard_error;
    report.certain_at_mid = report.mid_variance <= 2.0 * report.mid_standard_error;

    double proxy = 0.0;
    for (int i = 1; i <= n; ++i) {
        for (int j = 0; j < i; ++j) {
            const auto cell = est.z.cell(i, j);
            double acc = 0.0;
            for (double v : cell) acc += v * v;
            proxy += acc / static_cast<double>(paths) * dt * dt;
        }
    }
    report.z_proxy = proxy;
    return report;
}

} // namespace bsvie
